"""atcws: a symbolic verifier for a timed broadcast process calculus."""

__version__ = "1.0.0"
