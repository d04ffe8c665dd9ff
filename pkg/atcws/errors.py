"""
Exception hierarchy for the verifier.

Every error carries a human-readable detail and the process exit code the
command line reports for it.
"""

from typing import Optional


class AtcwsError(Exception):
    """Base error with a detail message and an exit code."""

    exit_code = 3

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class StructuralError(AtcwsError):
    """Malformed model: arity mismatch, undefined definition, unbound variable, unknown node."""


class DslSyntaxError(AtcwsError):
    """Source text does not parse."""

    def __init__(self, detail: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {detail}")
        self.reason = detail
        self.line = line
        self.column = column


class ResolutionError(AtcwsError):
    """A name in a source model does not resolve."""


class UnknownProtocolError(AtcwsError):
    """Unknown protocol name or variant."""


class WiringError(AtcwsError):
    """Attacker wiring does not fit the protocol network."""


class PreconditionError(AtcwsError):
    """A check refused to run because its hypothesis does not hold."""

    exit_code = 1


class RegressionError(AtcwsError):
    """A bundled golden trace no longer replays."""

    exit_code = 1
