"""
Pydantic models for settings and check reports.

These models define the shape of verifier configuration and of every
verdict the checkers hand back to the command line, with strong typing and
validation.
"""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


# =============================================================================
# Settings
# =============================================================================

class Settings(BaseModel):
    """Bounds and defaults shared by every check."""
    max_sigma: int = Field(10, ge=0, description="Number of sigma layers explored")
    deduction_depth: int = Field(2, ge=0, description="Constructor layers a deducible message may add to known ones")
    candidate_depth: int = Field(2, ge=0, description="Constructor depth of top-attacker candidates")
    max_candidates: int = Field(256, ge=1, description="Per-slot cap on top-attacker candidates")
    tau_bound: int = Field(64, ge=1, description="Longest tau path followed in one weak step")
    state_budget: int = Field(200000, ge=1, description="Largest state or pair table before giving up")
    unfold_bound: int = Field(32, ge=1, description="Definition unfoldings allowed without a time guard")
    chain_length: int = Field(8, ge=1, description="Key chain length n")
    buffer_size: int = Field(3, ge=1, description="LiSP key buffer size s")
    receivers: int = Field(2, ge=1, description="Receiver count h for authenticated broadcast")
    jobs: int = Field(1, ge=1, description="Worker threads for independent queries")
    log_level: str = Field("WARNING", description="Logging level name")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {value}")
        return level


class Bounds(BaseModel):
    """Bounds recorded in a report header."""
    max_sigma: int = Field(..., description="Sigma layers explored")
    deduction_depth: Optional[int] = Field(None, description="Constructor layers allowed on top of known messages")
    candidate_depth: Optional[int] = Field(None, description="Top-attacker candidate depth")

    def render(self) -> str:
        parts = [f"max_sigma={self.max_sigma}"]
        if self.deduction_depth is not None:
            parts.append(f"deduction_depth={self.deduction_depth}")
        if self.candidate_depth is not None:
            parts.append(f"candidate_depth={self.candidate_depth}")
        return " ".join(parts)


# =============================================================================
# Verdicts
# =============================================================================

class Verdict(str, Enum):
    """Outcome of a check."""
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"

    @property
    def exit_code(self) -> int:
        return {"holds": 0, "fails": 1, "inconclusive": 2}[self.value]


def combine_verdicts(verdicts: List[Verdict]) -> Verdict:
    """
    Compose verdicts of independent sub-checks.

    Args:
        verdicts: Sub-check verdicts in any order.

    Returns:
        FAILS if any failed, else INCONCLUSIVE if any was inconclusive, else HOLDS.
    """
    if Verdict.FAILS in verdicts:
        return Verdict.FAILS
    if Verdict.INCONCLUSIVE in verdicts:
        return Verdict.INCONCLUSIVE
    return Verdict.HOLDS


# =============================================================================
# Reports
# =============================================================================

class CheckReport(BaseModel):
    """Verdict plus evidence for any checker."""
    check: str = Field(..., description="Name of the check that ran")
    subject: str = Field("", description="What was checked")
    verdict: Verdict = Field(..., description="holds, fails or inconclusive")
    bounds: Optional[Bounds] = Field(None, description="Bounds used")
    evidence: List[str] = Field(default_factory=list, description="Body lines")
    violations: List[str] = Field(default_factory=list, description="One entry per violation found")
    notes: List[str] = Field(default_factory=list, description="Informational notes")
    caveats: List[str] = Field(default_factory=list, description="Footnotes qualifying the verdict")
    traces: Dict[str, List[str]] = Field(default_factory=dict, description="Named traces, one label per line")

    @property
    def ok(self) -> bool:
        return self.verdict == Verdict.HOLDS

    @property
    def exit_code(self) -> int:
        return self.verdict.exit_code

    def render(self) -> str:
        """
        Render the report as deterministic text.

        Returns:
            Header, body and footnotes separated by blank lines.
        """
        lines = [f"check: {self.check}"]
        if self.subject:
            lines.append(f"subject: {self.subject}")
        if self.bounds is not None:
            lines.append(f"bounds: {self.bounds.render()}")
        lines.append(f"verdict: {self.verdict.value}")
        body = list(self.evidence)
        if self.violations:
            body.append("violations:")
            body.extend(f"  - {item}" for item in self.violations)
        if self.notes:
            body.append("notes:")
            body.extend(f"  - {item}" for item in self.notes)
        for name in sorted(self.traces):
            body.append(f"trace {name}:")
            body.extend(f"  {label}" for label in self.traces[name])
        if body:
            lines.append("")
            lines.extend(body)
        if self.caveats:
            lines.append("")
            lines.extend(f"[{index}] {text}" for index, text in enumerate(self.caveats, start=1))
        return "\n".join(lines) + "\n"
