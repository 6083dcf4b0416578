"""Structured pass/fail evidence shared by all property checkers.

A report carries counts rather than booleans so that a failing run keeps
enough context to debug: how many samples were tried, the worst violation
seen, and up to ten concrete witnesses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

MAX_WITNESSES = 10

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass
class VerificationReport:
    name: str
    samples: int = 0
    violations: int = 0
    worst_violation: float = 0.0
    tolerance: float = 0.0
    verdict: str = PASS
    witnesses: list[Any] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.verdict not in (PASS, FAIL, INCONCLUSIVE):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if (self.verdict == PASS) != (self.violations == 0):
            raise ValueError(
                f"inconsistent report {self.name!r}: verdict={self.verdict} "
                f"with violations={self.violations}"
            )
        if (len(self.witnesses) > 0) != (self.violations > 0):
            raise ValueError(
                f"inconsistent report {self.name!r}: {len(self.witnesses)} witnesses "
                f"with violations={self.violations}"
            )
        if len(self.witnesses) > MAX_WITNESSES:
            self.witnesses = self.witnesses[:MAX_WITNESSES]

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def summary_line(self) -> str:
        extra = ""
        if self.details:
            keys = ", ".join(f"{k}={self.details[k]!r}" for k in sorted(self.details))
            extra = f" [{keys}]"
        return (
            f"{self.verdict.upper():12s} {self.name}: "
            f"{self.violations}/{self.samples} violations, "
            f"worst={self.worst_violation:.3e}, tol={self.tolerance:.3e}{extra}"
        )

    def to_text(self) -> str:
        lines = [
            f"checker = {self.name}",
            f"verdict = {self.verdict}",
            f"samples = {self.samples}",
            f"violations = {self.violations}",
            f"worst_violation = {self.worst_violation!r}",
            f"tolerance = {self.tolerance!r}",
        ]
        for key in sorted(self.details):
            lines.append(f"detail.{key} = {self.details[key]!r}")
        for wit in self.witnesses:
            lines.append(f"witness = {wit!r}")
        return "\n".join(lines) + "\n"


def make_report(
    name: str,
    samples: int,
    failures: list[Any],
    worst: float,
    tolerance: float,
    details: dict[str, Any] | None = None,
    inconclusive: bool = False,
) -> VerificationReport:
    """Assemble a report, deriving the verdict from the failure list.

    ``inconclusive`` marks searches for existential properties whose budget
    ran out: absence of a witness is then not a disproof.
    """
    if failures:
        verdict = INCONCLUSIVE if inconclusive else FAIL
    else:
        verdict = PASS
    return VerificationReport(
        name=name,
        samples=samples,
        violations=len(failures),
        worst_violation=float(worst),
        tolerance=float(tolerance),
        verdict=verdict,
        witnesses=failures[:MAX_WITNESSES],
        details=dict(details or {}),
    )
