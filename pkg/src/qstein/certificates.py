"""Numeric certificates for verified inequalities."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Certificate:
    """Record of a checked inequality.

    ``margin`` is the smallest eigenvalue of (RHS - LHS) for operator
    inequalities, or (bound - value) for scalar bounds; the check passes
    when the margin is no worse than ``-tolerance``.
    """

    name: str
    margin: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance

    def __str__(self) -> str:
        tag = "pass" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: margin={self.margin:.6e} tol={self.tolerance:.1e}"
