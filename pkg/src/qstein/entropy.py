"""Entropic functionals and the quantitative bounds used by the certificates.

All logarithms are base 2.  The relative entropy is infinite when the first
argument leaks weight outside the support of the second; the leak is measured
numerically and compared with an explicit tolerance, since the dichotomy
"finite iff supported" needs a concrete criterion in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import opalg
from .certificates import Certificate
from .errors import PremiseFailed, SingularSigma
from .opalg import DensityMatrix, eigh

SUPPORT_LEAK_TOL = 1e-9


@dataclass(frozen=True)
class RelEntResult:
    """Value of a relative entropy together with its support diagnostics."""

    value: float  # math.inf when the support condition fails
    support_violation: bool
    support_leak: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


@dataclass(frozen=True)
class ContinuityBound:
    """Evaluated continuity bound 3 log2^2(1/m) / (1-m) * sqrt(eps/2)."""

    m_tilde: float
    epsilon: float
    bound_value: float


def binary_entropy(p: float) -> float:
    """-p log2 p - (1-p) log2 (1-p) with the 0 log 0 = 0 convention."""
    if p < 0.0 or p > 1.0:
        raise ValueError(f"binary entropy needs p in [0,1], got {p}")
    out = 0.0
    if p > 0.0:
        out -= p * math.log2(p)
    if p < 1.0:
        out -= (1.0 - p) * math.log2(1.0 - p)
    return out


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-sum lambda log2 lambda over the nonzero spectrum."""
    w = rho.op.eigvals()
    w = w[w > 0.0]
    return float(-(w * np.log2(w)).sum())


def _spectral_split(mat: np.ndarray, rel_cutoff: float = opalg.SUPPORT_CUTOFF):
    """Eigenpairs split into support and null parts of a PSD matrix."""
    w, V = eigh(mat)
    cut = rel_cutoff * max(float(w[-1]), 0.0)
    on = w > cut
    return w, V, on


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix,
                     leak_tol: float = SUPPORT_LEAK_TOL) -> RelEntResult:
    """Tr[rho (log2 rho - log2 sigma)], infinite outside sigma's support.

    The support test projects rho onto the numerical null space of sigma and
    compares the leaked weight against ``leak_tol``.
    """
    if rho.shape.dims != sigma.shape.dims:
        raise opalg.ShapeMismatch("relative entropy needs matching shapes")
    w, V, on = _spectral_split(sigma.mat)
    null_cols = V[:, ~on]
    leak = 0.0
    if null_cols.shape[1]:
        leak = float(np.einsum("ij,jk,ki->", null_cols.conj().T, rho.mat,
                               null_cols).real)
    if leak > leak_tol:
        return RelEntResult(math.inf, True, leak)
    log_sigma = (V[:, on] * np.log2(w[on])) @ V[:, on].conj().T
    rw = rho.op.eigvals()
    rw = rw[rw > 0.0]
    tr_rho_log_rho = float((rw * np.log2(rw)).sum())
    tr_rho_log_sigma = float(np.trace(rho.mat @ log_sigma).real)
    return RelEntResult(tr_rho_log_rho - tr_rho_log_sigma, False, leak)


def entropy_continuity_bound(d: int, eps: float) -> float:
    """2 eps log2(d) + h(2 eps), valid for trace distance at most eps <= 1/2."""
    if eps < 0.0 or eps > 0.5:
        raise ValueError(f"continuity bound needs eps in [0, 1/2], got {eps}")
    return 2.0 * eps * math.log2(d) + binary_entropy(2.0 * eps)


def relent_continuity_bound(m_tilde: float, eps: float) -> ContinuityBound:
    """Continuity of D(rho||.) over states dominating m_tilde * rho."""
    if not 0.0 < m_tilde < 1.0:
        raise ValueError(f"m_tilde must lie in (0,1), got {m_tilde}")
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    bound = 3.0 * math.log2(1.0 / m_tilde) ** 2 / (1.0 - m_tilde) * math.sqrt(eps / 2.0)
    return ContinuityBound(m_tilde, eps, bound)


def relent_upper_bound(sigma: DensityMatrix,
                       rel_cutoff: float = opalg.SUPPORT_CUTOFF) -> float:
    """log2(1/lambda_min(sigma)); dominates D(rho||sigma) for every rho."""
    w = sigma.op.eigvals()
    if w[0] <= rel_cutoff * float(w[-1]):
        raise SingularSigma(f"lambda_min {w[0]:.3e} is below the support cutoff")
    return float(-np.log2(w[0]))


def dominance_to_relent_bound(rho: DensityMatrix, sigma: DensityMatrix,
                              alpha: float, tol: float = 1e-9) -> Certificate:
    """From rho <= alpha sigma (checked) conclude D(rho||sigma) <= log2 alpha."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    gap = alpha * sigma.op - rho.op
    lam = gap.lambda_min()
    if lam < -tol:
        raise PremiseFailed(
            f"rho <= alpha sigma fails: lambda_min = {lam:.3e} < -{tol:.0e}"
        )
    d = relative_entropy(rho, sigma)
    margin = math.log2(alpha) - d.value
    return Certificate("dominance-to-relative-entropy", margin, tol)
