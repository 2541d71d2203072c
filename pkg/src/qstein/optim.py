"""Convex optimization over free families.

Every minimization here is projection-free: a fully-corrective Frank-Wolfe
loop discovers extreme points through the family's linear minimization
oracle and re-optimizes the weights over the discovered hull after every
new atom.  Nonsmooth spectral objectives (positive part, trace norm, top
eigenvalue) are handled by annealing a smooth spectral surrogate for the
search while tracking the exact objective at every point probed; reported
values are always exact evaluations, and the reported duality gap is
computed from the exact subgradient, so it upper-bounds the true
suboptimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import opalg
from .errors import (ConstraintUncertified, DimensionCap, Infeasible,
                     NoFullRankMember)
from .freesets import FreeFamily
from .opalg import DensityMatrix, HermitianOperator, eigh

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _tr_prod(a: np.ndarray, b: np.ndarray) -> float:
    """Re Tr[a b] without forming the product."""
    return float(np.einsum("ij,ji->", a, b).real)


@dataclass(frozen=True)
class SolverSettings:
    """Shared solver knobs; tol is the exit duality-gap target."""

    max_iters: int = 400
    tol: float = 1e-7
    seed: int = 0
    restarts: int = 32

    def __post_init__(self):
        if self.tol <= 0.0 or self.max_iters < 1:
            raise ValueError("tol must be positive and max_iters >= 1")


@dataclass(frozen=True)
class OptResult:
    """Outcome of a family minimization.

    ``value`` is the exact objective at ``minimizer``; ``fw_gap`` is the
    Frank-Wolfe gap computed with the exact (sub)gradient at the minimizer,
    a certified bound on the suboptimality.
    """

    value: float
    minimizer: DensityMatrix
    fw_gap: float
    iterations: int
    converged: bool


def _golden(f, lo: float, hi: float, iters: int = 18):
    """Golden-section scan of f on [lo, hi]; returns the best probe."""
    best_x, best_v = lo, f(lo)
    for x in (hi,):
        v = f(x)
        if v < best_v:
            best_x, best_v = x, v
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for x, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_x, best_v = x, v
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
            if fc < best_v:
                best_x, best_v = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
            if fd < best_v:
                best_x, best_v = d, fd
    return best_x, best_v


class _Tracker:
    """Remembers the best exact objective value seen at any probed member."""

    def __init__(self):
        self.best_value = math.inf
        self.best_mat = None

    def offer(self, mat: np.ndarray, exact: float) -> None:
        if exact < self.best_value:
            self.best_value = exact
            self.best_mat = mat.copy()


def _corrective_reweight(atoms: list[list], eval_fn, tracker: _Tracker,
                         maxiter: int = 80) -> None:
    """Fully-corrective step: re-optimize the weights over the atom hull.

    The subproblem is smooth and low-dimensional (one variable per active
    atom), solved with SLSQP on the weight simplex; atoms themselves still
    come only from the family's linear oracle.
    """
    from scipy.optimize import minimize

    mats = [a for a, _ in atoms]
    w0 = np.array([w for _, w in atoms], dtype=float)

    def fun(w):
        sigma = sum(wi * m for wi, m in zip(w, mats))
        v, g, exact = eval_fn(sigma, True)
        if w.min() >= -1e-12 and abs(w.sum() - 1.0) <= 1e-9:
            tracker.offer(sigma, exact)
        jac = np.array([_tr_prod(g, m) for m in mats])
        return v, jac

    res = minimize(fun, w0, jac=True, method="SLSQP",
                   bounds=[(0.0, 1.0)] * len(mats),
                   constraints=[{"type": "eq",
                                 "fun": lambda w: w.sum() - 1.0,
                                 "jac": lambda w: np.ones_like(w)}],
                   options={"maxiter": maxiter, "ftol": 1e-14})
    w = np.clip(res.x, 0.0, None)
    tot = w.sum()
    if tot <= 0.0:
        return
    for entry, wi in zip(atoms, w / tot):
        entry[1] = float(wi)


def _fcfw_minimize(eval_fn, family: FreeFamily, start: np.ndarray,
                   max_outer: int, gap_tol: float, seed: int,
                   tracker: _Tracker) -> tuple[np.ndarray, int]:
    """Fully-corrective Frank-Wolfe: grow the atom set through the linear
    oracle, re-optimizing the hull weights after every new atom."""
    sigma = start.copy()
    atoms: list[list] = [[sigma.copy(), 1.0]]
    _, grad, exact = eval_fn(sigma, True)
    tracker.offer(sigma, exact)
    iters = 0
    for k in range(max_outer):
        iters = k + 1
        s = family.lmo(grad, seed).mat
        fw_gap = _tr_prod(grad, sigma - s)
        if fw_gap <= gap_tol:
            break
        for entry in atoms:
            if np.allclose(entry[0], s, atol=1e-13):
                break
        else:
            atoms.append([s, 0.0])
        _corrective_reweight(atoms, eval_fn, tracker)
        atoms = [e for e in atoms if e[1] > 1e-14] or atoms[:1]
        total = sum(e[1] for e in atoms)
        sigma = sum(e[0] * (e[1] / total) for e in atoms)
        _, grad, exact = eval_fn(sigma, True)
        tracker.offer(sigma, exact)
    return sigma, iters


def _fw_minimize(eval_fn, family: FreeFamily, start: np.ndarray,
                 max_iters: int, gap_tol: float, seed: int,
                 tracker: _Tracker) -> tuple[np.ndarray, int]:
    """Frank-Wolfe driver; the outer budget scales down from max_iters.

    ``eval_fn(mat, need_grad)`` returns (surrogate value, gradient or None,
    exact value).  Exact values of every probe go to the tracker.
    """
    return _fcfw_minimize(eval_fn, family, start, max(12, max_iters // 8),
                          gap_tol, seed, tracker)


def _certified_gap(grad: np.ndarray, sigma: np.ndarray,
                   family: FreeFamily, seed: int) -> float:
    s = family.lmo(grad, seed).mat
    return max(0.0, _tr_prod(grad, sigma - s))


def frank_wolfe(value_fn, grad_fn, family: FreeFamily,
                settings: SolverSettings = SolverSettings(),
                start: DensityMatrix | None = None) -> OptResult:
    """Minimize a convex differentiable functional over the family.

    ``value_fn`` and ``grad_fn`` act on plain matrices; the returned gap is
    evaluated with ``grad_fn`` at the minimizer and certifies suboptimality.
    """
    tracker = _Tracker()

    def eval_fn(mat, need_grad):
        v = float(value_fn(mat))
        g = grad_fn(mat) if need_grad else None
        return v, g, v

    init = start.mat if start is not None else family.full_rank_witness().mat
    sigma, iters = _fw_minimize(eval_fn, family, init, settings.max_iters,
                                settings.tol, settings.seed, tracker)
    best = tracker.best_mat
    gap = _certified_gap(grad_fn(best), best, family, settings.seed)
    return OptResult(tracker.best_value,
                     DensityMatrix(HermitianOperator(family.shape, best)),
                     gap, iters, gap <= settings.tol)


# ---------------------------------------------------------------------------
# positive-part minimization
# ---------------------------------------------------------------------------

def _pospart_eval(rho_mat: np.ndarray, b: float, tau: float):
    def eval_fn(sigma: np.ndarray, need_grad: bool):
        w, V = eigh(rho_mat - b * sigma)
        exact = float(w[w > 0.0].sum())
        x = w / tau
        # softplus, stable for large |x|
        smooth = float(tau * np.sum(np.logaddexp(0.0, x)))
        grad = None
        if need_grad:
            sig = 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))
            grad = -b * ((V * sig) @ V.conj().T)
        return smooth, grad, exact
    return eval_fn


def min_positive_part(rho: DensityMatrix | HermitianOperator, b: float,
                      family: FreeFamily,
                      settings: SolverSettings = SolverSettings(),
                      start: DensityMatrix | None = None) -> OptResult:
    """Minimize Tr[(rho - b sigma)_+] over the family.

    The exit gap uses the exact subgradient -b P_+ with P_+ the projector
    onto the strictly positive eigenspace at the minimizer.
    """
    rho_mat = rho.mat
    witness = family.full_rank_witness().mat
    if b < 0.0:
        raise ValueError("b must be nonnegative")
    tracker = _Tracker()
    if b == 0.0:
        val = opalg.positive_part_trace(rho_mat)
        return OptResult(val, DensityMatrix(HermitianOperator(family.shape,
                                                              witness)),
                         0.0, 0, True)
    sigma = start.mat if start is not None else witness
    total_iters = 0
    stage_iters = max(20, settings.max_iters // 3)
    for tau in (1e-3, 1e-6, 1e-8):
        sigma, it = _fw_minimize(_pospart_eval(rho_mat, b, tau), family,
                                 sigma, stage_iters, settings.tol / 4.0,
                                 settings.seed, tracker)
        total_iters += it
        if it <= 1:
            break  # the oracle certifies the start point already
    best = tracker.best_mat
    g = -b * opalg.positive_eigenprojector(rho_mat - b * best)
    gap = _certified_gap(g, best, family, settings.seed)
    return OptResult(tracker.best_value,
                     DensityMatrix(HermitianOperator(family.shape, best)),
                     gap, total_iters, gap <= settings.tol)


# ---------------------------------------------------------------------------
# composite hypothesis test: primal and dual
# ---------------------------------------------------------------------------

def _np_test(eta: np.ndarray, sigma: np.ndarray, budget: float) -> np.ndarray:
    """Most powerful test against a single alternative at the given budget.

    Maximizes Tr[E eta] over 0 <= E <= 1 with Tr[E sigma] <= budget by
    thresholding the likelihood-ratio operator eta - b sigma, with a
    fractional weight on the crossing eigenvector to use the budget exactly.
    """
    w, V = eigh(eta)
    support = (V[:, w > 0.0] @ V[:, w > 0.0].conj().T)
    if float(np.einsum("ij,ji->", support, sigma).real) <= budget + 1e-14:
        return support

    def used(bb: float) -> float:
        proj = opalg.positive_eigenprojector(eta - bb * sigma)
        return float(np.einsum("ij,ji->", proj, sigma).real)

    lo, hi = 0.0, 1.0
    while used(hi) > budget and hi < 1e12:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if used(mid) > budget:
            lo = mid
        else:
            hi = mid
    w, V = eigh(eta - hi * sigma)
    pos = w > 0.0
    E = V[:, pos] @ V[:, pos].conj().T
    spent = float(np.einsum("ij,ji->", E, sigma).real)
    rest = budget - spent
    if rest > 0.0:
        # greedily add the eigenvectors at the threshold
        order = np.argsort(-w)
        for i in order:
            if pos[i] or rest <= 1e-15:
                continue
            v = V[:, i]
            cost = float(np.vdot(v, sigma @ v).real)
            gain = float(np.vdot(v, eta @ v).real)
            if gain <= 0.0:
                break
            frac = 1.0 if cost <= 1e-18 else min(1.0, rest / cost)
            E = E + frac * np.outer(v, v.conj())
            rest -= frac * cost
    return E


def hypothesis_primal(eta: DensityMatrix, K: float, family: FreeFamily,
                      settings: SolverSettings = SolverSettings()) -> float:
    """Best acceptance probability of eta under worst-case free error <= 1/K.

    Alternating ascent: a most-powerful test against the running average of
    the worst-case free states, then a feasibility rescaling certified by
    maximizing Tr[E sigma] over the family at exit.
    """
    if K <= 0.0:
        raise ValueError("K must be positive")
    budget = min(1.0, 1.0 / K)
    eta_mat = eta.mat
    try:
        sigma_bar = family.full_rank_witness().mat
    except NoFullRankMember:
        sigma_bar = family.lmo(np.zeros_like(eta_mat), settings.seed).mat
    best_val, best_E = 0.0, np.zeros_like(eta_mat)
    stale = 0
    rounds = min(max(40, settings.max_iters), 400)
    for t in range(1, rounds + 1):
        E = _np_test(eta_mat, sigma_bar, budget)
        worst = family.lmo(-E, settings.seed).mat
        m = _tr_prod(E, worst)
        val = _tr_prod(E, eta_mat)
        if m > budget:
            val *= budget / m
            E_feas = E * (budget / m)
        else:
            E_feas = E
        if val > best_val + 1e-12:
            best_val, best_E = val, E_feas
            stale = 0
        else:
            stale += 1
            if stale > 25:
                break
        sigma_bar = ((t - 1) * sigma_bar + worst) / t
    check = _tr_prod(best_E, family.lmo(-best_E, settings.seed).mat)
    if check > budget + 1e-9:
        raise ConstraintUncertified(
            f"exit constraint {check:.3e} exceeds budget {budget:.3e}")
    return best_val


def hypothesis_dual(eta: DensityMatrix, K: float, family: FreeFamily,
                    settings: SolverSettings = SolverSettings()) -> float:
    """min over b in [0, K] and sigma of Tr[(eta - b sigma)_+] + b/K.

    Any concrete (b, sigma) upper-bounds the primal, so the returned value is
    a certified upper bound regardless of search quality.  Coarse grid on b
    followed by a golden-section refinement.
    """
    if K <= 0.0:
        raise ValueError("K must be positive")
    inner_settings = SolverSettings(max_iters=max(60, settings.max_iters // 4),
                                    tol=settings.tol, seed=settings.seed,
                                    restarts=settings.restarts)

    def value_at(b: float) -> float:
        res = min_positive_part(eta, b, family, inner_settings)
        return res.value + b / K

    grid = np.linspace(0.0, K, 25)
    vals = [value_at(b) for b in grid]
    i = int(np.argmin(vals))
    lo = grid[max(0, i - 1)]
    hi = grid[min(len(grid) - 1, i + 1)]
    b_best, v_best = _golden(value_at, float(lo), float(hi), iters=24)
    return min(v_best, float(np.min(vals)))


# ---------------------------------------------------------------------------
# relative entropy of resource
# ---------------------------------------------------------------------------

def _relent_eval(rho_mat: np.ndarray, witness: np.ndarray, floor: float = 1e-9):
    w_rho, _ = eigh(rho_mat)
    w_rho = w_rho[w_rho > 0.0]
    tr_rho_log_rho = float((w_rho * np.log2(w_rho)).sum())

    def eval_fn(sigma: np.ndarray, need_grad: bool):
        mixed = (1.0 - floor) * sigma + floor * witness
        w, V = eigh(mixed)
        w = np.clip(w, 1e-300, None)
        lw = np.log2(w)
        rho_t = V.conj().T @ rho_mat @ V
        value = tr_rho_log_rho - float(np.sum(np.diag(rho_t).real * lw))
        grad = None
        if need_grad:
            diff = w[:, None] - w[None, :]
            phi = np.where(np.abs(diff) > 1e-14,
                           (lw[:, None] - lw[None, :]) / np.where(
                               np.abs(diff) > 1e-14, diff, 1.0),
                           1.0 / (w[:, None] * math.log(2.0)))
            grad = -(1.0 - floor) * (V @ (phi * rho_t) @ V.conj().T)
        return value, grad, value
    return eval_fn


def rel_ent_of_resource(rho: DensityMatrix | HermitianOperator,
                        family: FreeFamily,
                        settings: SolverSettings = SolverSettings()) -> OptResult:
    """min over the family of D(rho || sigma).

    Iterates are kept full rank by mixing a sliver of the full-rank witness
    into every evaluation point (the witness is free and the family convex,
    so membership is preserved exactly).
    """
    witness = family.full_rank_witness().mat
    floor = 1e-9
    eval_fn = _relent_eval(rho.mat, witness, floor)
    tracker = _Tracker()
    sigma, iters = _fw_minimize(eval_fn, family, witness,
                                settings.max_iters, settings.tol,
                                settings.seed, tracker)
    best = tracker.best_mat
    _, grad, _ = eval_fn(best, True)
    gap = _certified_gap(grad, best, family, settings.seed)
    mixed = (1.0 - floor) * best + floor * witness
    return OptResult(tracker.best_value,
                     DensityMatrix(HermitianOperator(family.shape, mixed)),
                     gap, iters, gap <= settings.tol)


def regularized_sequence(rho: DensityMatrix, family: FreeFamily,
                         n_max: int,
                         settings: SolverSettings = SolverSettings(),
                         dim_cap: int = 1024) -> list[tuple[int, float]]:
    """Per-copy values of the family relative entropy on powers of rho."""
    d = rho.total_dim
    if d ** n_max > dim_cap:
        raise DimensionCap(
            f"dimension {d ** n_max} at n_max={n_max} exceeds cap {dim_cap}")
    out = []
    for n in range(1, n_max + 1):
        power = opalg.tensor_power(rho.op, n)
        res = rel_ent_of_resource(DensityMatrix(power), family.at_copies(n),
                                  settings)
        out.append((n, res.value / n))
    return out


# ---------------------------------------------------------------------------
# generalized robustness
# ---------------------------------------------------------------------------

def _lambda_max_eval(rho_mat: np.ndarray, scale: float, tau: float | None):
    def eval_fn(sigma: np.ndarray, need_grad: bool):
        w, V = eigh(rho_mat - scale * sigma)
        exact = float(w[-1])
        if tau is None:
            grad = None
            if need_grad:
                v = V[:, -1]
                grad = -scale * np.outer(v, v.conj())
            return exact, grad, exact
        x = (w - w[-1]) / tau
        lse = float(w[-1] + tau * np.log(np.sum(np.exp(x))))
        grad = None
        if need_grad:
            soft = np.exp(x)
            soft /= soft.sum()
            grad = -scale * ((V * soft) @ V.conj().T)
        return lse, grad, exact
    return eval_fn


def _min_lambda_max(rho_mat: np.ndarray, scale: float, family: FreeFamily,
                    settings: SolverSettings) -> tuple[float, np.ndarray]:
    tracker = _Tracker()
    sigma = family.full_rank_witness().mat
    stage_iters = max(20, settings.max_iters // 3)
    for tau in (1e-2, 1e-5, None):
        sigma, it = _fw_minimize(_lambda_max_eval(rho_mat, scale, tau), family,
                                 sigma, stage_iters, settings.tol / 4.0,
                                 settings.seed, tracker)
        if it <= 1:
            break
    return tracker.best_value, tracker.best_mat


def generalized_robustness(rho: DensityMatrix, family: FreeFamily,
                           settings: SolverSettings = SolverSettings(),
                           s_tol: float = 1e-6,
                           return_witness: bool = False):
    """Least s >= 0 with (rho + s tau)/(1+s) free for some state tau.

    Feasibility at s is the eigenvalue condition: some family member sigma
    satisfies (1+s) sigma >= rho, tested by minimizing the top eigenvalue of
    rho - (1+s) sigma over the family; bisection on s.
    """
    feas_tol = 1e-9

    def feasible(s: float):
        val, mat = _min_lambda_max(rho.mat, 1.0 + s, family, settings)
        return val <= feas_tol, mat

    ok, mat = feasible(0.0)
    if ok:
        out = (0.0, DensityMatrix(HermitianOperator(family.shape, mat)))
        return out if return_witness else 0.0
    lo, hi = 0.0, 1.0
    mat_hi = None
    for _ in range(60):
        ok, mat = feasible(hi)
        if ok:
            mat_hi = mat
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise Infeasible("no feasible robustness parameter found")
    while hi - lo > s_tol:
        mid = 0.5 * (lo + hi)
        ok, mat = feasible(mid)
        if ok:
            hi, mat_hi = mid, mat
        else:
            lo = mid
    if return_witness:
        return hi, DensityMatrix(HermitianOperator(family.shape, mat_hi))
    return hi


# ---------------------------------------------------------------------------
# trace distance to a family
# ---------------------------------------------------------------------------

def _distance_eval(target: np.ndarray, tau: float | None):
    def eval_fn(sigma: np.ndarray, need_grad: bool):
        w, V = eigh(sigma - target)
        exact = float(np.abs(w).sum())
        if tau is None:
            grad = None
            if need_grad:
                sgn = np.sign(w)
                sgn[np.abs(w) < 1e-14] = 0.0  # exclude the zero eigenspace
                grad = (V * sgn) @ V.conj().T
            return exact, grad, exact
        h = np.sqrt(w * w + tau * tau) - tau
        smooth = float(h.sum())
        grad = None
        if need_grad:
            grad = (V * (w / np.sqrt(w * w + tau * tau))) @ V.conj().T
        return smooth, grad, exact
    return eval_fn


def distance_to_family(sigma_tilde: DensityMatrix, family: FreeFamily,
                       settings: SolverSettings = SolverSettings(),
                       start: DensityMatrix | None = None) -> OptResult:
    """min over the family of || sigma_tilde - sigma ||_1."""
    target = sigma_tilde.mat
    tracker = _Tracker()
    sigma = (start.mat if start is not None
             else family.full_rank_witness().mat)
    stage_iters = max(20, settings.max_iters // 3)
    total = 0
    for tau in (1e-3, 1e-6, None):
        sigma, it = _fw_minimize(_distance_eval(target, tau), family, sigma,
                                 stage_iters, settings.tol / 4.0,
                                 settings.seed, tracker)
        total += it
        if it <= 1:
            break
    best = tracker.best_mat
    _, grad, _ = _distance_eval(target, None)(best, True)
    gap = _certified_gap(grad, best, family, settings.seed)
    return OptResult(tracker.best_value,
                     DensityMatrix(HermitianOperator(family.shape, best)),
                     gap, total, gap <= settings.tol)
