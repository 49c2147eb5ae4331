"""Lasso solvers and first-order optimality machinery.

Solves  min_x  0.5 * ||y - A x||_2^2 + gamma * ||x||_1  two independent ways:

- :func:`solve_homotopy` tracks the exact piecewise-affine regularization path
  from gamma_max = ||A^T y||_inf down to the requested gamma, maintaining a
  Cholesky factor of the active Gram matrix under rank-one up/downdates;
- :func:`solve_proximal` runs an accelerated proximal-gradient iteration with
  an objective-decrease safeguard and explicit first-order termination.

On every open interval between path breakpoints the support J and sign vector
s are constant and the restricted solution is affine in gamma:

    x_J(gamma) = u - gamma * v,   u = (A_J^T A_J)^{-1} A_J^T y,
                                  v = (A_J^T A_J)^{-1} s,

so the residual splits orthogonally as r(gamma) = z + gamma * A_J v with
z = y - A_J u, giving ||r(gamma)||^2 = ||z||^2 + gamma^2 ||A_J v||^2 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .ensemble import SensingMatrix
from .linalg import ActiveCholesky, RankDeficiencyError, gram_solve

__all__ = [
    "DEFAULT_SUPPORT_TOL",
    "LassoSolution",
    "PathSegment",
    "HomotopyPath",
    "KKTReport",
    "numerical_support",
    "solve_homotopy",
    "solve_proximal",
    "check_kkt",
    "candidate_solution",
    "residual_ratio",
    "path_to_csv",
]

# index i belongs to the numerical support iff |x[i]| > tol * max(1, ||x||_inf)
DEFAULT_SUPPORT_TOL = 1e-9

# two path events closer than this (relative to gamma) are treated as a tie,
# and the deactivation is processed first to keep the active Gram invertible
_EVENT_TIE_TOL = 1e-12


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, SensingMatrix):
        return a.entries
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("matrix must be 2-d")
    return m


def numerical_support(x: np.ndarray, tau_supp: float | None = None) -> np.ndarray:
    """0-based indices of entries above the numerical-support threshold."""
    x = np.asarray(x)
    if tau_supp is None:
        tau_supp = DEFAULT_SUPPORT_TOL * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
    return np.flatnonzero(np.abs(x) > tau_supp).astype(np.int64)


@dataclass(frozen=True)
class KKTReport:
    ok: bool
    gamma: float
    tol: float
    correlations: np.ndarray          # A^T (y - A x), length p
    support: np.ndarray               # numerical support the verdict used
    on_support_violation: float       # max |<a_i, r> - gamma*sign(x_i)| over support
    off_support_excess: float         # max(|<a_j, r>|) - gamma over complement (<=0 ok)


@dataclass(frozen=True)
class PathSegment:
    """Support/sign data valid on the open gamma interval (lo, hi)."""

    lo: float
    hi: float
    support: np.ndarray
    signs: np.ndarray
    u: np.ndarray                     # least-squares coefficients on the support
    v: np.ndarray                     # (A_J^T A_J)^{-1} s
    z_norm2: float                    # ||y - A_J u||^2, the projected residual
    d_norm2: float                    # ||A_J v||^2

    def coeffs_at(self, gamma: float) -> np.ndarray:
        return self.u - gamma * self.v


@dataclass(frozen=True)
class HomotopyPath:
    """Piecewise description of gamma -> x(gamma) on [gamma_stop, gamma_max].

    ``breakpoints`` is increasing with breakpoints[-1] = gamma_max; segment i
    covers (breakpoints[i], breakpoints[i+1]). Above gamma_max the solution is
    identically zero. The first breakpoint is 0 when the path was tracked all
    the way down, otherwise the gamma at which tracking stopped.
    """

    p: int
    gamma_max: float
    y_norm2: float
    breakpoints: np.ndarray
    segments: tuple

    def segment_at(self, gamma: float) -> PathSegment | None:
        """Segment containing gamma, or None when gamma >= gamma_max."""
        if gamma >= self.gamma_max:
            return None
        if gamma < self.breakpoints[0]:
            raise ValueError(
                f"gamma={gamma} below the tracked range [{self.breakpoints[0]}, {self.gamma_max}]"
            )
        idx = int(np.searchsorted(self.breakpoints, gamma, side="right")) - 1
        idx = min(idx, len(self.segments) - 1)
        return self.segments[idx]

    def solution_at(self, gamma: float) -> np.ndarray:
        x = np.zeros(self.p)
        seg = self.segment_at(gamma)
        if seg is not None:
            x[seg.support] = seg.coeffs_at(gamma)
        return x

    def residual_norm2_at(self, gamma: float) -> float:
        seg = self.segment_at(gamma)
        if seg is None:
            return self.y_norm2
        return seg.z_norm2 + gamma * gamma * seg.d_norm2


@dataclass(frozen=True)
class LassoSolution:
    gamma: float
    x: np.ndarray
    support: np.ndarray
    signs: np.ndarray
    kkt: KKTReport
    unique: bool
    method: str
    converged: bool = True
    iterations: int = 0
    path: HomotopyPath | None = field(default=None, repr=False)


def objective_value(a, y: np.ndarray, x: np.ndarray, gamma: float) -> float:
    """0.5 ||y - Ax||^2 + gamma ||x||_1."""
    mat = _as_matrix(a)
    r = y - mat @ x
    return 0.5 * float(r @ r) + gamma * float(np.abs(x).sum())


def check_kkt(a, y: np.ndarray, x: np.ndarray, gamma: float, tol: float,
              tau_supp: float | None = None) -> KKTReport:
    """First-order optimality verdict with per-index margins.

    True iff A_I^T(y - Ax) = gamma * sign(x_I) within ``tol`` on the numerical
    support I and |<a_j, y - Ax>| <= gamma + tol off it.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    mat = _as_matrix(a)
    x = np.asarray(x, dtype=np.float64)
    r = y - mat @ x
    corr = mat.T @ r
    support = numerical_support(x, tau_supp)
    mask = np.zeros(mat.shape[1], dtype=bool)
    mask[support] = True
    on_viol = float(np.max(np.abs(corr[support] - gamma * np.sign(x[support])))) if support.size else 0.0
    off = np.abs(corr[~mask])
    off_excess = float(off.max() - gamma) if off.size else -gamma
    ok = on_viol <= tol and off_excess <= tol
    return KKTReport(ok=ok, gamma=gamma, tol=tol, correlations=corr, support=support,
                     on_support_violation=on_viol, off_support_excess=off_excess)


def candidate_solution(a, support, signs, y: np.ndarray, gamma: float) -> np.ndarray:
    """Closed-form candidate with prescribed support and signs.

    Returns the dense vector whose restriction to the support is
    (A_I^T A_I)^{-1} A_I^T y - gamma (A_I^T A_I)^{-1} signs and which vanishes
    elsewhere; it is the only vector that can solve the Lasso with that
    support/sign pattern.
    """
    mat = _as_matrix(a)
    support = np.asarray(support, dtype=np.int64)
    signs = np.asarray(signs, dtype=np.float64)
    if support.size != signs.size:
        raise ValueError("support and signs must have equal length")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    x = np.zeros(mat.shape[1])
    if support.size == 0:
        return x
    if not np.all(np.abs(signs) == 1.0):
        raise ValueError("signs must be +-1")
    a_sub = mat[:, support]
    rhs = np.column_stack([a_sub.T @ y, signs])
    sol = gram_solve(a_sub, rhs)
    x[support] = sol[:, 0] - gamma * sol[:, 1]
    return x


# --- homotopy ----------------------------------------------------------------

def _segment_data(mat, y, active: list[int], signs: list[float], chol: ActiveCholesky):
    a_sub = mat[:, active]
    s = np.asarray(signs)
    if chol.condition_estimate() > chol.refactor_threshold:
        chol.refactor(a_sub.T @ a_sub)
    sol = chol.solve(np.column_stack([a_sub.T @ y, s]))
    u, v = sol[:, 0], sol[:, 1]
    z = y - a_sub @ u
    d_dir = a_sub @ v
    return u, v, z, d_dir


def solve_homotopy(a, y: np.ndarray, gamma: float, *, return_path: bool = False,
                   gamma_stop: float | None = None,
                   tau_supp: float | None = None) -> LassoSolution:
    """Exact path solution of the Lasso at ``gamma``.

    The path is tracked from ||A^T y||_inf down to ``gamma`` (or the smaller
    ``gamma_stop`` when a longer path is requested alongside the solution).
    Requires the active columns to stay in general position; a numerically
    dependent active set raises :class:`RankDeficiencyError` instead of
    silently continuing.
    """
    mat = _as_matrix(a)
    y = np.asarray(y, dtype=np.float64)
    n, p = mat.shape
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    stop = gamma if gamma_stop is None else float(gamma_stop)
    if stop > gamma:
        raise ValueError("gamma_stop must not exceed gamma")

    corr0 = mat.T @ y
    gamma_max = float(np.max(np.abs(corr0))) if p else 0.0
    y_norm2 = float(y @ y)

    segments: list[PathSegment] = []
    bps_desc: list[float] = [gamma_max]

    active: list[int] = []
    signs: list[float] = []
    chol = ActiveCholesky()
    off_mask = np.ones(p, dtype=bool)

    if gamma_max > 0 and stop < gamma_max:
        j0 = int(np.argmax(np.abs(corr0)))
        active.append(j0)
        signs.append(float(np.sign(corr0[j0])))
        chol.insert(np.zeros(0), float(mat[:, j0] @ mat[:, j0]))
        off_mask[j0] = False
        # single-threaded BLAS: the path interleaves tiny triangular solves
        # with medium matvecs, where thread-pool handoff dominates runtime
        with threadpool_limits(limits=1, user_api="blas"):
            _track_path(mat, y, stop, gamma_max, active, signs, chol, off_mask,
                        segments, bps_desc)

    path = HomotopyPath(p=p, gamma_max=gamma_max, y_norm2=y_norm2,
                        breakpoints=np.array(bps_desc[::-1]), segments=tuple(segments[::-1]))

    x = path.solution_at(gamma) if gamma < gamma_max else np.zeros(p)
    support = numerical_support(x, tau_supp)
    kkt = check_kkt(mat, y, x, gamma, tol=1e-8, tau_supp=tau_supp)
    unique = _uniqueness_flag(mat, kkt.correlations, gamma, n)
    return LassoSolution(gamma=gamma, x=x, support=support, signs=np.sign(x[support]),
                         kkt=kkt, unique=unique, method="homotopy",
                         path=path if return_path else None)


def _track_path(mat, y, stop, gamma_max, active, signs, chol, off_mask,
                segments, bps_desc) -> None:
    """Run the breakpoint loop from gamma_max down to ``stop`` (in place)."""
    n, p = mat.shape
    gamma_hi = gamma_max
    max_events = 100 + 50 * min(n, p)
    for _ in range(max_events):
        u, v, z, d_dir = _segment_data(mat, y, active, signs, chol)
        tie = _EVENT_TIE_TOL * max(1.0, gamma_hi)

        # deactivation: active coefficient u_i - gamma v_i crosses zero
        with np.errstate(divide="ignore", invalid="ignore"):
            g_deact = np.where(v != 0, u / np.asarray(v), -np.inf)
        g_deact = np.where(np.isfinite(g_deact), g_deact, -np.inf)
        g_deact[g_deact >= gamma_hi - tie] = -np.inf
        best_deact = float(g_deact.max()) if g_deact.size else -np.inf
        # activation: off-support correlation b_j + gamma d_j hits +-gamma
        # (full-width matvecs, then mask: avoids large submatrix copies)
        b = (mat.T @ z)[off_mask]
        d = (mat.T @ d_dir)[off_mask]
        with np.errstate(divide="ignore", invalid="ignore"):
            g_plus = b / (1.0 - d)
            g_minus = -b / (1.0 + d)
        cand = np.concatenate([g_plus, g_minus])
        cand = np.where(np.isfinite(cand), cand, -np.inf)
        cand[cand >= gamma_hi - tie] = -np.inf
        best_act = float(cand.max()) if cand.size else -np.inf

        nxt = max(best_deact, best_act, 0.0)
        if nxt <= stop:
            segments.append(PathSegment(
                lo=stop, hi=gamma_hi, support=np.array(active, dtype=np.int64),
                signs=np.array(signs), u=u, v=v,
                z_norm2=float(z @ z), d_norm2=float(d_dir @ d_dir)))
            bps_desc.append(stop)
            return

        segments.append(PathSegment(
            lo=nxt, hi=gamma_hi, support=np.array(active, dtype=np.int64),
            signs=np.array(signs), u=u, v=v,
            z_norm2=float(z @ z), d_norm2=float(d_dir @ d_dir)))
        bps_desc.append(nxt)

        # ties resolve in favor of deactivation
        if best_deact >= best_act - tie:
            pos = int(np.argmax(g_deact))
            dropped = active.pop(pos)
            signs.pop(pos)
            chol.remove(pos)
            off_mask[dropped] = True
        else:
            off_idx = np.flatnonzero(off_mask)
            half = cand.size // 2
            which = int(np.argmax(cand))
            j = int(off_idx[which % half])
            sign_j = 1.0 if which < half else -1.0
            a_j = mat[:, j]
            chol.insert(mat[:, active].T @ a_j, float(a_j @ a_j))
            active.append(j)
            signs.append(sign_j)
            off_mask[j] = False
        gamma_hi = nxt
    raise RankDeficiencyError(
        f"homotopy exceeded {max_events} events; path appears degenerate")


def _uniqueness_flag(mat: np.ndarray, corr: np.ndarray, gamma: float, n: int) -> bool:
    """Full column rank of the equicorrelation set implies a unique solution."""
    equi = np.flatnonzero(np.abs(corr) >= gamma * (1.0 - 1e-10))
    if equi.size == 0:
        return True
    if equi.size > n:
        return False
    try:
        gram_solve(mat[:, equi], np.zeros(equi.size))
    except RankDeficiencyError:
        return False
    return True


# --- proximal ----------------------------------------------------------------

def _soft(z: np.ndarray, t: float) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _lipschitz(mat: np.ndarray, rel_acc: float = 0.01, max_iter: int = 500) -> float:
    """Largest eigenvalue of A^T A by power iteration to ``rel_acc`` accuracy."""
    p = mat.shape[1]
    v = np.ones(p) / np.sqrt(p)
    lam = 0.0
    for _ in range(max_iter):
        w = mat.T @ (mat @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v, lam_new = w / nw, nw
        if abs(lam_new - lam) <= rel_acc * lam_new:
            return lam_new
        lam = lam_new
    return lam


def solve_proximal(a, y: np.ndarray, gamma: float, tol: float = 1e-8,
                   max_iter: int = 100_000, tau_supp: float | None = None) -> LassoSolution:
    """Accelerated proximal-gradient (monotone FISTA) solution.

    Terminates when the first-order violation drops below ``tol`` or after
    ``max_iter`` iterations; ``converged`` reports which.  The step is
    1/(1.05 L) with L estimated by power iteration to 1% relative accuracy;
    an objective increase triggers a plain descent step and a momentum restart.
    """
    mat = _as_matrix(a)
    y = np.asarray(y, dtype=np.float64)
    n, p = mat.shape
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    lip = _lipschitz(mat)
    if lip == 0.0:
        x = np.zeros(p)
        kkt = check_kkt(mat, y, x, gamma, tol, tau_supp)
        return LassoSolution(gamma=gamma, x=x, support=np.array([], dtype=np.int64),
                             signs=np.array([]), kkt=kkt, unique=True,
                             method="proximal", converged=True, iterations=0)
    step = 1.0 / (1.05 * lip)

    x = np.zeros(p)
    zv = x
    t = 1.0
    fx = 0.5 * float(y @ y)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = -(mat.T @ (y - mat @ zv))
        x_new = _soft(zv - step * grad, step * gamma)
        f_new = objective_value(mat, y, x_new, gamma)
        if f_new > fx:
            grad_x = -(mat.T @ (y - mat @ x))
            x_new = _soft(x - step * grad_x, step * gamma)
            f_new = objective_value(mat, y, x_new, gamma)
            t = 1.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        zv = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, fx, t = x_new, f_new, t_new

        r = y - mat @ x
        c = mat.T @ r
        nz = x != 0.0
        on = float(np.max(np.abs(c[nz] - gamma * np.sign(x[nz])))) if nz.any() else 0.0
        off = float(np.max(np.abs(c[~nz]))) if (~nz).any() else 0.0
        if on <= tol and off <= gamma + tol:
            converged = True
            break

    support = numerical_support(x, tau_supp)
    kkt = check_kkt(mat, y, x, gamma, tol=max(tol, 1e-12), tau_supp=tau_supp)
    unique = _uniqueness_flag(mat, kkt.correlations, gamma, n)
    return LassoSolution(gamma=gamma, x=x, support=support, signs=np.sign(x[support]),
                         kkt=kkt, unique=unique, method="proximal",
                         converged=converged, iterations=it)


# --- path utilities ----------------------------------------------------------

def residual_ratio(path: HomotopyPath, gammas) -> np.ndarray:
    """f(gamma) = ||y - A x(gamma)||_2 / gamma evaluated exactly from the path.

    Uses the per-segment orthogonal split of the residual, so no matrix work
    is needed.  All gammas must be positive.
    """
    g = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    if np.any(g <= 0):
        raise ValueError("residual_ratio requires positive gamma values")
    return np.array([np.sqrt(path.residual_norm2_at(x)) / x for x in g])


def path_to_csv(path: HomotopyPath, dest) -> None:
    """One row per breakpoint: gamma, active-set size, objective, residual norm."""
    import csv

    rows = []
    for gamma_t in path.breakpoints:
        seg = path.segment_at(float(gamma_t)) if gamma_t < path.gamma_max else None
        if seg is None:
            size, l1 = 0, 0.0
        else:
            coeffs = seg.coeffs_at(float(gamma_t))
            size, l1 = len(seg.support), float(np.abs(coeffs).sum())
        res2 = path.residual_norm2_at(float(gamma_t))
        obj = 0.5 * res2 + float(gamma_t) * l1
        rows.append((repr(float(gamma_t)), size, repr(obj), repr(float(np.sqrt(res2)))))
    close = False
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        dest = open(dest, "w", newline="")
        close = True
    try:
        w = csv.writer(dest)
        w.writerow(["gamma", "support_size", "objective", "residual_norm"])
        w.writerows(rows)
    finally:
        if close:
            dest.close()
