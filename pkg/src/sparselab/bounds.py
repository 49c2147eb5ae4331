"""Closed-form recovery thresholds and probability lower bounds.

Three guarantee regimes are covered, all for an n x p Gaussian design with
N(0, 1/n) entries, noise of l2 norm at most eps, and tuning constants
0 <= alpha, beta < 1:

- theorem 1 (exact recovery, strictly sparse): sparsity up to
  k_max = alpha*beta*n / (2 log p), minimal signal level
  T >= 5.5 * gamma with gamma = (eps / sqrt(1-alpha)) * sqrt(2 log p / n);
- theorem 2 (exact recovery of the k largest entries, compressible):
  same k_max, gamma = Delta * eps with
  Delta = 2 / sqrt(1 + 2 sqrt(alpha) - 3 alpha) * sqrt(2 log p / n),
  T >= 5.5 * Delta * eps, and a flat-tail condition
  ||x0 - x^k||_inf <= 0.8 * (1 - sqrt(alpha)) * Delta * eps;
- theorem 3 (partial support recovery, no signal-level assumption): same
  gamma as theorem 1, with the l2 guarantee
  ||x0 - x(gamma)||_2 <= (2 + sqrt(alpha/(1-alpha))) * eps.

All logarithms are natural: the admissible-dimension hypothesis
p > e^{1/(2(1-sqrt(beta)))} forces that convention.  Probability lower
bounds evaluate only the explicitly printed terms of the corresponding
expressions (vanishing remainder terms are omitted) and may be negative at
small n; they are reported as-is and never clamped in computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import best_k_term

__all__ = [
    "TheoremBounds",
    "ExperimentParams",
    "AdmissibilityReport",
    "theorem1_bounds",
    "theorem2_bounds",
    "theorem3_bounds",
    "experiment_params",
    "check_compressible_admissible",
]


@dataclass(frozen=True)
class TheoremBounds:
    theorem_id: int
    n: int
    p: int
    alpha: float
    beta: float
    eps: float
    k_max: float
    k_max_int: int
    gamma: float
    t_min: float
    prob_lb: float
    k: int | None = None                 # echoed input (theorem 3)
    delta: float | None = None           # theorem 2 only
    tail_inf_max: float | None = None    # theorem 2 only
    l2_bound: float | None = None        # theorem 3 only
    prob_meaningful: bool = True         # theorem 3: sqrt(beta) + sqrt(k/n) < 1


@dataclass(frozen=True)
class ExperimentParams:
    """Protocol triple for the sparsity sweep: T = 5.5 * gamma0, with
    gamma0 = (eps / sqrt(1-alpha)) sqrt(2 log p / n) and the critical
    sparsity k_beta = alpha*beta*n / (2 log p)."""

    n: int
    p: int
    alpha: float
    beta: float
    eps: float
    k_beta: float
    k_beta_int: int
    gamma0: float
    big_t: float


@dataclass(frozen=True)
class AdmissibilityReport:
    """Theorem-2 admissibility of a weakly sparse vector at the minimal noise
    budget eps_min = ||w||_2 + 4 ||x0 - x^k||_2 (the budget inequality at
    equality).  Margins are nonnegative iff the corresponding condition
    holds at eps_min."""

    admissible: bool
    eps_min: float
    delta: float
    big_t: float
    tail_norm2: float
    tail_inf: float
    sparsity_margin: float     # k_max - k
    snr_margin: float          # T - 5.5 * Delta * eps_min
    tail_margin: float         # 0.8 (1 - sqrt(alpha)) Delta eps_min - ||tail||_inf


def _validate_common(n, p, alpha, beta, eps) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    p_min = math.exp(1.0 / (2.0 * (1.0 - math.sqrt(beta))))
    if p <= p_min:
        raise ValueError(
            f"dimension hypothesis violated: need p > exp(1/(2(1-sqrt(beta)))) = {p_min:.4g}, got p={p}"
        )


def _gamma0(n: int, p: int, alpha: float, eps: float) -> float:
    return (eps / math.sqrt(1.0 - alpha)) * math.sqrt(2.0 * math.log(p) / n)


def _k_max(n: int, p: int, alpha: float, beta: float) -> float:
    return alpha * beta * n / (2.0 * math.log(p))


def _prob_tail_term(p: int) -> float:
    return 1.0 / (2.0 * math.sqrt(math.pi * math.log(p)))


def theorem1_bounds(n: int, p: int, alpha: float, beta: float, eps: float) -> TheoremBounds:
    """Exact-recovery thresholds and the explicit success-probability bound.

    The probability lower bound keeps every explicitly printed correction
    term; the sparsity-dependent term k*p^{-1.28} is evaluated at the largest
    admissible sparsity floor(k_max).  Two correction terms are oriented so
    that they decay with n (their source expressions carry negative
    logarithms).  The bound may be negative at small n.
    """
    _validate_common(n, p, alpha, beta, eps)
    log_p = math.log(p)
    k_max = _k_max(n, p, alpha, beta)
    gamma = _gamma0(n, p, alpha, eps)
    k_int = int(math.floor(k_max))

    t1 = 0.5 * math.exp(-0.7 * math.sqrt(math.log(n)))
    t2 = math.exp(-0.5 * n * (1.0 - 2.0 ** (-0.125) - 1.0 / math.sqrt(2.0 * log_p)) ** 2)
    t3 = max(4.0 * n ** (-1.0 / 3.0), 8.0 * math.exp(-math.sqrt(2.0 * math.log(2.0 * n))))
    t4 = k_int * p ** (-1.28)
    t5 = 2.0 * math.exp(-n * alpha * (0.75 * math.sqrt(2.0) - 1.0) ** 2 / (4.0 * log_p))
    t6 = 0.0 if beta == 0 else math.exp(n * (3.0 - math.sqrt(beta)) * math.log(beta) / 16.0)
    t7 = _prob_tail_term(p)
    prob = 1.0 - (t1 + t2 + t3 + t4 + t5 + t6 + t7)

    return TheoremBounds(theorem_id=1, n=n, p=p, alpha=alpha, beta=beta, eps=eps,
                         k_max=k_max, k_max_int=k_int, gamma=gamma, t_min=5.5 * gamma,
                         prob_lb=prob)


def _delta(n: int, p: int, alpha: float) -> float:
    denom = 1.0 + 2.0 * math.sqrt(alpha) - 3.0 * alpha
    if denom <= 0:
        raise ValueError(f"degenerate compressibility constant: 1 + 2 sqrt(alpha) - 3 alpha = {denom}")
    return 2.0 / math.sqrt(denom) * math.sqrt(2.0 * math.log(p) / n)


def theorem2_bounds(n: int, p: int, alpha: float, beta: float, eps: float) -> TheoremBounds:
    """Compressible-signal thresholds: gamma = Delta*eps, T threshold
    5.5*Delta*eps, and the largest admissible tail sup-norm
    0.8*(1 - sqrt(alpha))*Delta*eps.  The probability bound keeps the two
    explicit terms of the quoted expression."""
    _validate_common(n, p, alpha, beta, eps)
    delta = _delta(n, p, alpha)
    k_max = _k_max(n, p, alpha, beta)
    gamma = delta * eps
    prob = 1.0 - 0.5 * math.exp(-0.7 * math.sqrt(math.log(n))) - _prob_tail_term(p)
    return TheoremBounds(theorem_id=2, n=n, p=p, alpha=alpha, beta=beta, eps=eps,
                         k_max=k_max, k_max_int=int(math.floor(k_max)),
                         gamma=gamma, t_min=5.5 * gamma, prob_lb=prob,
                         delta=delta, tail_inf_max=0.8 * (1.0 - math.sqrt(alpha)) * gamma)


def theorem3_bounds(n: int, p: int, alpha: float, beta: float, eps: float, k: int) -> TheoremBounds:
    """Partial-recovery guarantee at sparsity k: gamma as in theorem 1, the
    l2 error bound (2 + sqrt(alpha/(1-alpha))) * eps, and the explicit
    success-probability bound

        1 - exp(-n (1 - sqrt(beta) - sqrt(k/n))^2 / 2) - 1/(2 sqrt(pi log p)).

    The exponential term is a genuine tail bound only when
    sqrt(beta) + sqrt(k/n) < 1; outside that region the expression is still
    evaluated as printed and ``prob_meaningful`` is set to False.
    """
    _validate_common(n, p, alpha, beta, eps)
    k_max = _k_max(n, p, alpha, beta)
    if not 0 <= k <= k_max:
        raise ValueError(f"sparsity hypothesis violated: need 0 <= k <= {k_max:.4g}, got k={k}")
    gamma = _gamma0(n, p, alpha, eps)
    root = 1.0 - math.sqrt(beta) - math.sqrt(k / n)
    prob = 1.0 - math.exp(-0.5 * n * root * root) - _prob_tail_term(p)
    return TheoremBounds(theorem_id=3, n=n, p=p, alpha=alpha, beta=beta, eps=eps, k=k,
                         k_max=k_max, k_max_int=int(math.floor(k_max)),
                         gamma=gamma, t_min=5.5 * gamma, prob_lb=prob,
                         l2_bound=(2.0 + math.sqrt(alpha / (1.0 - alpha))) * eps,
                         prob_meaningful=bool(root > 0))


def experiment_params(n: int, p: int, alpha: float, beta: float, eps: float) -> ExperimentParams:
    """Monte Carlo protocol triple (k_beta, gamma0, T).

    Unlike the theorem evaluators this accepts beta = 1 (the sweep draws the
    beta = 1 threshold line, where the dimension hypothesis degenerates), and
    gamma0 is computed by the same expression as theorem1_bounds so the two
    agree exactly for identical inputs.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0 <= beta <= 1:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    k_beta = _k_max(n, p, alpha, beta)
    gamma0 = _gamma0(n, p, alpha, eps)
    return ExperimentParams(n=n, p=p, alpha=alpha, beta=beta, eps=eps,
                            k_beta=k_beta, k_beta_int=int(math.floor(k_beta)),
                            gamma0=gamma0, big_t=5.5 * gamma0)


def check_compressible_admissible(x0: np.ndarray, k: int, w_norm: float,
                                  alpha: float, beta: float, n: int, p: int) -> AdmissibilityReport:
    """Theorem-2 admissibility of ``x0`` with a noise of norm ``w_norm``.

    The minimal budget eps_min = w_norm + 4 ||x0 - x^k||_2 makes the budget
    inequality tight; the report then evaluates, at eps_min, the sparsity
    bound on k, the signal-level condition on the smallest of the k largest
    magnitudes, and the tail sup-norm condition, returning one margin per
    condition (admissible iff all three are nonnegative).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.size != p:
        raise ValueError(f"x0 has length {x0.size}, expected p={p}")
    if w_norm < 0:
        raise ValueError(f"w_norm must be nonnegative, got {w_norm}")
    xk = best_k_term(x0, k)
    tail = x0 - xk.dense()
    tail_norm2 = float(np.linalg.norm(tail))
    tail_inf = float(np.max(np.abs(tail))) if tail.size else 0.0
    eps_min = w_norm + 4.0 * tail_norm2
    delta = _delta(n, p, alpha)
    k_max = _k_max(n, p, alpha, beta)
    big_t = xk.min_magnitude
    snr_margin = big_t - 5.5 * delta * eps_min
    tail_margin = 0.8 * (1.0 - math.sqrt(alpha)) * delta * eps_min - tail_inf
    sparsity_margin = k_max - k
    return AdmissibilityReport(
        admissible=bool(sparsity_margin >= 0 and snr_margin >= 0 and tail_margin >= 0),
        eps_min=eps_min, delta=delta, big_t=big_t,
        tail_norm2=tail_norm2, tail_inf=tail_inf,
        sparsity_margin=sparsity_margin, snr_margin=snr_margin, tail_margin=tail_margin)
