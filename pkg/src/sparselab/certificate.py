"""Support-recovery certificates for the Lasso.

Given a sparse target x0 with support I and sign vector s, the closed-form
candidate of :func:`sparselab.lasso.candidate_solution` is the unique Lasso
solution exactly when two conditions hold:

  C1  the candidate keeps the sign pattern of x0 on I, and
  C2  every off-support column satisfies |<a_j, u>| <= gamma for
      u = gamma * d + P(w),  d = A_I (A_I^T A_I)^{-1} s,
      P the orthogonal projector onto span(A_I)^perp.

The scalar certificates exposed here quantify how close an instance is to
that regime: the Fuchs value max_{j not in I} |<a_j, d>| (exact recovery is
possible in the noiseless limit iff it is < 1) and Tropp's exact recovery
coefficient 1 - max_{j not in I} ||(A_I^T A_I)^{-1} A_I^T a_j||_1.

Degenerate index sets follow fixed conventions: an empty complement gives
Fuchs value 0 and ERC 1; an empty support makes C1 vacuously true and
reduces u to the raw noise.  All Gram-inverse applications go through
Cholesky solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import SensingMatrix, SignalSpec
from .lasso import DEFAULT_SUPPORT_TOL, candidate_solution
from .linalg import gram_solve

__all__ = [
    "ConditionCheck",
    "CertificateReport",
    "RecoveryClass",
    "d_vector",
    "fuchs_value",
    "erc_value",
    "check_c1",
    "check_c2",
    "certify_exact",
    "restricted_solution",
    "classify_recovery",
    "report_row",
]


def _as_matrix(a) -> np.ndarray:
    return a.entries if isinstance(a, SensingMatrix) else np.asarray(a, dtype=np.float64)


@dataclass(frozen=True)
class ConditionCheck:
    passed: bool
    margin: float
    worst_index: int | None = None   # 0-based column index, when meaningful


@dataclass(frozen=True)
class CertificateReport:
    gamma: float
    fuchs: float
    erc: float
    c1: ConditionCheck
    c2: ConditionCheck
    candidate: np.ndarray
    u_norm: float
    exact: bool


class RecoveryClass:
    EXACT_SIGN = "exact_sign"
    EXACT_SUPPORT = "exact_support"
    PARTIAL = "partial"
    FAILURE = "failure"


def d_vector(a, support, signs) -> np.ndarray:
    """A_I (A_I^T A_I)^{-1} signs, via a Cholesky solve (no explicit inverse).

    The empty support returns the zero vector.
    """
    mat = _as_matrix(a)
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0:
        return np.zeros(mat.shape[0])
    signs = np.asarray(signs, dtype=np.float64)
    a_sub = mat[:, support]
    return a_sub @ gram_solve(a_sub, signs)


def fuchs_value(a, x0: SignalSpec) -> float:
    """max_{j not in I} |<a_j, d>|; strictly below 1 means the sign pattern of
    x0 is identifiable in the noiseless small-gamma limit.

    Depends on (A, support, signs) only, never on the magnitudes.  Empty
    complement returns 0 by convention.
    """
    mat = _as_matrix(a)
    if x0.k in (0, mat.shape[1]):
        return 0.0
    d = d_vector(mat, x0.support, x0.signs)
    prods = np.abs(mat.T @ d)
    prods[x0.support] = -np.inf
    return float(prods.max())


def erc_value(a, support) -> float:
    """Exact recovery coefficient 1 - max_{j not in I} ||(A_I^T A_I)^{-1} A_I^T a_j||_1.

    Positive values certify that l1 minimization prefers the support columns
    over every single off-support column.  Empty complement returns 1.
    """
    mat = _as_matrix(a)
    support = np.asarray(support, dtype=np.int64)
    p = mat.shape[1]
    if support.size in (0, p):
        return 1.0
    a_sub = mat[:, support]
    coeffs = gram_solve(a_sub, a_sub.T @ mat)
    l1 = np.abs(coeffs).sum(axis=0)
    l1[support] = -np.inf
    return 1.0 - float(l1.max())


def check_c1(a, x0: SignalSpec, w: np.ndarray | None, gamma: float) -> ConditionCheck:
    """Sign-preservation check for the closed-form candidate.

    Builds the candidate from y = A_I x0_I + w and tests exact componentwise
    sign equality with x0 on the support (a zero candidate entry counts as
    failure; no tolerance).  The margin is min_i sign(x0[i]) * candidate[i];
    the condition holds iff it is positive.  Empty support is vacuously true.
    """
    mat = _as_matrix(a)
    if x0.k == 0:
        return ConditionCheck(passed=True, margin=np.inf)
    a_sub = mat[:, x0.support]
    y_eff = a_sub @ x0.values if w is None else a_sub @ x0.values + w
    cand = candidate_solution(mat, x0.support, x0.signs, y_eff, gamma)
    prods = x0.signs * cand[x0.support]
    worst = int(np.argmin(prods))
    return ConditionCheck(passed=bool(np.all(prods > 0)), margin=float(prods[worst]),
                          worst_index=int(x0.support[worst]))


def check_c2(a, x0: SignalSpec, w: np.ndarray | None, gamma: float) -> ConditionCheck:
    """Off-support dual bound max_{j not in I} |<a_j, u>| <= gamma (non-strict).

    u = gamma * d + (w - A_I A_I^+ w); the projector is applied through the
    same least-squares machinery as everything else.  Margin is
    gamma - max_j |<a_j, u>|; ties at the boundary pass.
    """
    mat = _as_matrix(a)
    n, p = mat.shape
    w_vec = np.zeros(n) if w is None else np.asarray(w, dtype=np.float64)
    if x0.k == 0:
        u = w_vec
    else:
        a_sub = mat[:, x0.support]
        u = gamma * d_vector(mat, x0.support, x0.signs)
        u = u + w_vec - a_sub @ gram_solve(a_sub, a_sub.T @ w_vec)
    if x0.k == p:
        return ConditionCheck(passed=True, margin=float(gamma))
    prods = np.abs(mat.T @ u)
    prods[x0.support] = -np.inf
    worst = int(np.argmax(prods))
    top = float(prods[worst])
    return ConditionCheck(passed=bool(top <= gamma), margin=float(gamma - top), worst_index=worst)


def certify_exact(a, x0: SignalSpec, w: np.ndarray | None, gamma: float) -> CertificateReport:
    """Full certificate: both condition checks, scalar certificates and the
    candidate vector.  Exact sign-and-support recovery holds iff C1 and C2
    both pass, in which case the candidate is the unique Lasso solution.
    """
    mat = _as_matrix(a)
    n = mat.shape[0]
    w_vec = np.zeros(n) if w is None else np.asarray(w, dtype=np.float64)
    c1 = check_c1(mat, x0, w_vec, gamma)
    c2 = check_c2(mat, x0, w_vec, gamma)
    if x0.k:
        a_sub = mat[:, x0.support]
        y_eff = a_sub @ x0.values + w_vec
        cand = candidate_solution(mat, x0.support, x0.signs, y_eff, gamma)
        u = gamma * d_vector(mat, x0.support, x0.signs)
        u = u + w_vec - a_sub @ gram_solve(a_sub, a_sub.T @ w_vec)
    else:
        cand = np.zeros(mat.shape[1])
        u = w_vec
    return CertificateReport(
        gamma=float(gamma),
        fuchs=fuchs_value(mat, x0),
        erc=erc_value(mat, x0.support),
        c1=c1,
        c2=c2,
        candidate=cand,
        u_norm=float(np.linalg.norm(u)),
        exact=bool(c1.passed and c2.passed),
    )


def restricted_solution(a, support, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients of y on span(A_I) (length |I|).

    Equals x0_I + A_I^+ w when y = A_I x0_I + w.
    """
    mat = _as_matrix(a)
    support = np.asarray(support, dtype=np.int64)
    a_sub = mat[:, support]
    return gram_solve(a_sub, a_sub.T @ np.asarray(y, dtype=np.float64))


def classify_recovery(x_hat: np.ndarray, x0: SignalSpec,
                      tau_supp: float = DEFAULT_SUPPORT_TOL):
    """Compare the numerical support/signs of x_hat against x0.

    Returns (label, missed, spurious) where label is one of
    ``exact_sign`` (same support, same signs), ``exact_support`` (same
    support, some sign flipped), ``partial`` (strict subset with matching
    signs on it) or ``failure``; ``missed``/``spurious`` are the 0-based
    index sets I(x0) \\ I(x_hat) and I(x_hat) \\ I(x0).
    """
    if tau_supp < 0:
        raise ValueError("tau_supp must be nonnegative")
    x_hat = np.asarray(x_hat, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(x_hat))) if x_hat.size else 1.0)
    sup_hat = np.flatnonzero(np.abs(x_hat) > tau_supp * scale)
    sup0 = x0.support
    missed = np.setdiff1d(sup0, sup_hat)
    spurious = np.setdiff1d(sup_hat, sup0)
    if spurious.size:
        return RecoveryClass.FAILURE, missed, spurious
    signs_match = bool(np.all(np.sign(x_hat[sup_hat]) == np.sign(x0.dense()[sup_hat])))
    if missed.size == 0:
        label = RecoveryClass.EXACT_SIGN if signs_match else RecoveryClass.EXACT_SUPPORT
    else:
        label = RecoveryClass.PARTIAL if signs_match else RecoveryClass.FAILURE
    return label, missed, spurious


def report_row(report: CertificateReport, *, trial: int, k: int, big_t: float,
               l2_error: float | None = None, partial: bool | None = None) -> dict:
    """Flatten a certificate report into one serializable row."""
    return {
        "trial": trial,
        "k": k,
        "gamma": report.gamma,
        "T": big_t,
        "fuchs": report.fuchs,
        "erc": report.erc,
        "c1": int(report.c1.passed),
        "c2": int(report.c2.passed),
        "exact": int(report.exact),
        "partial": "" if partial is None else int(partial),
        "l2_error": "" if l2_error is None else l2_error,
    }
