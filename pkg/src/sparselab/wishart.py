"""Monte Carlo validators for the random-matrix and concentration claims the
recovery certificates rest on.

Each validator turns one probabilistic statement about Wishart matrices,
projected noise, or scalar concentration into a deterministic pass/fail
check: empirical tail frequencies are compared against the quoted bound plus
three binomial standard deviations, and distributional claims are tested by
Kolmogorov-Smirnov or chi-square contingency tests at level 0.01.  With a
pinned seed every validator is a pure function of its arguments, so the
checks are reproducible rather than flaky.

Validated claims (lemma identifiers are the package's own numbering, used
consistently by the CLI table):

- lemma2: for B the inverse of a Wishart matrix, the off-diagonal signs of a
  fixed row form a Rademacher sequence independent of the diagonal entry;
- lemma3: extreme Wishart eigenvalue tails
  P(lmax >= (1 + sqrt(k/n) + t)^2) <= exp(-n t^2 / 2) and the mirrored
  smallest-singular-value bound;
- lemma4: sup-norm of (C^T C)^{-1} S for Rademacher S stays below
  1 + 4 sqrt(b) up to the quoted failure probability (and below
  1 + 2.7 sqrt(b) in the high log(p)/b regime);
- lemma5: C^+ w is rotation invariant, so its normalization is uniform on
  the sphere;
- lemma6: n ||X||^2 / (X^T B^{-1} X) is chi-square with n - k + 1 degrees of
  freedom for X independent of B;
- lemma7..lemma10: sphere-coordinate, chi-square upper/lower tail, and
  Rademacher-sum (Hoeffding) concentration inequalities.

Trials derive individual seeds via :func:`sparselab.ensemble.derive_seed`,
so they may run or be aggregated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .ensemble import derive_seed

__all__ = [
    "KS_LEVEL",
    "CheckRow",
    "ValidationResult",
    "validate_sign_rademacher",
    "validate_eigenvalue_tails",
    "validate_projected_sign_supnorm",
    "validate_rotation_invariance",
    "validate_quadratic_chi2",
    "validate_concentration",
    "default_grid",
    "run_grid",
    "results_table",
]

KS_LEVEL = 0.01


@dataclass(frozen=True)
class CheckRow:
    name: str
    statistic: float
    threshold: float
    # "<=" means statistic must not exceed threshold; ">=" the reverse
    direction: str
    passed: bool


@dataclass(frozen=True)
class ValidationResult:
    lemma_id: str
    params: dict
    trials: int
    seed: int
    checks: tuple
    passed: bool
    notes: str = ""
    resampled: int = 0


def _result(lemma_id, params, trials, seed, checks, notes="", resampled=0) -> ValidationResult:
    return ValidationResult(lemma_id=lemma_id, params=dict(params), trials=trials,
                            seed=seed, checks=tuple(checks),
                            passed=all(c.passed for c in checks),
                            notes=notes, resampled=resampled)


def _le(name, stat, thr) -> CheckRow:
    return CheckRow(name, float(stat), float(thr), "<=", bool(stat <= thr))


def _ge(name, stat, thr) -> CheckRow:
    return CheckRow(name, float(stat), float(thr), ">=", bool(stat >= thr))


def _trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, trial, stream)))


def _tail_threshold(bound: float, trials: int) -> float:
    """Quoted bound plus three binomial standard deviations."""
    q = min(max(bound, 0.0), 1.0)
    return bound + 3.0 * math.sqrt(q * (1.0 - q) / trials)


def _bonferroni_z(level: float, m: int) -> float:
    return float(stats.norm.ppf(1.0 - level / (2.0 * m)))


def validate_sign_rademacher(n: int, k: int, trials: int, seed: int) -> ValidationResult:
    """Signs of one inverse-Wishart row: balance, pairwise independence, and
    independence from the diagonal entry.

    Samples B = (A^T A)^{-1} row 0 per trial (via a solve, never a full
    inverse).  Checks, at family level 0.01 with Bonferroni correction:
    each sign balanced; each sign pair independent (contingency chi-square,
    k >= 3 only); signs uncorrelated with the rank of B[0,0]; and B[0,0] > 0
    always.  Numerically singular Gram samples are resampled with a counter;
    more than 1% of them is an error.
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if n <= k:
        raise ValueError(f"need n > k, got n={n}, k={k}")
    rows = np.empty((trials, k))
    e0 = np.zeros(k)
    e0[0] = 1.0
    resampled = 0
    for t in range(trials):
        attempt = 0
        while True:
            rng = _trial_rng(seed, t, attempt)
            a = rng.standard_normal((n, k)) / math.sqrt(n)
            try:
                rows[t] = np.linalg.solve(a.T @ a, e0)
                break
            except np.linalg.LinAlgError:
                attempt += 1
                resampled += 1
                if resampled > max(1, trials // 100):
                    raise RuntimeError("more than 1% of Gram samples were singular")

    diag = rows[:, 0]
    signs = np.sign(rows[:, 1:])          # trials x (k-1)

    checks = []
    checks.append(_ge("diag_positive_min", float(diag.min()), np.finfo(float).tiny))

    m = k - 1
    z = _bonferroni_z(0.01, m)
    frac_dev = np.abs(signs.mean(axis=0)) / 2.0   # |mean(+-1)|/2 = |freq(+) - 1/2|
    checks.append(_le("sign_balance_max_abs_dev", float(frac_dev.max()),
                      z * math.sqrt(0.25 / trials)))

    if m >= 2:
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        level = 0.01 / len(pairs)
        min_p = 1.0
        for i, j in pairs:
            table = np.array([
                [np.sum((signs[:, i] > 0) & (signs[:, j] > 0)),
                 np.sum((signs[:, i] > 0) & (signs[:, j] < 0))],
                [np.sum((signs[:, i] < 0) & (signs[:, j] > 0)),
                 np.sum((signs[:, i] < 0) & (signs[:, j] < 0))],
            ])
            min_p = min(min_p, float(stats.chi2_contingency(table, correction=False)[1]))
        checks.append(_ge("pairwise_independence_min_p", min_p, level))

    ranks = stats.rankdata(diag)
    ranks = (ranks - ranks.mean()) / ranks.std()
    corr = np.abs(signs.T @ ranks) / trials
    checks.append(_le("diag_sign_corr_max", float(corr.max()),
                      _bonferroni_z(0.01, m) / math.sqrt(trials - 1)))

    return _result("lemma2", {"n": n, "k": k}, trials, seed, checks, resampled=resampled)


def validate_eigenvalue_tails(n: int, k: int, t: float, trials: int, seed: int) -> ValidationResult:
    """Extreme-eigenvalue tails of the Wishart matrix A^T A.

    The smallest-eigenvalue event is evaluated in singular-value form
    (s_min <= 1 - sqrt(k/n) - t), which is vacuous when the right side is
    negative; squaring a negative level would distort the event.
    """
    if t <= 0:
        raise ValueError(f"need t > 0, got {t}")
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    hi = (1.0 + math.sqrt(k / n) + t) ** 2
    lo = 1.0 - math.sqrt(k / n) - t
    n_hi = 0
    n_lo = 0
    for tr in range(trials):
        a = _trial_rng(seed, tr, 0).standard_normal((n, k)) / math.sqrt(n)
        ev = np.linalg.eigvalsh(a.T @ a)
        n_hi += ev[-1] >= hi
        n_lo += math.sqrt(max(ev[0], 0.0)) <= lo
    bound = math.exp(-0.5 * n * t * t)
    thr = _tail_threshold(bound, trials)
    checks = [
        _le("lambda_max_tail_freq", n_hi / trials, thr),
        _le("s_min_tail_freq", n_lo / trials, thr),
    ]
    return _result("lemma3", {"n": n, "k": k, "t": t}, trials, seed, checks)


def validate_projected_sign_supnorm(n: int, p: int, b: float, trials: int, seed: int) -> ValidationResult:
    """Sup-norm of (C^T C)^{-1} S against 1 + 4 sqrt(b).

    k = floor(n b / (2 log p)).  Requires p >= 1212 and log(p)/b >= 7.08;
    for b <= 1 the former implies the latter (log 1212 = 7.10), so p >= 1212
    is the binding constraint.  When log(p)/b >= 16.2 the tightened level
    1 + 2.7 sqrt(b) is tested as well, against the same quoted probability.
    A trial exactly at the level counts as a non-violation.
    """
    if not 0 < b <= 1:
        raise ValueError(f"need 0 < b <= 1, got {b}")
    if p < 1212:
        raise ValueError(f"need p >= 1212, got {p}")
    log_p = math.log(p)
    if log_p / b < 7.08:
        raise ValueError(f"need log(p)/b >= 7.08, got {log_p / b:.3f}")
    k = int(n * b / (2.0 * log_p))
    if k < 1:
        raise ValueError(f"derived active size k = floor(n b / (2 log p)) is zero (n={n}, p={p}, b={b})")

    sup = np.empty(trials)
    for tr in range(trials):
        rng = _trial_rng(seed, tr, 0)
        c = rng.standard_normal((n, k)) / math.sqrt(n)
        s = rng.integers(0, 2, size=k) * 2.0 - 1.0
        sup[tr] = np.max(np.abs(np.linalg.solve(c.T @ c, s)))

    bound = k * p ** (-1.28) + 2.0 * math.exp(
        -n * b * (0.75 * math.sqrt(2.0) - 1.0) ** 2 / (4.0 * log_p))
    thr = _tail_threshold(bound, trials)
    checks = [_le("supnorm_tail_freq", float(np.mean(sup > 1.0 + 4.0 * math.sqrt(b))), thr)]
    notes = f"k={k}"
    if log_p / b >= 16.2:
        checks.append(_le("supnorm_tail_freq_tight",
                          float(np.mean(sup > 1.0 + 2.7 * math.sqrt(b))), thr))
        notes += "; tightened level active"
    return _result("lemma4", {"n": n, "p": p, "b": b}, trials, seed, checks, notes=notes)


def validate_rotation_invariance(n: int, k: int, trials: int, seed: int,
                                 rotate: bool = False) -> ValidationResult:
    """C^+ w normalized should be uniform on the sphere of R^k.

    Kolmogorov-Smirnov test of the first coordinate against the exact sphere
    marginal ((x1 + 1)/2 is Beta((k-1)/2, (k-1)/2)).  With ``rotate`` a fixed
    seeded orthogonal matrix is applied to C first, which must not change the
    outcome distribution.
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    q = None
    if rotate:
        g = np.random.Generator(np.random.PCG64(derive_seed(seed, 0, 101))).standard_normal((k, k))
        q, _ = np.linalg.qr(g)
    first = np.empty(trials)
    for tr in range(trials):
        rng = _trial_rng(seed, tr, 0)
        c = rng.standard_normal((n, k)) / math.sqrt(n)
        w = _trial_rng(seed, tr, 1).standard_normal(n)
        if q is not None:
            c = c @ q
        v = np.linalg.solve(c.T @ c, c.T @ w)
        first[tr] = v[0] / np.linalg.norm(v)
    pval = float(stats.kstest((first + 1.0) / 2.0,
                              stats.beta((k - 1) / 2.0, (k - 1) / 2.0).cdf).pvalue)
    checks = [_ge("sphere_marginal_ks_p", pval, KS_LEVEL)]
    return _result("lemma5", {"n": n, "k": k, "rotate": rotate}, trials, seed, checks)


def validate_quadratic_chi2(n: int, k: int, trials: int, seed: int,
                            x_kind: str = "ones") -> ValidationResult:
    """n ||X||^2 / (X^T B^{-1} X) should be chi-square with n - k + 1 dof.

    B = A^T A with N(0, 1/n) entries; X is the all-ones vector or a per-trial
    Rademacher vector, independent of B either way.  KS test at level 0.01
    plus a third-moment-free mean check within 3 standard errors.
    """
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    if x_kind not in ("ones", "rademacher"):
        raise ValueError(f"unknown x_kind {x_kind!r}")
    stat = np.empty(trials)
    x = np.ones(k)
    for tr in range(trials):
        a = _trial_rng(seed, tr, 0).standard_normal((n, k)) / math.sqrt(n)
        if x_kind == "rademacher":
            x = _trial_rng(seed, tr, 3).integers(0, 2, size=k) * 2.0 - 1.0
        quad = x @ np.linalg.solve(a.T @ a, x)
        stat[tr] = n * (x @ x) / quad
    dof = n - k + 1
    pval = float(stats.kstest(stat, stats.chi2(dof).cdf).pvalue)
    checks = [
        _ge("chi2_ks_p", pval, KS_LEVEL),
        _le("mean_abs_dev", abs(float(stat.mean()) - dof),
            3.0 * math.sqrt(2.0 * dof / trials)),
    ]
    return _result("lemma6", {"n": n, "k": k, "x_kind": x_kind}, trials, seed, checks)


def validate_concentration(lemma_id: str, params: dict, trials: int, seed: int) -> ValidationResult:
    """Scalar concentration checks: empirical tail frequency against the
    quoted bound plus three binomial standard deviations.

    lemma7: uniform sphere coordinate, P(|x1| > eps) <= 4 exp(-k eps^2 / 2);
    lemma8: chi-square upper tail,
        P(X > (1+delta)k) <= exp(-(k/2)(delta - log(1+delta))) / sqrt(2 pi k delta);
    lemma9: chi-square lower tail, Chernoff form
        P(X < (1-delta)k) <= ((1-delta) e^delta)^{k/2};
    lemma10: Rademacher sums, P(|sum_i e_i a_i| >= t ||a||) <= exp(-t^2/2),
        with a all-ones, a fixed seeded Gaussian vector, or a basis vector.
    """
    params = dict(params)
    if lemma_id == "lemma7":
        k, eps = int(params["k"]), float(params["eps"])
        if k < 1 or eps <= 0:
            raise ValueError("need k >= 1 and eps > 0")
        hits = 0
        for tr in range(trials):
            g = _trial_rng(seed, tr, 0).standard_normal(k)
            hits += abs(g[0]) / np.linalg.norm(g) > eps
        bound = 4.0 * math.exp(-0.5 * k * eps * eps)
        checks = [_le("sphere_coord_tail_freq", hits / trials, _tail_threshold(bound, trials))]
    elif lemma_id in ("lemma8", "lemma9"):
        k, delta = int(params["k"]), float(params["delta"])
        if k < 1 or delta <= 0:
            raise ValueError("need k >= 1 and delta > 0")
        if lemma_id == "lemma9" and delta >= 1:
            raise ValueError("lower-tail check needs delta < 1")
        draws = np.array([_trial_rng(seed, tr, 0).chisquare(k) for tr in range(trials)])
        if lemma_id == "lemma8":
            freq = float(np.mean(draws > (1.0 + delta) * k))
            bound = math.exp(-0.5 * k * (delta - math.log1p(delta))) / math.sqrt(
                2.0 * math.pi * k * delta)
            checks = [_le("chi2_upper_tail_freq", freq, _tail_threshold(bound, trials))]
        else:
            freq = float(np.mean(draws < (1.0 - delta) * k))
            bound = ((1.0 - delta) * math.exp(delta)) ** (k / 2.0)
            checks = [_le("chi2_lower_tail_freq", freq, _tail_threshold(bound, trials))]
    elif lemma_id == "lemma10":
        k, t = int(params["k"]), float(params["t"])
        a_kind = params.get("a_kind", "ones")
        if k < 1 or t <= 0:
            raise ValueError("need k >= 1 and t > 0")
        if a_kind == "ones":
            a = np.ones(k)
        elif a_kind == "gaussian":
            a = np.random.Generator(np.random.PCG64(derive_seed(seed, 0, 7))).standard_normal(k)
        elif a_kind == "basis":
            a = np.zeros(k)
            a[0] = 1.0
        else:
            raise ValueError(f"unknown a_kind {a_kind!r}")
        level = t * np.linalg.norm(a)
        hits = 0
        for tr in range(trials):
            e = _trial_rng(seed, tr, 0).integers(0, 2, size=k) * 2.0 - 1.0
            hits += abs(e @ a) >= level
        bound = math.exp(-0.5 * t * t)
        checks = [_le("rademacher_sum_tail_freq", hits / trials, _tail_threshold(bound, trials))]
    else:
        raise ValueError(f"unknown concentration lemma {lemma_id!r}")
    return _result(lemma_id, params, trials, seed, checks)


# --- default grid ------------------------------------------------------------

def default_grid() -> list:
    """(callable, kwargs) rows for the full validation sweep."""
    return [
        (validate_sign_rademacher, {"n": 50, "k": 2, "trials": 10_000}),
        (validate_sign_rademacher, {"n": 60, "k": 5, "trials": 4_000}),
        (validate_eigenvalue_tails, {"n": 200, "k": 20, "t": 0.5, "trials": 4_000}),
        (validate_eigenvalue_tails, {"n": 100, "k": 1, "t": 0.8, "trials": 4_000}),
        (validate_projected_sign_supnorm, {"n": 2000, "p": 2000, "b": 0.5, "trials": 600}),
        (validate_projected_sign_supnorm, {"n": 2000, "p": 2000, "b": 0.4, "trials": 600}),
        (validate_rotation_invariance, {"n": 50, "k": 2, "trials": 2_000}),
        (validate_rotation_invariance, {"n": 50, "k": 49, "trials": 2_000}),
        (validate_rotation_invariance, {"n": 50, "k": 2, "trials": 2_000, "rotate": True}),
        (validate_quadratic_chi2, {"n": 100, "k": 20, "trials": 2_000}),
        (validate_quadratic_chi2, {"n": 100, "k": 1, "trials": 2_000}),
        (validate_concentration, {"lemma_id": "lemma7", "params": {"k": 50, "eps": 0.5}, "trials": 10_000}),
        (validate_concentration, {"lemma_id": "lemma8", "params": {"k": 100, "delta": 1.0}, "trials": 10_000}),
        (validate_concentration, {"lemma_id": "lemma9", "params": {"k": 100, "delta": 0.5}, "trials": 10_000}),
        (validate_concentration, {"lemma_id": "lemma10", "params": {"k": 50, "t": 1.5, "a_kind": "ones"}, "trials": 10_000}),
        (validate_concentration, {"lemma_id": "lemma10", "params": {"k": 50, "t": 2.0, "a_kind": "gaussian"}, "trials": 10_000}),
    ]


def run_grid(master_seed: int, grid=None) -> list:
    """Run every validator row with a per-row derived seed."""
    rows = default_grid() if grid is None else grid
    results = []
    for idx, (fn, kwargs) in enumerate(rows):
        results.append(fn(seed=derive_seed(master_seed, idx, 50), **kwargs))
    return results


def results_table(results) -> str:
    """Aligned text table: lemma, params, check, statistic, bound, verdict."""
    lines = []
    header = f"{'lemma':<8} {'params':<38} {'check':<30} {'statistic':>12} {'threshold':>12}  verdict"
    lines.append(header)
    lines.append("-" * len(header))
    for r in results:
        pstr = ", ".join(f"{k}={v}" for k, v in r.params.items())
        for c in r.checks:
            lines.append(
                f"{r.lemma_id:<8} {pstr:<38} {c.name:<30} {c.statistic:>12.4e} "
                f"{c.threshold:>12.4e}  {'pass' if c.passed else 'FAIL'}")
    overall = all(r.passed for r in results)
    lines.append("-" * len(header))
    lines.append(f"overall: {'pass' if overall else 'FAIL'} "
                 f"({sum(r.passed for r in results)}/{len(results)} validators)")
    return "\n".join(lines)


def results_to_csv_rows(results) -> list:
    """Flatten results for CSV export (stable float formatting via repr)."""
    import json

    rows = [("lemma", "params", "trials", "seed", "check", "statistic", "threshold",
             "direction", "passed")]
    for r in results:
        for c in r.checks:
            rows.append((r.lemma_id, json.dumps(r.params, sort_keys=True), r.trials,
                         r.seed, c.name, repr(c.statistic), repr(c.threshold),
                         c.direction, int(c.passed)))
    return rows
