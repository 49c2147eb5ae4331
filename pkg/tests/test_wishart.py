"""Statistical validators: pinned-seed verdicts, analytic cross-checks,
and the accuracy of the chi-square CDF the KS tests rely on."""

import numpy as np
import pytest
from scipy import stats

from sparselab.ensemble import derive_seed
from sparselab.wishart import (
    results_table,
    results_to_csv_rows,
    run_grid,
    validate_concentration,
    validate_eigenvalue_tails,
    validate_projected_sign_supnorm,
    validate_quadratic_chi2,
    validate_rotation_invariance,
    validate_sign_rademacher,
)


def test_chi2_cdf_accuracy_against_mpmath():
    # the KS machinery stands on scipy's regularized incomplete gamma; check
    # it to 1e-12 against an independent arbitrary-precision evaluation
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    for k, x in [(1, 3.841458820694124), (10, 18.307038053275146),
                 (81, 64.0), (999, 1100.0)]:
        expect = float(mp.gammainc(k / 2, 0, x / 2, regularized=True))
        assert abs(stats.chi2.cdf(x, k) - expect) < 1e-12


# --- inverse-Wishart row signs --------------------------------------------------

def test_sign_rademacher_small():
    res = validate_sign_rademacher(n=50, k=2, trials=2000, seed=0)
    assert res.passed
    names = [c.name for c in res.checks]
    assert "diag_positive_min" in names and "sign_balance_max_abs_dev" in names


def test_sign_rademacher_pairwise_and_rank_checks():
    res = validate_sign_rademacher(n=60, k=5, trials=2000, seed=1)
    assert res.passed
    assert any(c.name == "pairwise_independence_min_p" for c in res.checks)


def test_sign_rademacher_domain():
    with pytest.raises(ValueError):
        validate_sign_rademacher(n=50, k=1, trials=10, seed=0)
    with pytest.raises(ValueError):
        validate_sign_rademacher(n=3, k=5, trials=10, seed=0)


def test_sign_rademacher_deterministic():
    a = validate_sign_rademacher(n=50, k=3, trials=500, seed=9)
    b = validate_sign_rademacher(n=50, k=3, trials=500, seed=9)
    assert a == b


# --- eigenvalue tails -----------------------------------------------------------

def test_eigenvalue_tails_reference_point():
    res = validate_eigenvalue_tails(n=200, k=20, t=0.5, trials=1500, seed=2)
    assert res.passed
    # bound e^{-n t^2/2} = e^{-25}: effectively no violations allowed
    assert all(c.statistic == 0.0 for c in res.checks)


def test_eigenvalue_tails_k1_matches_analytic_chi2():
    # k = 1: the single eigenvalue is ||a||^2 ~ chi2_n / n, so both empirical
    # frequencies must sit near their exact chi-square tails
    n, t, trials = 100, 0.1, 4000
    res = validate_eigenvalue_tails(n=n, k=1, t=t, trials=trials, seed=3)
    hi_exact = stats.chi2.sf(n * (1 + np.sqrt(1 / n) + t) ** 2, n)
    lo_exact = stats.chi2.cdf(n * (1 - np.sqrt(1 / n) - t) ** 2, n)
    hi_emp = res.checks[0].statistic
    lo_emp = res.checks[1].statistic
    assert abs(hi_emp - hi_exact) <= 4 * np.sqrt(hi_exact * (1 - hi_exact) / trials)
    assert abs(lo_emp - lo_exact) <= 4 * np.sqrt(lo_exact * (1 - lo_exact) / trials)


def test_eigenvalue_tails_tiny_t_vacuous_bound():
    # t -> 0+: the quoted bound approaches 1 and the check passes trivially
    res = validate_eigenvalue_tails(n=60, k=6, t=1e-6, trials=200, seed=20)
    assert res.passed
    assert all(c.threshold >= 1.0 for c in res.checks)


def test_eigenvalue_tails_vacuous_lower_event_when_level_negative():
    # t > 1: the smallest-singular-value level is negative, the event empty
    res = validate_eigenvalue_tails(n=50, k=5, t=1.5, trials=200, seed=4)
    assert res.checks[1].statistic == 0.0
    assert res.passed


def test_eigenvalue_tails_domain():
    with pytest.raises(ValueError):
        validate_eigenvalue_tails(n=50, k=50, t=0.5, trials=10, seed=0)
    with pytest.raises(ValueError):
        validate_eigenvalue_tails(n=50, k=5, t=0.0, trials=10, seed=0)


# --- projected sign sup-norm ------------------------------------------------------

def test_projected_sign_supnorm_reference_point():
    res = validate_projected_sign_supnorm(n=2000, p=2000, b=0.5, trials=250, seed=5)
    assert res.passed
    assert res.params == {"n": 2000, "p": 2000, "b": 0.5}
    assert "k=65" in res.notes


def test_projected_sign_supnorm_tight_regime():
    # log(p)/b = 19.0 >= 16.2 activates the tightened level
    res = validate_projected_sign_supnorm(n=2000, p=2000, b=0.4, trials=250, seed=6)
    assert any(c.name == "supnorm_tail_freq_tight" for c in res.checks)
    assert res.passed


def test_projected_sign_supnorm_scalar_case():
    # k = 1 requires a small enough n; statistic is |1/||c||^2|
    res = validate_projected_sign_supnorm(n=30, p=1212, b=0.5, trials=800, seed=7)
    assert res.passed


def test_projected_sign_supnorm_domain():
    with pytest.raises(ValueError, match="1212"):
        validate_projected_sign_supnorm(n=2000, p=1000, b=0.5, trials=10, seed=0)
    with pytest.raises(ValueError):
        validate_projected_sign_supnorm(n=2000, p=2000, b=1.5, trials=10, seed=0)
    with pytest.raises(ValueError, match="zero"):
        validate_projected_sign_supnorm(n=10, p=1212, b=0.1, trials=10, seed=0)


# --- rotation invariance -----------------------------------------------------------

def test_rotation_invariance_circle_and_high_dim():
    assert validate_rotation_invariance(n=50, k=2, trials=1500, seed=8).passed
    assert validate_rotation_invariance(n=50, k=49, trials=1500, seed=9).passed


def test_rotation_invariance_fixed_rotation():
    res = validate_rotation_invariance(n=40, k=3, trials=1500, seed=10, rotate=True)
    assert res.passed and res.params["rotate"]


def test_rotation_invariance_detects_nonuniform():
    # sanity that the KS machinery can fail: compare against a wrong marginal
    # by abusing k (first coordinate of a k=12 sphere is far from the k=2 law)
    samples = []
    for tr in range(1500):
        g = np.random.Generator(np.random.PCG64(derive_seed(11, tr, 0))).standard_normal(12)
        samples.append(g[0] / np.linalg.norm(g))
    pval = stats.kstest((np.array(samples) + 1) / 2, stats.beta(0.5, 0.5).cdf).pvalue
    assert pval < 0.01


# --- quadratic form -----------------------------------------------------------------

def test_quadratic_chi2_reference_and_moment():
    res = validate_quadratic_chi2(n=100, k=20, trials=1200, seed=12)
    assert res.passed


def test_quadratic_chi2_k1_matches_direct_chi2_draws():
    res = validate_quadratic_chi2(n=100, k=1, trials=1200, seed=13)
    assert res.passed
    # independent route: two-sample KS between validator-style statistics and
    # raw chi2_n draws
    stats_direct = np.random.Generator(np.random.PCG64(99)).chisquare(100, 1200)
    samples = []
    for tr in range(1200):
        rng = np.random.Generator(np.random.PCG64(derive_seed(13, tr, 0)))
        a = rng.standard_normal((100, 1)) / 10.0
        samples.append(100.0 * float(a[:, 0] @ a[:, 0]))
    assert stats.ks_2samp(np.array(samples), stats_direct).pvalue > 0.01


def test_quadratic_chi2_rademacher_variant():
    assert validate_quadratic_chi2(n=80, k=10, trials=1000, seed=14, x_kind="rademacher").passed


# --- concentration -------------------------------------------------------------------

def test_concentration_sphere_coordinate():
    res = validate_concentration("lemma7", {"k": 50, "eps": 0.5}, trials=4000, seed=15)
    assert res.passed


def test_concentration_chi2_upper():
    res = validate_concentration("lemma8", {"k": 100, "delta": 1.0}, trials=4000, seed=16)
    assert res.passed
    assert res.checks[0].statistic == 0.0      # the true tail is ~1e-8


def test_concentration_chi2_lower_nonvacuous_point():
    # at (k, delta) = (10, 0.3) the lower tail is ~0.27 and the Chernoff
    # level is ~0.75: a genuinely informative comparison
    res = validate_concentration("lemma9", {"k": 10, "delta": 0.3}, trials=4000, seed=17)
    assert res.passed
    assert 0.2 < res.checks[0].statistic < 0.35
    assert 0.7 < res.checks[0].threshold < 0.8


def test_concentration_rademacher_boundary_case():
    # a single basis coordinate: |sum| = 1 < 1.5 always, so zero violations
    res = validate_concentration("lemma10", {"k": 5, "t": 1.5, "a_kind": "basis"},
                                 trials=500, seed=18)
    assert res.passed and res.checks[0].statistic == 0.0


def test_concentration_rademacher_generic():
    res = validate_concentration("lemma10", {"k": 50, "t": 1.5, "a_kind": "ones"},
                                 trials=4000, seed=19)
    assert res.passed
    assert res.checks[0].statistic > 0.05      # non-trivial event frequency


def test_concentration_domain():
    with pytest.raises(ValueError):
        validate_concentration("lemma9", {"k": 10, "delta": 1.5}, trials=10, seed=0)
    with pytest.raises(ValueError):
        validate_concentration("lemma11", {}, trials=10, seed=0)
    with pytest.raises(ValueError):
        validate_concentration("lemma10", {"k": 5, "t": 1.0, "a_kind": "bogus"},
                               trials=10, seed=0)


# --- grid ------------------------------------------------------------------------------

def test_run_grid_subset_deterministic_and_table():
    grid = [
        (validate_rotation_invariance, {"n": 30, "k": 2, "trials": 400}),
        (validate_concentration, {"lemma_id": "lemma7", "params": {"k": 50, "eps": 0.5},
                                  "trials": 500}),
    ]
    res1 = run_grid(123, grid)
    res2 = run_grid(123, grid)
    assert res1 == res2
    table = results_table(res1)
    assert "lemma5" in table and "lemma7" in table and "overall" in table
    rows = results_to_csv_rows(res1)
    assert rows[0][0] == "lemma"
    assert len(rows) == 1 + sum(len(r.checks) for r in res1)
