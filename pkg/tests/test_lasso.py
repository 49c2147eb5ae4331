"""Solver correctness against independent oracles, path structure, KKT logic."""

import itertools

import numpy as np
import pytest

from sparselab.ensemble import gaussian_matrix, sparse_signal, sphere_noise
from sparselab.certificate import d_vector
from sparselab.lasso import (
    candidate_solution,
    check_kkt,
    numerical_support,
    objective_value,
    path_to_csv,
    residual_ratio,
    solve_homotopy,
    solve_proximal,
)
from sparselab.linalg import RankDeficiencyError


def _instance(n, p, k, seed, noise=0.3, big_t=1.0):
    a = gaussian_matrix(n, p, seed)
    x0 = sparse_signal(p, k, big_t, seed + 1000)
    w = sphere_noise(n, noise, seed + 2000) if noise else np.zeros(n)
    y = a.entries[:, x0.support] @ x0.values + w
    return a.entries, x0, y


def brute_force_lasso(mat, y, gamma, tol=1e-9):
    """Exhaustive support/sign enumeration filtered by the KKT check."""
    n, p = mat.shape
    for size in range(0, min(n, p) + 1):
        for sup in itertools.combinations(range(p), size):
            sup = np.array(sup, dtype=np.int64)
            for signs in itertools.product((-1.0, 1.0), repeat=size):
                signs = np.array(signs)
                try:
                    x = candidate_solution(mat, sup, signs, y, gamma)
                except RankDeficiencyError:
                    continue
                if size and not np.all(np.sign(x[sup]) == signs):
                    continue
                if check_kkt(mat, y, x, gamma, tol=tol).ok:
                    return x
    raise AssertionError("brute force found no KKT point")


# --- homotopy ----------------------------------------------------------------

def test_orthonormal_reduces_to_soft_threshold():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    y = rng.normal(size=8)
    gamma = 0.4
    sol = solve_homotopy(q, y, gamma)
    coeffs = q.T @ y
    soft = np.sign(coeffs) * np.maximum(np.abs(coeffs) - gamma, 0.0)
    np.testing.assert_allclose(sol.x, soft, atol=1e-12)


def test_zero_solution_at_large_gamma():
    mat, _, y = _instance(10, 25, 3, seed=2)
    gmax = float(np.max(np.abs(mat.T @ y)))
    for gamma in (gmax, 1.7 * gmax):
        sol = solve_homotopy(mat, y, gamma)
        assert np.array_equal(sol.x, np.zeros(25))
        assert sol.kkt.ok


def test_single_active_column_near_top():
    mat, _, y = _instance(12, 30, 4, seed=3)
    gmax = float(np.max(np.abs(mat.T @ y)))
    sol = solve_homotopy(mat, y, gmax * (1 - 1e-9))
    assert sol.support.size <= 1


def test_homotopy_matches_long_run_descent_oracle():
    # oracle: plain one-step descent with fixed step 1/L, run very long;
    # independent of the path logic under test
    mat, _, y = _instance(20, 50, 3, seed=4, noise=0.1)
    gamma = 0.25 * float(np.max(np.abs(mat.T @ y)))
    sol = solve_homotopy(mat, y, gamma)

    gram = mat.T @ mat
    corr = mat.T @ y
    lip = float(np.linalg.eigvalsh(gram)[-1])
    x = np.zeros(50)
    for _ in range(1_000_000):
        z = x - (gram @ x - corr) / lip
        x = np.sign(z) * np.maximum(np.abs(z) - gamma / lip, 0.0)
    assert np.max(np.abs(sol.x - x)) <= 1e-6


def test_homotopy_bruteforce_small():
    for seed in range(8):
        mat, _, y = _instance(6, 8, 2, seed=seed, noise=0.2)
        gamma = 0.3 * float(np.max(np.abs(mat.T @ y)))
        sol = solve_homotopy(mat, y, gamma)
        xb = brute_force_lasso(mat, y, gamma)
        assert np.max(np.abs(sol.x - xb)) <= 1e-8


def test_homotopy_kkt_selfconsistency_batch():
    for seed in range(20):
        mat, _, y = _instance(32, 96, 5, seed=100 + seed)
        gamma = 0.2 * float(np.max(np.abs(mat.T @ y)))
        sol = solve_homotopy(mat, y, gamma)
        assert check_kkt(mat, y, sol.x, gamma, tol=1e-8).ok
        assert sol.unique


def test_homotopy_rejects_bad_gamma():
    mat, _, y = _instance(10, 20, 2, seed=5)
    with pytest.raises(ValueError):
        solve_homotopy(mat, y, 0.0)
    with pytest.raises(ValueError):
        solve_homotopy(mat, y, -1.0)


def test_duplicate_column_flags_nonunique():
    a = np.array([[0.6], [0.8]])
    mat = np.hstack([a, a, np.array([[0.1], [-0.3]])])
    y = mat[:, 0] * 2.0
    sol = solve_homotopy(mat, y, 0.3)
    assert sol.kkt.ok
    assert not sol.unique


def test_near_duplicate_columns_never_silently_wrong():
    # the active Gram may or may not degenerate numerically; the contract is
    # a valid KKT point or an explicit error, never a silent bad answer
    rng = np.random.default_rng(6)
    base = rng.normal(size=(12, 6)) / np.sqrt(12)
    mat = np.hstack([base, base[:, :2] * (1 + 1e-15)])
    y = base @ rng.normal(size=6)
    try:
        sol = solve_homotopy(mat, y, 0.05 * float(np.max(np.abs(mat.T @ y))))
    except RankDeficiencyError:
        return
    assert sol.kkt.ok


# --- path structure ----------------------------------------------------------

def test_path_breakpoints_and_continuity():
    mat, _, y = _instance(16, 40, 4, seed=7)
    gamma = 1e-4 * float(np.max(np.abs(mat.T @ y)))
    sol = solve_homotopy(mat, y, gamma, return_path=True)
    path = sol.path
    bps = path.breakpoints
    assert np.all(np.diff(bps) > 0)
    assert bps[-1] == pytest.approx(float(np.max(np.abs(mat.T @ y))), rel=1e-12)
    # continuity at interior breakpoints: both adjacent segments agree
    for i in range(1, len(bps) - 1):
        g = float(bps[i])
        lo_seg = path.segments[i - 1]
        hi_seg = path.segments[i]
        x_lo = np.zeros(path.p)
        x_lo[lo_seg.support] = lo_seg.coeffs_at(g)
        x_hi = np.zeros(path.p)
        x_hi[hi_seg.support] = hi_seg.coeffs_at(g)
        assert np.max(np.abs(x_lo - x_hi)) <= 1e-8 * max(1.0, np.max(np.abs(x_lo)))


def test_path_supports_constant_within_segments():
    mat, _, y = _instance(14, 30, 3, seed=8)
    sol = solve_homotopy(mat, y, 1e-3, return_path=True)
    for seg in sol.path.segments:
        mid = 0.5 * (seg.lo + seg.hi)
        if mid <= 0:
            continue
        x = sol.path.solution_at(mid)
        assert np.array_equal(numerical_support(x), np.sort(seg.support)) or \
            np.all(np.isin(numerical_support(x), seg.support))


def test_residual_ratio_monotone_and_top_value():
    for seed in range(10):
        mat, _, y = _instance(18, 45, 4, seed=30 + seed)
        gmax = float(np.max(np.abs(mat.T @ y)))
        sol = solve_homotopy(mat, y, 1e-5 * gmax, return_path=True)
        gs = np.geomspace(1e-5 * gmax, 2.0 * gmax, 120)
        f = residual_ratio(sol.path, gs)
        assert np.all(np.diff(f) <= 1e-10)
        assert residual_ratio(sol.path, [gmax])[0] == pytest.approx(
            float(np.linalg.norm(y)) / gmax, rel=1e-12)


def test_residual_ratio_constant_on_noiseless_recoverable_instance():
    # noiseless, comfortably sparse: below the last breakpoint the support is
    # the true one and f equals the norm of the dual direction exactly
    mat, x0, y = _instance(40, 60, 3, seed=9, noise=0.0, big_t=2.0)
    sol = solve_homotopy(mat, y, 1e-8, return_path=True)
    f_two = residual_ratio(sol.path, [1e-8, 5e-7])
    assert f_two[0] == pytest.approx(f_two[1], rel=1e-9)
    expect = float(np.linalg.norm(d_vector(mat, x0.support, x0.signs)))
    assert f_two[0] == pytest.approx(expect, rel=1e-9)


def test_residual_ratio_rejects_nonpositive():
    mat, _, y = _instance(10, 20, 2, seed=10)
    sol = solve_homotopy(mat, y, 0.1, return_path=True)
    with pytest.raises(ValueError):
        residual_ratio(sol.path, [0.0])


def test_path_csv(tmp_path):
    mat, _, y = _instance(12, 24, 3, seed=11)
    sol = solve_homotopy(mat, y, 1e-3, return_path=True)
    dest = tmp_path / "path.csv"
    path_to_csv(sol.path, dest)
    lines = dest.read_text().strip().splitlines()
    assert lines[0] == "gamma,support_size,objective,residual_norm"
    assert len(lines) == 1 + len(sol.path.breakpoints)
    # top breakpoint row is the zero solution: objective = 0.5 ||y||^2
    top = lines[-1].split(",")
    assert float(top[1]) == 0
    assert float(top[2]) == pytest.approx(0.5 * float(y @ y), rel=1e-12)


# --- proximal ----------------------------------------------------------------

def test_proximal_scalar_soft_threshold():
    sol = solve_proximal(np.array([[1.0]]), np.array([2.0]), 0.5, tol=1e-12)
    assert sol.x[0] == pytest.approx(1.5, abs=1e-10)
    assert sol.converged


def test_proximal_zero_data():
    sol = solve_proximal(np.array([[1.0, 2.0]]), np.array([0.0]), 0.7, tol=1e-12)
    assert np.array_equal(sol.x, np.zeros(2))


def test_proximal_agrees_with_homotopy():
    for seed in range(6):
        mat, _, y = _instance(64, 256, 8, seed=200 + seed, noise=0.5)
        gamma = 0.25 * float(np.max(np.abs(mat.T @ y)))
        sh = solve_homotopy(mat, y, gamma)
        sp = solve_proximal(mat, y, gamma, tol=1e-10)
        assert sp.converged
        assert np.max(np.abs(sh.x - sp.x)) <= 1e-5


def test_proximal_reports_nonconvergence():
    mat, _, y = _instance(20, 60, 4, seed=12)
    gamma = 0.1 * float(np.max(np.abs(mat.T @ y)))
    sol = solve_proximal(mat, y, gamma, tol=1e-14, max_iter=3)
    assert not sol.converged
    assert sol.iterations == 3


def test_proximal_rejects_bad_params():
    mat, _, y = _instance(10, 20, 2, seed=13)
    with pytest.raises(ValueError):
        solve_proximal(mat, y, -0.5)
    with pytest.raises(ValueError):
        solve_proximal(mat, y, 0.5, tol=0.0)


# --- kkt check ---------------------------------------------------------------

def test_check_kkt_zero_vector_cases():
    mat, _, y = _instance(10, 30, 3, seed=14)
    gmax = float(np.max(np.abs(mat.T @ y)))
    zero = np.zeros(30)
    assert check_kkt(mat, y, zero, gmax * 1.001, tol=0.0).ok
    assert not check_kkt(mat, y, zero, gmax * 0.9, tol=1e-9).ok


def test_check_kkt_margins_report():
    mat, _, y = _instance(10, 30, 3, seed=15)
    gamma = 0.3 * float(np.max(np.abs(mat.T @ y)))
    sol = solve_homotopy(mat, y, gamma)
    rep = check_kkt(mat, y, sol.x, gamma, tol=1e-8)
    assert rep.correlations.shape == (30,)
    assert rep.on_support_violation <= 1e-8
    assert rep.off_support_excess <= 1e-8
    with pytest.raises(ValueError):
        check_kkt(mat, y, sol.x, gamma, tol=-1.0)


# --- candidate solution -------------------------------------------------------

def test_candidate_unregularized_noiseless_recovers_coefficients():
    mat, x0, y = _instance(30, 50, 4, seed=16, noise=0.0)
    x = candidate_solution(mat, x0.support, x0.signs, y, 0.0)
    np.testing.assert_allclose(x[x0.support], x0.values, atol=1e-10)


def test_candidate_single_column_shrinkage():
    a = np.array([[0.6], [0.8]])   # unit norm
    c, gamma = 2.5, 0.4
    y = c * a[:, 0]
    x = candidate_solution(a, np.array([0]), np.array([1.0]), y, gamma)
    assert x[0] == pytest.approx(c - gamma, abs=1e-12)


def test_candidate_rejects_bad_inputs():
    mat, x0, y = _instance(10, 20, 2, seed=17)
    with pytest.raises(ValueError):
        candidate_solution(mat, x0.support, np.array([2.0, 1.0]), y, 0.1)
    dup = np.hstack([mat[:, :1], mat[:, :1]])
    with pytest.raises(RankDeficiencyError):
        candidate_solution(dup, np.array([0, 1]), np.array([1.0, 1.0]), y, 0.1)


def test_candidate_matches_homotopy_when_certified():
    # whenever the solved support/sign pattern is the true one, the candidate
    # built from that pattern reproduces the solution
    hits = 0
    for seed in range(10):
        mat, x0, y = _instance(60, 120, 4, seed=400 + seed, noise=0.2, big_t=3.0)
        gamma = 0.35
        sol = solve_homotopy(mat, y, gamma)
        if np.array_equal(sol.support, x0.support) and np.array_equal(sol.signs, x0.signs):
            cand = candidate_solution(mat, x0.support, x0.signs, y, gamma)
            assert np.max(np.abs(cand - sol.x)) <= 1e-8
            hits += 1
    assert hits >= 5


def test_objective_value():
    mat, _, y = _instance(10, 20, 2, seed=18)
    x = np.zeros(20)
    assert objective_value(mat, y, x, 1.0) == pytest.approx(0.5 * float(y @ y))
