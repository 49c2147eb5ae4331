"""Monte Carlo harness for the recovery phase-transition sweeps.

Three standard sweeps mirror the certificate theory:

- fig1: probability of exact sign-and-support recovery as a function of the
  sparsity k, at the protocol operating point T = 5.5 * gamma0 and
  gamma in {T/5.5, T/4, T/2}; vertical thresholds k_beta for
  beta in {0.7, 0.8, 0.9, 1} accompany the curve.
- fig2: probability of the sign-preservation condition alone as a function
  of gamma/gamma0 at critical sparsity, in the infinite-SNR convention
  (the noise vector is exactly zero; eps keeps its nominal value inside the
  protocol formulas for T and gamma0).
- fig3: probability of the off-support dual condition alone as a function of
  T/gamma0 at critical sparsity.  The evaluation gamma is tied to the swept
  signal level through the protocol coupling gamma = T/5.5, so the
  certificate's gamma*d term scales with T and the sweep recovers its
  transition; at T/gamma0 = 5.5 this is exactly gamma = gamma0.

Every trial redraws the matrix, the signal and the noise from seeds derived
from (master_seed, sweep position, trial index), which makes the full
experiment a pure function of its configuration: aggregates are identical
for any worker count, trial partitioning, or execution order.  A rank
anomaly in a trial (numerically dependent active columns) is recorded per
point and excluded from the success denominator rather than counted either
way.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import certificate as cert
from .bounds import experiment_params
from .ensemble import derive_seed, gaussian_matrix, sparse_signal, sphere_noise
from .lasso import solve_homotopy
from .linalg import RankDeficiencyError

__all__ = [
    "SWEEP_VARIABLES",
    "ExperimentConfig",
    "ProbEstimate",
    "TrialOutcome",
    "wilson_interval",
    "run_trial",
    "estimate_probability",
    "merge_estimates",
    "run_fig1",
    "run_fig2",
    "run_fig3",
    "trend_z_decreasing",
    "write_results",
    "read_results",
    "emit_plot",
]

SWEEP_VARIABLES = ("k", "gamma_ratio", "T_ratio")
_WILSON_Z = 1.959963984540054  # 95% two-sided normal quantile


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1000
    p: int = 4000
    alpha: float = 0.8
    beta: float = 0.8
    eps: float = 1.0
    trials: int = 200
    sweep_variable: str = "k"
    sweep_grid: tuple = ()
    mode: str = "certificate"            # or "solver"
    condition_subset: str = "both"       # "both" | "c1_only" | "c2_only"
    gamma_rule: str = "t_over_5p5"       # fig1 variants: t_over_4, t_over_2
    shared_matrix: bool = False
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        grid = tuple(float(v) for v in self.sweep_grid)
        if not grid:
            raise ValueError("sweep grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("certificate", "solver"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.condition_subset not in ("both", "c1_only", "c2_only"):
            raise ValueError(f"unknown condition subset {self.condition_subset!r}")
        if self.gamma_rule not in ("t_over_5p5", "t_over_4", "t_over_2"):
            raise ValueError(f"unknown gamma rule {self.gamma_rule!r}")
        object.__setattr__(self, "sweep_grid", grid)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class ProbEstimate:
    sweep_value: float
    successes: int
    trials: int               # valid trials (anomalies excluded)
    p_hat: float
    ci_low: float
    ci_high: float
    anomalies: int = 0


@dataclass(frozen=True)
class TrialOutcome:
    success: bool | None      # None when the trial was an anomaly
    anomaly: bool
    report: object = field(default=None, repr=False)


def wilson_interval(successes: int, trials: int, z: float = _WILSON_Z) -> tuple:
    """95% Wilson score interval; stable for small and extreme counts."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials)) / denom
    # the exact interval always contains phat; clamping removes float residue
    return min(max(0.0, center - half), phat), max(min(1.0, center + half), phat)


def _value_token(value: float) -> int:
    """Stable integer token of a sweep value for seed derivation."""
    return int(np.float64(value).view(np.uint64))


def _trial_params(config: ExperimentConfig, sweep_value: float):
    """Resolve (k, T, gamma, eps_data) for one sweep point."""
    par = experiment_params(config.n, config.p, config.alpha, config.beta, config.eps)
    if config.sweep_variable == "k":
        k = int(round(sweep_value))
        big_t = par.big_t
        divisor = {"t_over_5p5": 5.5, "t_over_4": 4.0, "t_over_2": 2.0}[config.gamma_rule]
        gamma = big_t / divisor
    elif config.sweep_variable == "gamma_ratio":
        k = par.k_beta_int
        big_t = par.big_t
        gamma = sweep_value * par.gamma0
    else:  # T_ratio: protocol coupling gamma = T / 5.5
        k = par.k_beta_int
        big_t = sweep_value * par.gamma0
        gamma = big_t / 5.5
    eps_data = 0.0 if config.condition_subset == "c1_only" else config.eps
    return k, big_t, gamma, eps_data


def run_trial(config: ExperimentConfig, sweep_value: float, trial_index: int) -> TrialOutcome:
    """One seeded trial: draw (A, x0, w), evaluate the configured success event."""
    k, big_t, gamma, eps_data = _trial_params(config, sweep_value)
    point_master = derive_seed(config.master_seed, _value_token(sweep_value), 90)
    if config.shared_matrix:
        mat_seed = derive_seed(config.master_seed, 0, 91)
    else:
        mat_seed = derive_seed(point_master, trial_index, 0)
    sig_seed = derive_seed(point_master, trial_index, 1)
    noise_seed = derive_seed(point_master, trial_index, 2)

    a = gaussian_matrix(config.n, config.p, mat_seed)
    x0 = sparse_signal(config.p, k, big_t if k else 1.0, sig_seed)
    w = sphere_noise(config.n, eps_data, noise_seed)

    try:
        if config.mode == "certificate":
            if config.condition_subset == "c1_only":
                check = cert.check_c1(a, x0, None, gamma)
                return TrialOutcome(success=check.passed, anomaly=False, report=check)
            if config.condition_subset == "c2_only":
                check = cert.check_c2(a, x0, w, gamma)
                return TrialOutcome(success=check.passed, anomaly=False, report=check)
            # the success event needs only the two condition checks, not the
            # full scalar-certificate report
            c1 = cert.check_c1(a, x0, w, gamma)
            c2 = cert.check_c2(a, x0, w, gamma)
            return TrialOutcome(success=(c1.passed and c2.passed), anomaly=False,
                                report=(c1, c2))
        # solver mode
        y = a.entries[:, x0.support] @ x0.values + w
        sol = solve_homotopy(a, y, gamma)
        if not sol.unique:
            return TrialOutcome(success=None, anomaly=True, report=sol)
        label, _, _ = cert.classify_recovery(sol.x, x0)
        return TrialOutcome(success=(label == cert.RecoveryClass.EXACT_SIGN),
                            anomaly=False, report=sol)
    except RankDeficiencyError:
        return TrialOutcome(success=None, anomaly=True)


def _point_estimate(config: ExperimentConfig, sweep_value: float,
                    trial_range: range) -> ProbEstimate:
    def one(idx: int):
        return run_trial(config, sweep_value, idx)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(one, trial_range))
    else:
        outcomes = [one(i) for i in trial_range]
    anomalies = sum(o.anomaly for o in outcomes)
    successes = sum(bool(o.success) for o in outcomes)
    valid = len(outcomes) - anomalies
    phat = successes / valid if valid else 0.0
    lo, hi = wilson_interval(successes, valid) if valid else (0.0, 1.0)
    return ProbEstimate(sweep_value=sweep_value, successes=successes, trials=valid,
                        p_hat=phat, ci_low=lo, ci_high=hi, anomalies=anomalies)


def estimate_probability(config: ExperimentConfig, trial_range: range | None = None) -> list:
    """Per sweep point, run independent trials and return Wilson estimates."""
    rng = trial_range if trial_range is not None else range(config.trials)
    return [_point_estimate(config, v, rng) for v in config.sweep_grid]


def merge_estimates(a: ProbEstimate, b: ProbEstimate) -> ProbEstimate:
    """Order-independent merge of two disjoint trial ranges of one point."""
    if a.sweep_value != b.sweep_value:
        raise ValueError("cannot merge estimates of different sweep points")
    successes = a.successes + b.successes
    valid = a.trials + b.trials
    lo, hi = wilson_interval(successes, valid) if valid else (0.0, 1.0)
    return ProbEstimate(sweep_value=a.sweep_value, successes=successes, trials=valid,
                        p_hat=successes / valid if valid else 0.0,
                        ci_low=lo, ci_high=hi, anomalies=a.anomalies + b.anomalies)


# --- figure runners ----------------------------------------------------------

def run_fig1(config: ExperimentConfig):
    """Sparsity sweep; returns (estimates, thresholds) with the k_beta
    verticals for beta in {0.7, 0.8, 0.9, 1}."""
    if config.sweep_variable != "k":
        raise ValueError("fig1 sweeps k")
    estimates = estimate_probability(config)
    thresholds = {
        b: experiment_params(config.n, config.p, config.alpha, b, config.eps).k_beta
        for b in (0.7, 0.8, 0.9, 1.0)
    }
    return estimates, thresholds


def run_fig2(config: ExperimentConfig):
    """Regularization sweep, sign condition only, noiseless data vectors."""
    cfg = replace(config, sweep_variable="gamma_ratio", condition_subset="c1_only",
                  mode="certificate")
    return estimate_probability(cfg)


def run_fig3(config: ExperimentConfig):
    """Signal-level sweep, dual condition only."""
    cfg = replace(config, sweep_variable="T_ratio", condition_subset="c2_only",
                  mode="certificate")
    return estimate_probability(cfg)


def trend_z_decreasing(estimates) -> tuple:
    """Cochran-Armitage style test for a decreasing success trend.

    Returns (z, one_sided_p): large positive z (small p) means the success
    probability significantly decreases along the sweep grid.
    """
    x = np.array([e.sweep_value for e in estimates], dtype=np.float64)
    s = np.array([e.successes for e in estimates], dtype=np.float64)
    t = np.array([e.trials for e in estimates], dtype=np.float64)
    if len(x) < 2:
        raise ValueError("need at least two sweep points")
    pbar = s.sum() / t.sum()
    xbar = (t * x).sum() / t.sum()
    num = ((x - xbar) * s).sum()
    var = pbar * (1.0 - pbar) * (t * (x - xbar) ** 2).sum()
    if var == 0:
        return 0.0, 0.5
    z = -num / math.sqrt(var)
    from scipy.stats import norm

    return float(z), float(norm.sf(z))


# --- output ------------------------------------------------------------------

def write_results(estimates, path, sweep_variable: str) -> None:
    """CSV with one row per sweep point; floats use shortest round-trip repr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep_var", "value", "trials", "successes", "p_hat",
                    "ci_low", "ci_high", "anomalies"])
        for e in estimates:
            w.writerow([sweep_variable, repr(e.sweep_value), e.trials, e.successes,
                        repr(e.p_hat), repr(e.ci_low), repr(e.ci_high), e.anomalies])


def read_results(path) -> list:
    """Round-trip reader for :func:`write_results`."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ProbEstimate(
                sweep_value=float(row["value"]), successes=int(row["successes"]),
                trials=int(row["trials"]), p_hat=float(row["p_hat"]),
                ci_low=float(row["ci_low"]), ci_high=float(row["ci_high"]),
                anomalies=int(row["anomalies"])))
    return out


def emit_plot(estimates, path, *, thresholds: dict | None = None,
              xlabel: str = "", title: str = "") -> None:
    """Static vector-graphics plot (SVG) of the probability curve with Wilson
    bands and optional vertical threshold lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = [e.sweep_value for e in estimates]
    y = [e.p_hat for e in estimates]
    lo = [e.ci_low for e in estimates]
    hi = [e.ci_high for e in estimates]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(x, y, "o-", color="tab:blue", label="estimated probability")
    ax.fill_between(x, lo, hi, color="tab:blue", alpha=0.2, label="95% Wilson band")
    if thresholds:
        for name, xv in sorted(thresholds.items(), key=lambda kv: kv[1]):
            line = ax.axvline(xv, color="tab:red", linestyle="--", linewidth=1.0)
            line.set_gid(f"threshold-{name}")
            ax.annotate(str(name), (xv, 1.02), ha="center", fontsize=8,
                        annotation_clip=False)
    ax.set_ylim(-0.02, 1.05)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("probability")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
