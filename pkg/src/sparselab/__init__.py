"""sparselab: a sparse-recovery laboratory.

Seeded Gaussian sensing ensembles, exact (homotopy) and first-order
(accelerated proximal) Lasso solvers, support-recovery certificates with
their closed-form thresholds and probability bounds, statistical validators
for the underlying random-matrix claims, and a Monte Carlo harness for
phase-transition experiments.
"""

from .bounds import (
    check_compressible_admissible,
    experiment_params,
    theorem1_bounds,
    theorem2_bounds,
    theorem3_bounds,
)
from .certificate import (
    CertificateReport,
    RecoveryClass,
    certify_exact,
    check_c1,
    check_c2,
    classify_recovery,
    d_vector,
    erc_value,
    fuchs_value,
    restricted_solution,
)
from .ensemble import (
    ProblemInstance,
    SensingMatrix,
    SignalSpec,
    best_k_term,
    compressible_signal,
    derive_seed,
    gaussian_matrix,
    load_instance,
    make_instance,
    save_instance,
    sparse_signal,
    sphere_noise,
)
from .experiment import (
    ExperimentConfig,
    ProbEstimate,
    estimate_probability,
    run_fig1,
    run_fig2,
    run_fig3,
    run_trial,
    wilson_interval,
)
from .lasso import (
    HomotopyPath,
    LassoSolution,
    candidate_solution,
    check_kkt,
    residual_ratio,
    solve_homotopy,
    solve_proximal,
)
from .linalg import RankDeficiencyError

__version__ = "0.1.0"
