"""Simulation and inference laboratory for a semilinear stochastic heat/Burgers
equation on (0, 1): spectral Galerkin dynamics driven by space-time white noise,
kernel-windowed local observation, and diffusivity estimation with Monte Carlo
verification of its limit behaviour.
"""

from .dynamics import (
    NonlinearitySpec,
    SolverConfig,
    Trajectory,
    burgers_drift,
    f_drift,
    moment_diagnostic,
    simulate,
    step,
)
from .estimation import (
    DegenerateObservationError,
    ErrorDecomposition,
    EstimateResult,
    asymptotic_variance,
    augmented_mle,
    confidence_interval,
    error_decomposition,
    estimate,
    fisher_information,
    normal_quantile,
)
from .harness import (
    ExperimentConfig,
    FailureBudgetExceeded,
    McSummary,
    ReplicationRecord,
    emit_results,
    ks_normality,
    run_replication,
    run_study,
)
from .noise import (
    NoisePlan,
    OUPath,
    brownian_increment,
    ou_exact_step,
    simulate_stochastic_convolution,
)
from .observation import (
    KernelSpec,
    SupportError,
    TrajectoryObservation,
    bump_kernel,
    kernel_report,
    make_kernel,
    observe,
    scale_kernel,
    scaling_identity_check,
)
from .spectral import (
    GridField,
    ResolutionError,
    SpectralField,
    eigenfunction_at,
    eigenvalue,
    fractional_laplacian_apply,
    from_grid,
    lp_norm,
    sobolev_norm,
    to_grid,
)

__version__ = "0.1.0"
