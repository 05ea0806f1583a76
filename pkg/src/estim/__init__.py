"""Gaussian filtering and RTS smoothing with interchangeable moment backends.

Any Gaussian filter and smoother is fully determined by its Gaussian
approximations to two joints per step: the joint over consecutive states
under the transition, and the joint over state and measurement.  This
package keeps that split explicit: backends produce joint Gaussians,
while a single generic filter conditions and marginalizes them.
"""

from .bench import (
    Aggregate,
    ExperimentReport,
    RunMetrics,
    Trajectory,
    linear_benchmark_model,
    nll,
    rmse,
    run_experiment,
    simulate,
    trajectory_seed,
    ungm_benchmark_model,
)
from .estimator import EstimationResult, FilterStepError, rts_smooth, run_filter
from .gaussians import (
    GaussianBelief,
    JointGaussian,
    condition_joint,
    gaussian_log_density,
)
from .gibbs import (
    GibbsConfig,
    GibbsMoments,
    NiwHyperParams,
    cov_posterior_params,
    gibbs_joint_moments,
    mean_posterior_params,
    sample_inverse_wishart,
    update_cov_conditional,
    update_mean_conditional,
)
from .linalg import (
    NotPositiveDefiniteError,
    psd_sqrt,
    safe_cholesky,
    safe_cholesky_with_jitter,
    solve_psd,
    symmetrize,
)
from .models import SystemModel
from .moments import (
    DeterministicMoments,
    MomentBackendConfig,
    ekf_jacobian,
    propagate_joint,
    ukf_weights,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregate",
    "DeterministicMoments",
    "EstimationResult",
    "ExperimentReport",
    "FilterStepError",
    "GaussianBelief",
    "GibbsConfig",
    "GibbsMoments",
    "JointGaussian",
    "MomentBackendConfig",
    "NiwHyperParams",
    "NotPositiveDefiniteError",
    "RunMetrics",
    "SystemModel",
    "Trajectory",
    "condition_joint",
    "cov_posterior_params",
    "ekf_jacobian",
    "gaussian_log_density",
    "gibbs_joint_moments",
    "linear_benchmark_model",
    "mean_posterior_params",
    "nll",
    "propagate_joint",
    "psd_sqrt",
    "rmse",
    "rts_smooth",
    "run_experiment",
    "run_filter",
    "safe_cholesky",
    "safe_cholesky_with_jitter",
    "sample_inverse_wishart",
    "simulate",
    "solve_psd",
    "symmetrize",
    "trajectory_seed",
    "ukf_weights",
    "ungm_benchmark_model",
    "update_cov_conditional",
    "update_mean_conditional",
]
