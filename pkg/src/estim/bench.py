"""Benchmark systems, metrics, and the multi-run experiment harness.

Two reference systems are provided: a scalar linear system, on which
every deterministic backend is exact, and the univariate nonstationary
growth model, a standard hard case for Gaussian filters.  Experiments
run every requested method on identical simulated trajectories so the
comparison is paired, and aggregate per-run metrics into mean and
standard error.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimator import EstimationResult, FilterStepError, rts_smooth, run_filter
from .gaussians import GaussianBelief, gaussian_log_density
from .gibbs import GibbsConfig, GibbsMoments
from .linalg import psd_sqrt
from .models import SystemModel
from .moments import DeterministicMoments, MomentBackendConfig

log = logging.getLogger(__name__)

METHODS = ("kf", "ekf", "ukf", "ckf", "gibbs")

# Environment variable capping run-level thread parallelism.
THREADS_ENV = "ESTIM_THREADS"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A simulated state and measurement sequence.

    ``states`` has shape (T+1, dim_x) including the initial state;
    ``measurements`` has shape (T, dim_z), one row per step t = 1..T.
    """

    states: np.ndarray
    measurements: np.ndarray
    seed: int

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        meas = np.asarray(self.measurements, dtype=float)
        if meas.size == 0:
            meas = meas.reshape(0, 1)
        meas = np.atleast_2d(meas)
        if states.shape[0] != meas.shape[0] + 1:
            raise ValueError(
                f"states has {states.shape[0]} rows but measurements has "
                f"{meas.shape[0]}; expected one more state than measurements"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "measurements", meas)

    @property
    def horizon(self) -> int:
        return self.measurements.shape[0]


def simulate(model: SystemModel, horizon: int, seed: int) -> Trajectory:
    """Draw one trajectory of length ``horizon`` from ``model``.

    The draw order is fixed (initial state, then process noise and
    measurement noise per step) so a seed fully determines the result.
    Noise factors come from an eigendecomposition, so exactly singular
    covariances, including zero matrices, simulate deterministically.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    rng = np.random.default_rng(seed)
    prior_factor = psd_sqrt(model.prior.cov)
    process_factor = psd_sqrt(model.Q)
    meas_factor = psd_sqrt(model.R)
    dim_x, dim_z = model.dim_x, model.dim_z

    states = np.empty((horizon + 1, dim_x))
    measurements = np.empty((horizon, dim_z))
    x = model.prior.mean + prior_factor @ rng.standard_normal(dim_x)
    states[0] = x
    for t in range(1, horizon + 1):
        x = np.asarray(model.transition(x, t), dtype=float).reshape(dim_x)
        x = x + process_factor @ rng.standard_normal(dim_x)
        states[t] = x
        z = np.asarray(model.measurement(x, t), dtype=float).reshape(dim_z)
        measurements[t - 1] = z + meas_factor @ rng.standard_normal(dim_z)
    return Trajectory(states=states, measurements=measurements, seed=int(seed))


def _linear_transition(x, t):
    return np.asarray(x, dtype=float)


def _linear_measurement(x, t):
    return -2.0 * np.asarray(x, dtype=float)


def _linear_transition_jac(x, t):
    return np.array([[1.0]])


def _linear_measurement_jac(x, t):
    return np.array([[-2.0]])


def linear_benchmark_model() -> SystemModel:
    """Scalar random walk observed through gain -2:

        x_t = x_{t-1} + w_t,   w ~ N(0, 1)
        z_t = -2 x_t + v_t,    v ~ N(0, 10)

    with prior x_0 ~ N(0, 5).
    """
    return SystemModel(
        transition=_linear_transition,
        measurement=_linear_measurement,
        Q=np.array([[1.0]]),
        R=np.array([[10.0]]),
        prior=GaussianBelief([0.0], [[5.0]]),
        jacobian_f=_linear_transition_jac,
        jacobian_g=_linear_measurement_jac,
    )


def _growth_transition(x, t):
    x = np.asarray(x, dtype=float)
    return 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * np.cos(1.2 * (t - 1))


def _growth_measurement(x, t):
    x = np.asarray(x, dtype=float)
    return x * x / 20.0


def _growth_transition_jac(x, t):
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(0.5 + 25.0 * (1.0 - x * x) / (1.0 + x * x) ** 2)


def _growth_measurement_jac(x, t):
    return np.atleast_2d(np.asarray(x, dtype=float) / 10.0)


def ungm_benchmark_model() -> SystemModel:
    """Univariate nonstationary growth model:

        x_t = x_{t-1}/2 + 25 x_{t-1} / (1 + x_{t-1}^2) + 8 cos(1.2 (t-1)) + w_t
        z_t = x_t^2 / 20 + v_t

    with w ~ N(0, 1), v ~ N(0, 10) and prior x_0 ~ N(0, 5).  The squared
    measurement makes the sign of the state nearly unobservable, which is
    what breaks plain linearization here.
    """
    return SystemModel(
        transition=_growth_transition,
        measurement=_growth_measurement,
        Q=np.array([[1.0]]),
        R=np.array([[10.0]]),
        prior=GaussianBelief([0.0], [[5.0]]),
        jacobian_f=_growth_transition_jac,
        jacobian_g=_growth_measurement_jac,
    )


def rmse(states: np.ndarray, beliefs) -> float:
    """Root mean squared error of belief means against the true states,
    averaged over all T+1 time indices including the initial one."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] != len(beliefs):
        raise ValueError(
            f"got {states.shape[0]} states but {len(beliefs)} beliefs"
        )
    errors = states - np.stack([b.mean for b in beliefs])
    return float(np.sqrt(np.mean(np.sum(errors**2, axis=1))))


def nll(states: np.ndarray, beliefs) -> float:
    """Average negative log likelihood of the true states under the
    belief sequence, over all T+1 time indices."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] != len(beliefs):
        raise ValueError(
            f"got {states.shape[0]} states but {len(beliefs)} beliefs"
        )
    terms = [
        gaussian_log_density(belief, state) for belief, state in zip(beliefs, states)
    ]
    return float(-np.mean(terms))


@dataclass(frozen=True)
class RunMetrics:
    rmse_filter: float
    nll_filter: float
    rmse_smooth: float
    nll_smooth: float


@dataclass(frozen=True)
class Aggregate:
    mean: float
    se: float


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Per-method outcome of an experiment.

    ``per_run`` holds one :class:`RunMetrics` per run, or None where the
    method failed; failed runs are excluded from the aggregates.
    """

    method: str
    per_run: tuple
    failed_runs: int

    def aggregates(self) -> dict:
        """Mean and standard error per metric over the successful runs.

        The standard error is the sample standard deviation divided by
        sqrt(number of successful runs); zero for a single run, NaN when
        every run failed.
        """
        out = {}
        successes = [m for m in self.per_run if m is not None]
        for name in ("rmse_filter", "nll_filter", "rmse_smooth", "nll_smooth"):
            values = np.array([getattr(m, name) for m in successes])
            if values.size == 0:
                out[name] = Aggregate(float("nan"), float("nan"))
            elif values.size == 1:
                out[name] = Aggregate(float(values[0]), 0.0)
            else:
                out[name] = Aggregate(
                    float(values.mean()),
                    float(values.std(ddof=1) / np.sqrt(values.size)),
                )
        return out


def trajectory_seed(master_seed: int, run_index: int) -> int:
    """Derive the simulation seed for one run from the master seed."""
    seq = np.random.SeedSequence((int(master_seed), int(run_index)))
    return int(seq.generate_state(1, np.uint64)[0])


def _make_moments(
    name: str,
    run_index: int,
    gibbs_config: GibbsConfig,
    ukf_config: MomentBackendConfig,
):
    if name == "kf":
        return DeterministicMoments(MomentBackendConfig("linear"))
    if name == "ekf":
        return DeterministicMoments(MomentBackendConfig("ekf"))
    if name == "ukf":
        return DeterministicMoments(ukf_config)
    if name == "ckf":
        return DeterministicMoments(MomentBackendConfig("ckf"))
    if name == "gibbs":
        return GibbsMoments(gibbs_config, run_index=run_index)
    raise ValueError(f"unknown method {name!r}, expected one of {METHODS}")


def evaluate_method(model: SystemModel, trajectory: Trajectory, moments) -> RunMetrics:
    """Filter and smooth one trajectory, returning the four metrics."""
    result = rts_smooth(run_filter(model, trajectory.measurements, moments))
    return RunMetrics(
        rmse_filter=rmse(trajectory.states, result.filtered),
        nll_filter=nll(trajectory.states, result.filtered),
        rmse_smooth=rmse(trajectory.states, result.smoothed),
        nll_smooth=nll(trajectory.states, result.smoothed),
    )


def run_experiment(
    model: SystemModel,
    methods,
    *,
    runs: int = 100,
    horizon: int = 50,
    master_seed: int = 0,
    gibbs_config: Optional[GibbsConfig] = None,
    ukf_config: Optional[MomentBackendConfig] = None,
) -> list:
    """Run each method over ``runs`` independent trajectories.

    All methods see the identical trajectory within a run, so differences
    between methods are paired.  A method failure (numerical error during
    filtering or smoothing) is logged, recorded as None for that run, and
    excluded from the aggregates.

    Runs execute in parallel across up to ``ESTIM_THREADS`` threads when
    that environment variable is set above one; results are reduced in
    run order, so the report does not depend on the execution schedule.

    Returns a list of :class:`ExperimentReport`, ordered like ``methods``.
    """
    methods = list(methods)
    if not methods:
        raise ValueError("methods must not be empty")
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}, expected one of {METHODS}")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    gibbs_config = gibbs_config or GibbsConfig(seed=master_seed)
    ukf_config = ukf_config or MomentBackendConfig("ukf")

    def one_run(run_index: int) -> dict:
        trajectory = simulate(model, horizon, trajectory_seed(master_seed, run_index))
        outcome = {}
        for name in methods:
            moments = _make_moments(name, run_index, gibbs_config, ukf_config)
            try:
                outcome[name] = evaluate_method(model, trajectory, moments)
            except (FilterStepError, np.linalg.LinAlgError, FloatingPointError, ValueError) as err:
                log.warning("run %d method %s failed: %s", run_index, name, err)
                outcome[name] = None
        return outcome

    threads = int(os.environ.get(THREADS_ENV, "1") or "1")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, runs)) as pool:
            outcomes = list(pool.map(one_run, range(runs)))
    else:
        outcomes = [one_run(r) for r in range(runs)]

    reports = []
    for name in methods:
        per_run = tuple(outcome[name] for outcome in outcomes)
        failed = sum(1 for m in per_run if m is None)
        reports.append(ExperimentReport(method=name, per_run=per_run, failed_runs=failed))
    return reports
