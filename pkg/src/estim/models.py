"""State-space model description shared by the filter and the benchmarks."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .gaussians import GaussianBelief, _as_covariance, _check_psd, _freeze

# Model functions map (state vector, time index) -> vector.  The time index
# is the step being produced: the transition evaluated at t takes the state
# at t-1 to the state at t.
StateFn = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class SystemModel:
    """A nonlinear state-space model with additive Gaussian noise.

        x_t = f(x_{t-1}, t) + w_t,   w_t ~ N(0, Q)
        z_t = g(x_t, t) + v_t,       v_t ~ N(0, R)

    Parameters
    ----------
    transition, measurement : callable
        f and g above; each takes a state vector and the integer time index.
    Q, R : array_like
        Process and measurement noise covariances, symmetric PSD.
    prior : GaussianBelief
        Belief over the initial state x_0.
    jacobian_f, jacobian_g : callable, optional
        Analytic Jacobians with the same (x, t) signature, returning a
        matrix of shape (output dim, state dim).  When absent, backends
        that need derivatives fall back to finite differences.
    """

    transition: StateFn
    measurement: StateFn
    Q: np.ndarray
    R: np.ndarray
    prior: GaussianBelief
    jacobian_f: Optional[StateFn] = None
    jacobian_g: Optional[StateFn] = None

    def __post_init__(self):
        if not callable(self.transition) or not callable(self.measurement):
            raise TypeError("transition and measurement must be callable")
        q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        r = np.atleast_2d(np.asarray(self.R, dtype=float))
        q = _as_covariance("Q", q, q.shape[0])
        r = _as_covariance("R", r, r.shape[0])
        _check_psd("Q", q)
        _check_psd("R", r)
        if not isinstance(self.prior, GaussianBelief):
            raise TypeError("prior must be a GaussianBelief")
        if self.prior.dim != q.shape[0]:
            raise ValueError(
                f"prior dimension {self.prior.dim} does not match Q shape {q.shape}"
            )
        _freeze(q, r)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "R", r)

    @property
    def dim_x(self) -> int:
        return self.Q.shape[0]

    @property
    def dim_z(self) -> int:
        return self.R.shape[0]


def evaluate_batch(func: StateFn, states: np.ndarray, t: int, dim_out: int) -> np.ndarray:
    """Evaluate a model function on every row of ``states``.

    Tries one vectorized call over the (n, d_in) array first; functions
    written with elementwise numpy operations broadcast over rows and take
    that fast path.  Anything else falls back to a per-row loop.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[0]
    try:
        out = np.asarray(func(states, t), dtype=float)
        if out.shape == (n, dim_out):
            return out
    except Exception:
        pass
    out = np.empty((n, dim_out))
    for i in range(n):
        row = np.asarray(func(states[i], t), dtype=float).reshape(-1)
        if row.shape != (dim_out,):
            raise ValueError(
                f"model function returned shape {row.shape}, expected ({dim_out},)"
            )
        out[i] = row
    return out
