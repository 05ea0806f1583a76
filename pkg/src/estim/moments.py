"""Deterministic joint-moment backends.

Each backend maps a Gaussian input belief through a model function and
returns the joint Gaussian over (input, output), with the additive noise
covariance folded into the output block:

    linear  exact moments for an affine function, using its Jacobian
    ekf     first-order linearization at the mean (analytic Jacobian or
            central finite differences)
    ukf     scaled unscented transform with 2d+1 sigma points
    ckf     spherical cubature rule with 2d points

The input block of the returned joint is always the input belief itself,
copied bit for bit.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gaussians import GaussianBelief, JointGaussian
from .linalg import safe_cholesky, symmetrize
from .models import StateFn, evaluate_batch

BACKEND_KINDS = ("linear", "ekf", "ukf", "ckf")


@dataclass(frozen=True)
class MomentBackendConfig:
    """Configuration for a deterministic moment backend.

    Parameters
    ----------
    kind : str
        One of :data:`BACKEND_KINDS`.
    ukf_alpha, ukf_beta, ukf_kappa : float
        Scaled unscented transform parameters.  ``ukf_kappa=None`` resolves
        to ``3 - d`` at the input dimension d.
    ekf_fd_step : float
        Central finite-difference step used when no analytic Jacobian is
        supplied.
    """

    kind: str
    ukf_alpha: float = 1.0
    ukf_beta: float = 2.0
    ukf_kappa: Optional[float] = None
    ekf_fd_step: float = 1e-6

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(
                f"unknown backend kind {self.kind!r}, expected one of {BACKEND_KINDS}"
            )
        if self.ukf_alpha <= 0.0:
            raise ValueError("ukf_alpha must be positive")
        if self.ekf_fd_step <= 0.0:
            raise ValueError("ekf_fd_step must be positive")


def ekf_jacobian(
    func: StateFn,
    x: np.ndarray,
    t: int,
    analytic: Optional[StateFn] = None,
    fd_step: float = 1e-6,
) -> np.ndarray:
    """Jacobian of ``func`` at ``x``, analytic if available.

    The finite-difference path uses central differences column by column,
    which is exact up to rounding for affine functions.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if analytic is not None:
        jac = np.atleast_2d(np.asarray(analytic(x, t), dtype=float))
    else:
        cols = []
        for i in range(x.size):
            step = np.zeros_like(x)
            step[i] = fd_step
            hi = np.asarray(func(x + step, t), dtype=float).reshape(-1)
            lo = np.asarray(func(x - step, t), dtype=float).reshape(-1)
            cols.append((hi - lo) / (2.0 * fd_step))
        jac = np.column_stack(cols)
    if not np.isfinite(jac).all():
        raise FloatingPointError(f"non-finite Jacobian at x={x}")
    return jac


def ukf_weights(
    dim: int, alpha: float, beta: float, kappa: Optional[float] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance weights of the scaled unscented transform.

    Returns (w_mean, w_cov), each of length 2*dim + 1 with the center
    point first.  The mean weights sum to one; the covariance weights sum
    to ``1 + (1 - alpha^2 + beta)``.
    """
    if kappa is None:
        kappa = 3.0 - dim
    lam = alpha**2 * (dim + kappa) - dim
    if dim + lam <= 0.0:
        raise ValueError(
            f"invalid unscented scaling: dim + lambda = {dim + lam:.3g} must be positive"
        )
    w_mean = np.full(2 * dim + 1, 1.0 / (2.0 * (dim + lam)))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (dim + lam)
    w_cov[0] = lam / (dim + lam) + (1.0 - alpha**2 + beta)
    return w_mean, w_cov


def _mapped_points(
    func: StateFn, points: np.ndarray, t: int, dim_out: int
) -> np.ndarray:
    outputs = evaluate_batch(func, points, t, dim_out)
    bad = ~np.isfinite(outputs).all(axis=1)
    if bad.any():
        raise FloatingPointError(
            f"non-finite function output at point {int(np.flatnonzero(bad)[0])}"
        )
    return outputs


def _linearized_joint(
    config: MomentBackendConfig,
    belief: GaussianBelief,
    func: StateFn,
    noise_cov: np.ndarray,
    t: int,
    jacobian: Optional[StateFn],
) -> JointGaussian:
    dim_out = noise_cov.shape[0]
    jac = ekf_jacobian(func, belief.mean, t, analytic=jacobian, fd_step=config.ekf_fd_step)
    if jac.shape != (dim_out, belief.dim):
        raise ValueError(
            f"Jacobian has shape {jac.shape}, expected {(dim_out, belief.dim)}"
        )
    mean_b = _mapped_points(func, belief.mean[None, :], t, dim_out)[0]
    cov_bb = symmetrize(jac @ belief.cov @ jac.T + noise_cov)
    cov_ab = belief.cov @ jac.T
    return JointGaussian(belief.mean, mean_b, belief.cov, cov_bb, cov_ab)


def _sigma_point_joint(
    belief: GaussianBelief,
    func: StateFn,
    noise_cov: np.ndarray,
    t: int,
    spread: float,
    w_mean: np.ndarray,
    w_cov: np.ndarray,
    with_center: bool,
) -> JointGaussian:
    dim_out = noise_cov.shape[0]
    factor = safe_cholesky(belief.cov)
    offsets = spread * factor.T  # row i is the i-th scaled Cholesky column
    plus = belief.mean + offsets
    minus = belief.mean - offsets
    if with_center:
        points = np.vstack([belief.mean[None, :], plus, minus])
    else:
        points = np.vstack([plus, minus])
    outputs = _mapped_points(func, points, t, dim_out)
    mean_b = w_mean @ outputs
    dev_in = points - belief.mean
    dev_out = outputs - mean_b
    cov_bb = symmetrize((dev_out.T * w_cov) @ dev_out + noise_cov)
    cov_ab = (dev_in.T * w_cov) @ dev_out
    return JointGaussian(belief.mean, mean_b, belief.cov, cov_bb, cov_ab)


def propagate_joint(
    backend: MomentBackendConfig,
    input_belief: GaussianBelief,
    func: StateFn,
    noise_cov,
    t: int,
    jacobian: Optional[StateFn] = None,
) -> JointGaussian:
    """Gaussian joint over (input, func(input) + noise) under ``backend``.

    Parameters
    ----------
    backend : MomentBackendConfig
    input_belief : GaussianBelief
    func : callable
        Model function evaluated as ``func(x, t)``.
    noise_cov : array_like
        Covariance of the additive noise on the output block.
    t : int
        Time index forwarded to ``func``.
    jacobian : callable, optional
        Analytic Jacobian for the linear and ekf backends; ignored by the
        sigma-point backends.
    """
    noise = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    if noise.shape[0] != noise.shape[1]:
        raise ValueError(f"noise_cov must be square, got shape {noise.shape}")
    if backend.kind in ("linear", "ekf"):
        return _linearized_joint(backend, input_belief, func, noise, t, jacobian)
    dim = input_belief.dim
    if backend.kind == "ukf":
        w_mean, w_cov = ukf_weights(
            dim, backend.ukf_alpha, backend.ukf_beta, backend.ukf_kappa
        )
        kappa = backend.ukf_kappa if backend.ukf_kappa is not None else 3.0 - dim
        lam = backend.ukf_alpha**2 * (dim + kappa) - dim
        return _sigma_point_joint(
            input_belief, func, noise, t, np.sqrt(dim + lam), w_mean, w_cov, True
        )
    # ckf: 2*dim equally weighted points at mean +/- sqrt(dim) * Cholesky columns
    weights = np.full(2 * dim, 1.0 / (2.0 * dim))
    return _sigma_point_joint(
        input_belief, func, noise, t, np.sqrt(dim), weights, weights, False
    )


class DeterministicMoments:
    """Adapts a :class:`MomentBackendConfig` to the filter's joint source
    interface (see :func:`estim.estimator.run_filter`)."""

    def __init__(self, config: MomentBackendConfig):
        self.config = config

    def joint(
        self,
        belief: GaussianBelief,
        func: StateFn,
        noise_cov,
        t: int,
        kind: str = "transition",
        jacobian: Optional[StateFn] = None,
    ) -> JointGaussian:
        return propagate_joint(self.config, belief, func, noise_cov, t, jacobian=jacobian)
