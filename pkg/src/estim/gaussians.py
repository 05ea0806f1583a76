"""Gaussian beliefs, two-block joint Gaussians, and the operations on them.

A filter step never needs more than a joint Gaussian over two blocks of
variables: conditioning the joint on an observed block gives the update,
reading off a marginal gives the prediction.  Both types are immutable;
covariances are symmetrized on construction and validated to be positive
semidefinite within a small tolerance.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .linalg import safe_cholesky, symmetrize

LOG_2PI = np.log(2.0 * np.pi)

# Construction-time validation tolerances: relative asymmetry of the raw
# input, and how far below zero the smallest eigenvalue may sit.
SYMMETRY_RTOL = 1e-9
PSD_RTOL = 1e-8


def _as_vector(name: str, value) -> np.ndarray:
    vec = np.array(value, dtype=float, copy=True).reshape(-1)
    if vec.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.isfinite(vec).all():
        raise ValueError(f"{name} contains non-finite entries")
    return vec


def _as_covariance(name: str, value, dim: int) -> np.ndarray:
    cov = np.atleast_2d(np.array(value, dtype=float, copy=True))
    if cov.shape != (dim, dim):
        raise ValueError(f"{name} must have shape {(dim, dim)}, got {cov.shape}")
    if not np.isfinite(cov).all():
        raise ValueError(f"{name} contains non-finite entries")
    scale = max(float(np.abs(cov).max()), 1.0)
    if float(np.abs(cov - cov.T).max()) > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return symmetrize(cov)


def _check_psd(name: str, cov: np.ndarray) -> None:
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] < -PSD_RTOL * max(eigvals[-1], 0.0):
        raise ValueError(
            f"{name} is not positive semidefinite (min eigenvalue {eigvals[0]:.3e})"
        )


def _freeze(*arrays: np.ndarray) -> None:
    for arr in arrays:
        arr.setflags(write=False)


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """A Gaussian distribution over a single block of variables.

    Parameters
    ----------
    mean : (d,) array_like
    cov : (d, d) array_like
        Symmetric positive semidefinite covariance.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_vector("mean", self.mean)
        cov = _as_covariance("cov", self.cov, mean.size)
        _check_psd("cov", cov)
        _freeze(mean, cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class JointGaussian:
    """A Gaussian over two blocks (a, b) stored in partitioned form.

    The assembled covariance ``[[cov_aa, cov_ab], [cov_ab.T, cov_bb]]``
    must be positive semidefinite, which is checked on construction.
    """

    mean_a: np.ndarray
    mean_b: np.ndarray
    cov_aa: np.ndarray
    cov_bb: np.ndarray
    cov_ab: np.ndarray

    def __post_init__(self):
        mean_a = _as_vector("mean_a", self.mean_a)
        mean_b = _as_vector("mean_b", self.mean_b)
        cov_aa = _as_covariance("cov_aa", self.cov_aa, mean_a.size)
        cov_bb = _as_covariance("cov_bb", self.cov_bb, mean_b.size)
        cov_ab = np.atleast_2d(np.array(self.cov_ab, dtype=float, copy=True))
        if cov_ab.shape != (mean_a.size, mean_b.size):
            raise ValueError(
                f"cov_ab must have shape {(mean_a.size, mean_b.size)}, got {cov_ab.shape}"
            )
        if not np.isfinite(cov_ab).all():
            raise ValueError("cov_ab contains non-finite entries")
        _check_psd("cov_aa", cov_aa)
        _check_psd("cov_bb", cov_bb)
        assembled = np.block([[cov_aa, cov_ab], [cov_ab.T, cov_bb]])
        _check_psd("assembled joint covariance", assembled)
        _freeze(mean_a, mean_b, cov_aa, cov_bb, cov_ab)
        object.__setattr__(self, "mean_a", mean_a)
        object.__setattr__(self, "mean_b", mean_b)
        object.__setattr__(self, "cov_aa", cov_aa)
        object.__setattr__(self, "cov_bb", cov_bb)
        object.__setattr__(self, "cov_ab", cov_ab)

    @property
    def dim_a(self) -> int:
        return self.mean_a.size

    @property
    def dim_b(self) -> int:
        return self.mean_b.size

    def marginal_a(self) -> GaussianBelief:
        return GaussianBelief(self.mean_a, self.cov_aa)

    def marginal_b(self) -> GaussianBelief:
        return GaussianBelief(self.mean_b, self.cov_bb)

    def assembled(self) -> tuple[np.ndarray, np.ndarray]:
        """The joint as one (mean, cov) pair over the stacked blocks."""
        mean = np.concatenate([self.mean_a, self.mean_b])
        cov = np.block([[self.cov_aa, self.cov_ab], [self.cov_ab.T, self.cov_bb]])
        return mean, cov


def condition_joint(joint: JointGaussian, observed_b) -> GaussianBelief:
    """Condition a two-block joint on an observed value of block b.

    Returns the Gaussian over block a with

        mean = mean_a + cov_ab @ cov_bb^{-1} @ (observed_b - mean_b)
        cov  = cov_aa - cov_ab @ cov_bb^{-1} @ cov_ab.T

    computed through the Cholesky factor of ``cov_bb`` so no inverse is
    ever formed explicitly.
    """
    observed = np.asarray(observed_b, dtype=float).reshape(-1)
    if observed.size != joint.dim_b:
        raise ValueError(
            f"observed_b must have dimension {joint.dim_b}, got {observed.size}"
        )
    factor = safe_cholesky(joint.cov_bb)
    # W = L^{-1} cov_ba, so cov_ab cov_bb^{-1} cov_ba == W.T @ W.
    half_cross = solve_triangular(factor, joint.cov_ab.T, lower=True, check_finite=False)
    half_innov = solve_triangular(
        factor, observed - joint.mean_b, lower=True, check_finite=False
    )
    mean = joint.mean_a + half_cross.T @ half_innov
    cov = symmetrize(joint.cov_aa - half_cross.T @ half_cross)
    return GaussianBelief(mean, cov)


def gaussian_log_density(belief: GaussianBelief, x) -> float:
    """Log density of ``belief`` evaluated at the point ``x``."""
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.size != belief.dim:
        raise ValueError(f"x must have dimension {belief.dim}, got {point.size}")
    factor = safe_cholesky(belief.cov)
    dev = solve_triangular(factor, point - belief.mean, lower=True, check_finite=False)
    log_det = 2.0 * np.sum(np.log(np.diag(factor)))
    return float(-0.5 * (belief.dim * LOG_2PI + log_det + dev @ dev))
