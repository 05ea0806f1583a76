"""Numerically safe operations on covariance matrices.

Covariances are kept symmetric by construction and factorized through a
jittered Cholesky so that downstream code never forms an explicit inverse.
"""

import logging

import numpy as np
from scipy.linalg import solve_triangular

log = logging.getLogger(__name__)

# Jitter schedule for near-singular factorizations: start at zero, then
# escalate 1e-10 -> 1e-9 -> ... up to 1e-4 before giving up.
JITTER_INITIAL = 1e-10
JITTER_GROWTH = 10.0
JITTER_MAX = 1e-4

# Eigenvalues below this fraction of the largest one are treated as zero
# on the pseudo-inverse fallback path.
EIG_CLIP = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a matrix cannot be factorized even after jitter escalation."""


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric part (a + a.T) / 2."""
    return 0.5 * (a + a.T)


def safe_cholesky_with_jitter(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``cov``, adding diagonal jitter if needed.

    Parameters
    ----------
    cov : (d, d) array
        Symmetric positive (semi)definite matrix.

    Returns
    -------
    factor : (d, d) array
        Lower-triangular L with L @ L.T == cov + eps * I.
    eps : float
        The jitter that was required; 0.0 for a cleanly factorizable input.

    Raises
    ------
    NotPositiveDefiniteError
        If factorization still fails at the largest jitter in the schedule.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {cov.shape}")
    eye = np.eye(cov.shape[0])
    eps = 0.0
    while True:
        try:
            factor = np.linalg.cholesky(cov if eps == 0.0 else cov + eps * eye)
        except np.linalg.LinAlgError:
            eps = JITTER_INITIAL if eps == 0.0 else eps * JITTER_GROWTH
            if eps > JITTER_MAX:
                raise NotPositiveDefiniteError(
                    f"matrix not positive definite at jitter {JITTER_MAX:.0e}"
                ) from None
            continue
        if eps > 0.0:
            log.debug("cholesky required jitter %.1e", eps)
        return factor, eps


def safe_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``cov`` (see :func:`safe_cholesky_with_jitter`)."""
    return safe_cholesky_with_jitter(cov)[0]


def solve_psd(cov: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``cov @ x = rhs`` for a symmetric PSD ``cov``.

    Uses the jittered Cholesky factorization; if that fails the system is
    solved through a symmetric eigendecomposition with small eigenvalues
    clamped to zero, i.e. a pseudo-inverse solution.
    """
    rhs = np.asarray(rhs, dtype=float)
    try:
        factor, _ = safe_cholesky_with_jitter(cov)
    except NotPositiveDefiniteError:
        return _pinv_solve(cov, rhs)
    half = solve_triangular(factor, rhs, lower=True, check_finite=False)
    return solve_triangular(factor.T, half, lower=False, check_finite=False)


def _pinv_solve(cov: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(symmetrize(np.asarray(cov, dtype=float)))
    cut = EIG_CLIP * max(eigvals.max(), 0.0)
    inv = np.where(eigvals > cut, 1.0 / np.where(eigvals > cut, eigvals, 1.0), 0.0)
    return (eigvecs * inv) @ (eigvecs.T @ rhs)


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """A square root A with A @ A.T == cov, tolerating singular input.

    Built from the symmetric eigendecomposition with negative rounding
    noise clipped to zero, so exactly singular covariances (including the
    zero matrix) are handled without jitter.
    """
    eigvals, eigvecs = np.linalg.eigh(symmetrize(np.asarray(cov, dtype=float)))
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
