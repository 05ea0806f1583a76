"""Gibbs-sampling moment backend.

Instead of linearizing or using fixed quadrature points, this backend
draws samples from the input belief, pushes them through the model
function, and infers the joint mean and covariance by Gibbs sampling
under conditionally conjugate priors: Gaussian on the mean, inverse
Wishart on the covariance.  The returned moments are posterior averages
over the post-burn-in sweeps, not the raw sample moments of the data.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .gaussians import GaussianBelief, JointGaussian
from .linalg import (
    NotPositiveDefiniteError,
    psd_sqrt,
    safe_cholesky,
    solve_psd,
    symmetrize,
)
from .models import StateFn, evaluate_batch

log = logging.getLogger(__name__)

# Scale on the diagonal sample covariance used for the weak prior on the
# mean, and the floor keeping that prior proper for degenerate columns.
MEAN_PRIOR_SCALE = 1e3
VARIANCE_FLOOR = 1e-12

_KIND_CODES = {"transition": 0, "measurement": 1}


@dataclass(frozen=True)
class GibbsConfig:
    """Sampler settings: N data samples, L sweeps, B burn-in sweeps."""

    n_samples: int = 1000
    n_iters: int = 200
    burn_in: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.n_iters < 1:
            raise ValueError("n_iters must be at least 1")
        if not 0 <= self.burn_in < self.n_iters:
            raise ValueError(
                f"burn_in must lie in [0, n_iters), got {self.burn_in} with "
                f"n_iters={self.n_iters}"
            )
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class NiwHyperParams:
    """Hyper-parameters of the semi-conjugate prior.

    The mean has prior N(m, S); the covariance has prior IW(Psi, nu).
    ``nu > dim + 1`` so the prior covariance has a finite expectation.
    """

    m: np.ndarray
    S: np.ndarray
    Psi: np.ndarray
    nu: float

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(-1)
        s = np.atleast_2d(np.asarray(self.S, dtype=float))
        psi = np.atleast_2d(np.asarray(self.Psi, dtype=float))
        dim = m.size
        if s.shape != (dim, dim) or psi.shape != (dim, dim):
            raise ValueError("S and Psi must be square matrices matching m")
        for name, mat in (("S", s), ("Psi", psi)):
            if np.abs(mat - mat.T).max() > 1e-9 * max(np.abs(mat).max(), 1.0):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(mat)[0] <= 0.0:
                raise ValueError(f"{name} must be positive definite")
        if self.nu <= dim + 1:
            raise ValueError(f"nu must exceed dim + 1 = {dim + 1}, got {self.nu}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "S", symmetrize(s))
        object.__setattr__(self, "Psi", symmetrize(psi))

    @property
    def dim(self) -> int:
        return self.m.size


def default_prior(data: np.ndarray) -> NiwHyperParams:
    """Weak data-centered prior: the mean prior sits at the sample mean
    with a covariance three orders of magnitude wider than the sample
    variances; the covariance prior is IW(I, dim + 2)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, dim = data.shape
    if n < 2:
        raise ValueError("need at least two rows to center the prior")
    center = data.mean(axis=0)
    centered = data - center
    sample_cov = centered.T @ centered / (n - 1)
    spread = MEAN_PRIOR_SCALE * np.diag(np.maximum(np.diag(sample_cov), VARIANCE_FLOOR))
    return NiwHyperParams(m=center, S=spread, Psi=np.eye(dim), nu=dim + 2.0)


def sample_inverse_wishart(Psi, nu: float, rng: np.random.Generator) -> np.ndarray:
    """Draw from the inverse-Wishart distribution IW(Psi, nu).

    Uses the Bartlett decomposition of the Wishart on the inverted scale:
    with Psi = L L.T and A the Bartlett lower triangle, the draw is
    (L A^{-T}) (L A^{-T}).T, computed with triangular solves only.
    """
    psi = np.atleast_2d(np.asarray(Psi, dtype=float))
    dim = psi.shape[0]
    if nu <= dim - 1:
        raise ValueError(f"nu must exceed dim - 1 = {dim - 1}, got {nu}")
    scale_factor = safe_cholesky(psi)
    bartlett = np.zeros((dim, dim))
    bartlett[np.diag_indices(dim)] = np.sqrt(rng.chisquare(nu - np.arange(dim)))
    lower = np.tril_indices(dim, -1)
    if lower[0].size:
        bartlett[lower] = rng.standard_normal(lower[0].size)
    half = solve_triangular(bartlett, scale_factor.T, lower=True, check_finite=False)
    return symmetrize(half.T @ half)


def mean_posterior_params(
    X: np.ndarray, Sigma, prior: NiwHyperParams
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (m_n, S_n) of the mean given data and a known covariance:

        S_n = (S^{-1} + N Sigma^{-1})^{-1}
        m_n = S_n (S^{-1} m + N Sigma^{-1} xbar)
    """
    data = np.atleast_2d(np.asarray(X, dtype=float))
    n = data.shape[0]
    xbar = data.mean(axis=0) if n else np.zeros(prior.dim)
    precision, shift = _mean_posterior_natural(n, xbar, np.asarray(Sigma, float), prior)
    eye = np.eye(prior.dim)
    s_n = solve_psd(precision, eye)
    return s_n @ shift, symmetrize(s_n)


def _mean_posterior_natural(
    n: int, xbar: np.ndarray, Sigma: np.ndarray, prior: NiwHyperParams
) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(prior.dim)
    prior_precision = solve_psd(prior.S, eye)
    precision = prior_precision.copy()
    shift = prior_precision @ prior.m
    if n:
        data_precision = solve_psd(np.atleast_2d(Sigma), eye)
        precision += n * data_precision
        shift = shift + n * (data_precision @ xbar)
    return symmetrize(precision), shift


def _draw_mean(
    precision: np.ndarray, shift: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    factor = safe_cholesky(precision)
    half = solve_triangular(factor, shift, lower=True, check_finite=False)
    center = solve_triangular(factor.T, half, lower=False, check_finite=False)
    noise = solve_triangular(
        factor.T, rng.standard_normal(shift.size), lower=False, check_finite=False
    )
    return center + noise


def update_mean_conditional(
    X: np.ndarray, Sigma, prior: NiwHyperParams, rng: np.random.Generator
) -> np.ndarray:
    """Draw the mean from its conditional posterior given data and covariance.

    With no data rows this is a draw from the prior N(m, S).
    """
    data = np.atleast_2d(np.asarray(X, dtype=float)) if np.size(X) else np.empty((0, prior.dim))
    n = data.shape[0]
    xbar = data.mean(axis=0) if n else np.zeros(prior.dim)
    precision, shift = _mean_posterior_natural(
        n, xbar, np.atleast_2d(np.asarray(Sigma, dtype=float)), prior
    )
    return _draw_mean(precision, shift, rng)


def cov_posterior_params(
    X: np.ndarray, mu, prior: NiwHyperParams
) -> tuple[np.ndarray, float]:
    """Posterior (Psi_n, nu_n) of the covariance given data and a known mean:

        Psi_n = Psi + sum_i (x_i - mu)(x_i - mu)^T,   nu_n = nu + N
    """
    data = np.atleast_2d(np.asarray(X, dtype=float)) if np.size(X) else np.empty((0, prior.dim))
    mu = np.asarray(mu, dtype=float).reshape(-1)
    centered = data - mu
    scatter = centered.T @ centered if data.shape[0] else np.zeros((prior.dim, prior.dim))
    return symmetrize(prior.Psi + scatter), prior.nu + data.shape[0]


def update_cov_conditional(
    X: np.ndarray, mu, prior: NiwHyperParams, rng: np.random.Generator
) -> np.ndarray:
    """Draw the covariance from its conditional posterior given data and mean.

    With no data rows this is a draw from the prior IW(Psi, nu).
    """
    psi_n, nu_n = cov_posterior_params(X, mu, prior)
    return sample_inverse_wishart(psi_n, nu_n, rng)


def _noise_factor(noise_cov) -> np.ndarray:
    """Cholesky factor of the noise covariance for data generation.

    The noise must be strictly positive definite; a borderline PSD matrix
    gets a relative jitter of 1e-12 times its largest diagonal entry, so
    an exactly zero covariance is rejected rather than silently inflated.
    """
    noise = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    if noise.shape[0] != noise.shape[1]:
        raise ValueError(f"noise_cov must be square, got shape {noise.shape}")
    try:
        return np.linalg.cholesky(noise)
    except np.linalg.LinAlgError:
        pass
    eps = VARIANCE_FLOOR * float(np.max(np.diag(noise), initial=0.0))
    if eps > 0.0:
        try:
            return np.linalg.cholesky(noise + eps * np.eye(noise.shape[0]))
        except np.linalg.LinAlgError:
            pass
    raise ValueError(
        "noise_cov must be positive definite to generate sample noise"
    )


def gibbs_joint_moments(
    input_belief: GaussianBelief,
    func: StateFn,
    noise_cov,
    t: int,
    config: GibbsConfig,
    rng: np.random.Generator,
) -> JointGaussian:
    """Infer the joint Gaussian over (input, func(input) + noise) by Gibbs
    sampling.

    Draws ``config.n_samples`` rows (x_i, func(x_i, t) + v_i), places the
    semi-conjugate prior of :func:`default_prior` on the joint mean and
    covariance, and alternates the two conditional draws for
    ``config.n_iters`` sweeps.  The estimate averages the sampled mean and
    covariance over the post-burn-in window; the same configuration and
    generator state reproduce the result bit for bit.
    """
    noise_factor = _noise_factor(noise_cov)
    dim_in = input_belief.dim
    dim_out = noise_factor.shape[0]
    dim = dim_in + dim_out
    if config.n_samples < dim + 2:
        raise ValueError(
            f"n_samples={config.n_samples} too small for joint dimension {dim}; "
            f"need at least {dim + 2}"
        )

    inputs = input_belief.mean + rng.standard_normal(
        (config.n_samples, dim_in)
    ) @ psd_sqrt(input_belief.cov).T
    outputs = evaluate_batch(func, inputs, t, dim_out) + rng.standard_normal(
        (config.n_samples, dim_out)
    ) @ noise_factor.T
    data = np.hstack([inputs, outputs])
    if not np.isfinite(data).all():
        raise FloatingPointError("non-finite sample produced by the model function")

    prior = default_prior(data)
    n = config.n_samples
    xbar = data.mean(axis=0)
    # Sufficient statistics make each sweep O(dim^2) regardless of N.
    row_sum = data.sum(axis=0)
    gram = data.T @ data

    mean_sample = _draw_mean(*_mean_posterior_natural(0, xbar, prior.S, prior), rng)
    cov_sample = sample_inverse_wishart(prior.Psi, prior.nu, rng)

    # Chain position p holds the p-th draw (position 0 is the prior draw);
    # the estimate averages positions burn_in .. n_iters-1, which always
    # leaves at least one sweep in the window.
    mean_acc = np.zeros(dim)
    cov_acc = np.zeros((dim, dim))
    kept = 0
    if config.burn_in == 0:
        mean_acc += mean_sample
        cov_acc += cov_sample
        kept = 1
    for sweep in range(1, config.n_iters + 1):
        try:
            precision, shift = _mean_posterior_natural(n, xbar, cov_sample, prior)
            mean_sample = _draw_mean(precision, shift, rng)
            scatter = (
                gram
                - np.outer(row_sum, mean_sample)
                - np.outer(mean_sample, row_sum)
                + n * np.outer(mean_sample, mean_sample)
            )
            cov_sample = sample_inverse_wishart(
                symmetrize(prior.Psi + scatter), prior.nu + n, rng
            )
        except (NotPositiveDefiniteError, np.linalg.LinAlgError) as err:
            raise NotPositiveDefiniteError(f"Gibbs sweep {sweep}: {err}") from err
        if config.burn_in <= sweep <= config.n_iters - 1:
            mean_acc += mean_sample
            cov_acc += cov_sample
            kept += 1
    mean_est = mean_acc / kept
    cov_est = symmetrize(cov_acc / kept)

    return JointGaussian(
        mean_a=mean_est[:dim_in],
        mean_b=mean_est[dim_in:],
        cov_aa=cov_est[:dim_in, :dim_in],
        cov_bb=cov_est[dim_in:, dim_in:],
        cov_ab=cov_est[:dim_in, dim_in:],
    )


class GibbsMoments:
    """Stochastic joint source for the filter.

    Every call derives an independent generator from (seed, run index,
    time index, joint kind), which makes a full filtering pass
    reproducible and keeps parallel runs decorrelated.  For measurement
    joints the inferred input-block marginal is compared against the
    belief that was passed in; the relative gap is recorded per step in
    ``marginal_gaps`` as a consistency diagnostic.
    """

    def __init__(self, config: GibbsConfig = GibbsConfig(), run_index: int = 0):
        self.config = config
        self.run_index = run_index
        self.marginal_gaps: list[float] = []

    def joint(
        self,
        belief: GaussianBelief,
        func: StateFn,
        noise_cov,
        t: int,
        kind: str = "transition",
        jacobian: Optional[StateFn] = None,
    ) -> JointGaussian:
        rng = np.random.default_rng(
            np.random.SeedSequence(
                (int(self.config.seed), int(self.run_index), int(t), _KIND_CODES.get(kind, 2))
            )
        )
        joint = gibbs_joint_moments(belief, func, noise_cov, t, self.config, rng)
        if kind == "measurement":
            gap = _marginal_gap(belief, joint)
            self.marginal_gaps.append(gap)
            log.debug("step %d marginal consistency gap %.3e", t, gap)
        return joint


def _marginal_gap(belief: GaussianBelief, joint: JointGaussian) -> float:
    """Largest elementwise difference between the input belief and the
    inferred input-block marginal, relative to the belief's scale."""
    scale = max(
        1.0, float(np.abs(belief.mean).max()), float(np.abs(belief.cov).max())
    )
    mean_gap = float(np.abs(joint.mean_a - belief.mean).max())
    cov_gap = float(np.abs(joint.cov_aa - belief.cov).max())
    return max(mean_gap, cov_gap) / scale
