"""Forward filtering and backward (RTS) smoothing.

The filter is agnostic to how joint moments are produced: it asks a
moment source for two joints per step, the joint over consecutive states
under the transition and the joint over state and measurement, then
conditions the latter on the observed measurement.  A moment source is
any object with a method

    joint(belief, func, noise_cov, t, kind, jacobian=None) -> JointGaussian

where ``kind`` is "transition" or "measurement"; see
:class:`estim.moments.DeterministicMoments` and
:class:`estim.gibbs.GibbsMoments`.

The smoother consumes only moments stored during filtering.  The
smoothing gains are already computed on the forward pass, so the backward
recursion never evaluates the model functions or the moment source.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gaussians import GaussianBelief, condition_joint
from .linalg import solve_psd, symmetrize
from .models import SystemModel


class FilterStepError(RuntimeError):
    """A backend or conditioning failure, annotated with the time step."""


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """Moment sequences produced by a filtering pass over T measurements.

    Attributes
    ----------
    predicted : tuple of GaussianBelief
        One-step-ahead state beliefs; index k holds time k+1.
    filtered : tuple of GaussianBelief
        Posterior state beliefs; index t holds time t, starting at the
        prior for t = 0.
    gains : tuple of ndarray
        Smoothing gains; index k holds the gain coupling times k and k+1.
    predicted_meas : tuple of GaussianBelief
        Predicted measurement beliefs; index k holds time k+1.
    smoothed : tuple of GaussianBelief, optional
        Full-pass beliefs indexed like ``filtered``; present after
        :func:`rts_smooth`.  The final entry is the final filtered belief
        itself, never a recomputation.
    """

    predicted: tuple
    filtered: tuple
    gains: tuple
    predicted_meas: tuple
    smoothed: Optional[tuple] = None

    def __post_init__(self):
        horizon = len(self.filtered) - 1
        if horizon < 0:
            raise ValueError("filtered must contain at least the prior belief")
        for name in ("predicted", "gains", "predicted_meas"):
            if len(getattr(self, name)) != horizon:
                raise ValueError(f"{name} must have length {horizon}")
        if self.smoothed is not None:
            if len(self.smoothed) != horizon + 1:
                raise ValueError(f"smoothed must have length {horizon + 1}")
            last_s, last_f = self.smoothed[-1], self.filtered[-1]
            if not (
                np.array_equal(last_s.mean, last_f.mean)
                and np.array_equal(last_s.cov, last_f.cov)
            ):
                raise ValueError("smoothed must end in the final filtered belief")

    @property
    def horizon(self) -> int:
        return len(self.filtered) - 1


def run_filter(model: SystemModel, measurements, moments) -> EstimationResult:
    """Filter a measurement sequence under ``model`` using a moment source.

    Parameters
    ----------
    model : SystemModel
    measurements : array_like
        Sequence of T measurement vectors; shape (T, dim_z), or (T,) for
        one-dimensional measurements.  T may be zero.
    moments : object
        Joint source as described in the module docstring.

    Returns
    -------
    EstimationResult
        With ``smoothed`` unset.

    Raises
    ------
    FilterStepError
        Wrapping any numerical failure, with the offending time step in
        the message.
    """
    zs = np.asarray(measurements, dtype=float)
    if zs.size == 0:
        zs = zs.reshape(0, model.dim_z)
    elif zs.ndim == 1:
        zs = zs.reshape(-1, 1)
    if zs.shape[1] != model.dim_z:
        raise ValueError(
            f"measurements must have dimension {model.dim_z}, got shape {zs.shape}"
        )

    filtered = [model.prior]
    predicted = []
    gains = []
    predicted_meas = []
    for t in range(1, zs.shape[0] + 1):
        try:
            state_joint = moments.joint(
                filtered[-1],
                model.transition,
                model.Q,
                t,
                kind="transition",
                jacobian=model.jacobian_f,
            )
            pred = state_joint.marginal_b()
            # Smoothing gain: cross covariance times the inverse predicted
            # covariance, solved rather than inverted.
            gains.append(solve_psd(state_joint.cov_bb, state_joint.cov_ab.T).T)
            meas_joint = moments.joint(
                pred,
                model.measurement,
                model.R,
                t,
                kind="measurement",
                jacobian=model.jacobian_g,
            )
            predicted_meas.append(meas_joint.marginal_b())
            filtered.append(condition_joint(meas_joint, zs[t - 1]))
            predicted.append(pred)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as err:
            raise FilterStepError(f"time step {t}: {err}") from err
    return EstimationResult(
        predicted=tuple(predicted),
        filtered=tuple(filtered),
        gains=tuple(gains),
        predicted_meas=tuple(predicted_meas),
    )


def rts_smooth(result: EstimationResult) -> EstimationResult:
    """Run the backward smoothing recursion over a filtering result.

    Starting from the final filtered belief, each step corrects the
    filtered belief with the stored gain:

        mean_s[t-1] = mean_f[t-1] + J (mean_s[t] - mean_p[t])
        cov_s[t-1]  = cov_f[t-1] + J (cov_s[t] - cov_p[t]) J^T

    Returns a new result with ``smoothed`` filled in.
    """
    horizon = result.horizon
    smoothed = [None] * (horizon + 1)
    smoothed[horizon] = result.filtered[horizon]
    for t in range(horizon, 0, -1):
        gain = result.gains[t - 1]
        filt = result.filtered[t - 1]
        pred = result.predicted[t - 1]
        nxt = smoothed[t]
        mean = filt.mean + gain @ (nxt.mean - pred.mean)
        cov = symmetrize(filt.cov + gain @ (nxt.cov - pred.cov) @ gain.T)
        smoothed[t - 1] = GaussianBelief(mean, cov)
    return dataclasses.replace(result, smoothed=tuple(smoothed))
