"""
Filtering and smoothing a scalar linear system, step by step
============================================================

The whole pipeline is driven by two joint Gaussians per time step: the
joint over consecutive states under the transition, and the joint over
state and measurement.  On a linear system both joints are available in
closed form, so this walkthrough shows the machinery with nothing
approximate in the way.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from estim import (
    DeterministicMoments,
    MomentBackendConfig,
    linear_benchmark_model,
    rts_smooth,
    run_filter,
    simulate,
)

# The benchmark system: a random walk observed through gain -2,
#   x_t = x_{t-1} + w,  w ~ N(0, 1)
#   z_t = -2 x_t + v,   v ~ N(0, 10)
# with prior x_0 ~ N(0, 5).
model = linear_benchmark_model()
moments = DeterministicMoments(MomentBackendConfig("linear"))

# Look at the two joints of the first step before running anything.
state_joint = moments.joint(model.prior, model.transition, model.Q, 1,
                            kind="transition", jacobian=model.jacobian_f)
print("state joint of step 1:")
print(f"  predicted mean {state_joint.mean_b[0]:+.3f}, "
      f"variance {state_joint.cov_bb[0, 0]:.3f}, "
      f"cross covariance {state_joint.cov_ab[0, 0]:.3f}")
meas_joint = moments.joint(state_joint.marginal_b(), model.measurement,
                           model.R, 1, kind="measurement",
                           jacobian=model.jacobian_g)
print("measurement joint of step 1:")
print(f"  predicted measurement {meas_joint.mean_b[0]:+.3f}, "
      f"variance {meas_joint.cov_bb[0, 0]:.3f}, "
      f"cross covariance {meas_joint.cov_ab[0, 0]:.3f}")

# Simulate one trajectory and run the filter and the smoother.  The
# smoother reuses moments stored on the forward pass; it never sees the
# model again.
trajectory = simulate(model, horizon=50, seed=11)
result = rts_smooth(run_filter(model, trajectory.measurements, moments))

truth = trajectory.states[:, 0]
filt_mean = np.array([b.mean[0] for b in result.filtered])
filt_sd = np.sqrt([b.cov[0, 0] for b in result.filtered])
smooth_mean = np.array([b.mean[0] for b in result.smoothed])
smooth_sd = np.sqrt([b.cov[0, 0] for b in result.smoothed])

rmse_f = np.sqrt(np.mean((truth - filt_mean) ** 2))
rmse_s = np.sqrt(np.mean((truth - smooth_mean) ** 2))
print(f"filter rmse {rmse_f:.3f}, smoother rmse {rmse_s:.3f}")
print(f"average filter sd {filt_sd.mean():.3f}, "
      f"average smoother sd {smooth_sd.mean():.3f}")

# Plot truth against both belief sequences with 95% bands.
t = np.arange(truth.size)
fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
for ax, mean, sd, label in (
    (axes[0], filt_mean, filt_sd, "filtered"),
    (axes[1], smooth_mean, smooth_sd, "smoothed"),
):
    ax.fill_between(t, mean - 2 * sd, mean + 2 * sd, alpha=0.3,
                    label=f"{label} 95% band")
    ax.plot(t, mean, label=f"{label} mean")
    ax.plot(t, truth, "k--", lw=1, label="truth")
    ax.set_ylabel("x")
    ax.legend(loc="upper right", fontsize=8)
axes[1].set_xlabel("t")
fig.tight_layout()
fig.savefig("linear_walkthrough.png", dpi=120)
print("wrote linear_walkthrough.png")
