"""Walk through the noise schedule and the forward/reverse kernels.

Builds the default scaled-linear schedule, shows its endpoints, corrupts
a synthetic frame to a few steps, and inverts the corruption exactly
with one deterministic reverse step.
"""

import numpy as np

from vidpaint.corpus import SyntheticSpec, generate_video
from vidpaint.schedule import (build_schedule, forward_sample, reverse_step,
                               schedule_csv, select_timesteps)

schedule = build_schedule()
print(f"schedule: {schedule.steps} steps, beta_1={float(schedule.betas[0])}, "
      f"beta_T={float(schedule.betas[-1])}")
print(f"alpha_bar: 1 -> {schedule.alpha_bar(1):.6f} ... "
      f"{schedule.alpha_bar(1000):.6f}")

with open("schedule.csv", "w") as f:
    f.write(schedule_csv(schedule))
print("wrote schedule.csv (t, beta, alpha_bar)")

video = generate_video(SyntheticSpec(), 0)
x0 = video.frames[0]
rng = np.random.default_rng(0)
eps = rng.standard_normal(x0.shape, dtype=np.float32)

print("\ncorruption levels (signal fraction = sqrt(alpha_bar)):")
for t in (1, 250, 500, 1000):
    xt = forward_sample(x0, t, eps, schedule)
    print(f"  t={t:4d}  signal {np.sqrt(schedule.alpha_bar(t)):.3f}  "
          f"frame range [{xt.min():+.2f}, {xt.max():+.2f}]")

t = 800
xt = forward_sample(x0, t, eps, schedule)
back = reverse_step(xt, eps, t, 0, schedule)
print(f"\none exact reverse step from t={t}: "
      f"max |x0_hat - x0| = {np.abs(back - x0).max():.2e}")

ts = select_timesteps(1000, 50)
print(f"\n50-step sampling subsequence: {ts[:4].tolist()} ... {ts[-3:].tolist()}")
