"""
Two balls, no units
===================

Two balls dropped together from different heights must satisfy
t1^2 / t2^2 = h1 / h2 however the video is scaled. When the upper ball
is given weaker gravity, it lags the lower one over the same distance.
"""

import numpy as np

from gravlab import ground_line, simulate_scene
from gravlab.metrics import ratio_slope, two_ball
from gravlab.scene import generate_scenes
from gravlab.simulate import DegradationSpec

scenes = generate_scenes(50, "two-ball", 0)

results = [two_ball(simulate_scene(s), s.drop_heights_m, ground_line(s)) for s in scenes]
fit = ratio_slope(results)
print(f"correct physics: slope {fit.slope:.4f}, intercept {fit.intercept:+.4f}")
print("mean lag:", np.mean([r.delta_t_frames for r in results]), "frames")

# %%
# Positive lag means the upper ball is slower.
for k in (0.7, 1.4):
    deg = [DegradationSpec.per_object_gravity(9.81, 9.81 * k)]
    lags = [two_ball(simulate_scene(s, deg), s.drop_heights_m, ground_line(s)).delta_t_frames
            for s in scenes]
    print(f"upper ball at {k}g: median lag {np.median(lags):+.2f} frames")
