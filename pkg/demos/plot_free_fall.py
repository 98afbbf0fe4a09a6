"""
Dropping a ball in front of a pinhole camera
============================================

A basketball falls 4 m in front of a 50 mm camera. We simulate the pixel
track, find the impact and turn the impact time back into gravity.
"""

import math

import numpy as np

from gravlab import DetectionConfig, detect_impact, ground_line, simulate_scene
from gravlab.metrics import effective_gravity
from gravlab.scene import BallSpec, CameraSpec, Protocol, SceneSpec

# camera far enough back that the whole fall fits in the 720 px frame
camera = CameraSpec(distance_m=12.0, height_m=2.0)
scene = SceneSpec("drop", Protocol.SINGLE_BALL, (4.0,), (0.0,), camera, BallSpec())
print("focal length:", round(camera.focal_px, 2), "px")

# %%
# The trajectory is one centroid per frame at 24 fps.
(traj,) = simulate_scene(scene)
print("frames:", len(traj), " first rows:", np.round(traj.cy[:4], 2))

# %%
# Impact is where the ball sits within one radius of the ground row and has
# stopped moving. Frame resolution gives one answer, refinement another.
ground = ground_line(scene)
coarse = detect_impact(traj, ground, DetectionConfig.frame_resolution())
fine = detect_impact(traj, ground)
t_true = math.sqrt(2 * 4.0 / 9.81)
print(f"analytic  t = {t_true:.5f} s")
print(f"frame     t = {coarse.impact_time_s:.5f} s -> g = {effective_gravity(4.0, coarse.impact_time_s):.3f}")
print(f"refined   t = {fine.impact_time_s:.5f} s -> g = {effective_gravity(4.0, fine.impact_time_s):.3f}")
