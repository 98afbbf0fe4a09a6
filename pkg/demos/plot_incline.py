"""
Sliding down an incline
=======================

A frictionless cube accelerates at g sin(theta). The pixel scale comes
from the cube's apparent size, so no camera calibration is needed.
"""

from gravlab import simulate_scene
from gravlab.metrics import incline_expected, incline_measured
from gravlab.scene import generate_scenes

for scene in generate_scenes(6, "incline", 0):
    (traj,) = simulate_scene(scene)
    theta = scene.incline_angle_deg
    a = incline_measured(traj, scene)
    print(f"theta {theta:5.1f}  expected {incline_expected(9.81, theta):.4f}  measured {a:.4f}")
