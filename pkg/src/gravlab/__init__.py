"""gravlab: unit-free gravity measurement for falling-object videos.

Synthesizes ground-truth and degraded pixel trajectories of dropped balls
under a pinhole camera, detects impacts, and computes effective gravity,
time-scaling corrections, the two-ball equal-rate test and incline
acceleration.
"""

__version__ = "0.1.0"

from .detect import DetectionConfig, ImpactEvent, detect_impact, time_to_traverse
from .metrics import (
    GravityEstimate,
    ScalingModel,
    TwoBallResult,
    Variant,
    apply_scaling,
    effective_gravity,
    fit_mts,
    fit_per_sample,
    height_adjusted,
    incline_expected,
    incline_measured,
    pixel_scale,
    ratio_slope,
    two_ball,
)
from .scene import (
    BallSpec,
    CameraSpec,
    GroundLine,
    Protocol,
    SceneSpec,
    default_camera_for,
    generate_scenes,
    ground_line,
    project_point,
    read_manifest,
    write_manifest,
)
from .simulate import (
    DegradationSpec,
    PixelTrajectory,
    fall_time,
    read_trajectories,
    simulate_scene,
    write_trajectories,
)

__all__ = [
    "BallSpec",
    "CameraSpec",
    "DegradationSpec",
    "DetectionConfig",
    "GravityEstimate",
    "GroundLine",
    "ImpactEvent",
    "PixelTrajectory",
    "Protocol",
    "ScalingModel",
    "SceneSpec",
    "TwoBallResult",
    "Variant",
    "apply_scaling",
    "default_camera_for",
    "detect_impact",
    "effective_gravity",
    "fall_time",
    "fit_mts",
    "fit_per_sample",
    "generate_scenes",
    "ground_line",
    "height_adjusted",
    "incline_expected",
    "incline_measured",
    "pixel_scale",
    "project_point",
    "ratio_slope",
    "read_manifest",
    "read_trajectories",
    "simulate_scene",
    "time_to_traverse",
    "two_ball",
    "write_manifest",
    "write_trajectories",
]
