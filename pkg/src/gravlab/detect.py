"""Impact detection and distance-crossing times.

An impact is the first frame at which the ball bottom is within one ball
radius of the ground row *and* the frame-to-frame vertical speed has dropped
below ``velocity_epsilon_px_per_frame``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import BallNotFalling, DistanceNeverReached, NoImpact, TooFewSamples
from .scene import GroundLine
from .simulate import PixelTrajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionConfig:
    velocity_epsilon_px_per_frame: float = 1.0
    radius_margin_multiplier: float = 1.0
    min_samples: int = 2
    subframe_refinement: bool = True

    def __post_init__(self):
        if not self.velocity_epsilon_px_per_frame > 0:
            raise ValueError("velocity epsilon must be > 0")
        if not self.radius_margin_multiplier >= 0:
            raise ValueError("radius margin multiplier must be >= 0")
        if self.min_samples < 2:
            raise ValueError("min_samples must be >= 2")

    @classmethod
    def frame_resolution(cls, **kw) -> "DetectionConfig":
        """Frame-resolution impact times, no sub-frame refinement."""
        return cls(subframe_refinement=False, **kw)

    def with_epsilon(self, eps: float) -> "DetectionConfig":
        return replace(self, velocity_epsilon_px_per_frame=eps)


@dataclass(frozen=True)
class ImpactEvent:
    ball_id: str
    impact_time_s: float
    crossing_frame: int
    velocity_at_crossing_px_per_frame: float
    fallen_distance_px: float
    detection_frame: int
    warnings: tuple[str, ...] = ()


def _prepared(traj: PixelTrajectory, config: DetectionConfig):
    track, split = traj.visible_prefix()
    warnings = ()
    if split:
        warnings = (f"{traj.ball_id}: track split by invisible samples; using the first visible run",)
        log.warning(warnings[0])
    if len(track) < max(config.min_samples, 2):
        raise TooFewSamples(
            f"need at least {max(config.min_samples, 2)} visible samples, got {len(track)}",
            ball_id=traj.ball_id,
        )
    return track, warnings


def _refine(frames: np.ndarray, dist: np.ndarray, k: int, level: float) -> float:
    """Sub-frame instant (in frames) at which ``dist`` reaches ``level`` inside (k-1, k].

    The crossing is extrapolated from the samples *before* k, so a resting
    sample at k (ball already on the ground) does not pull the estimate onto
    the frame grid. With three prior samples a local parabola is used (exact
    for constant acceleration); with fewer, the last step velocity.
    """
    lo, hi = float(frames[k - 1]), float(frames[k])
    remaining = level - dist[k - 1]
    if remaining <= 0:
        return lo
    est = None
    if k >= 3:
        tau = frames[k - 3 : k].astype(float) - lo
        a, b, c = np.polyfit(tau, dist[k - 3 : k], 2)
        c = c - level
        if abs(a) > 1e-12:
            disc = b * b - 4 * a * c
            if disc >= 0:
                sq = np.sqrt(disc)
                roots = sorted(r for r in ((-b + sq) / (2 * a), (-b - sq) / (2 * a)) if r >= -1e-9)
                if roots:
                    est = lo + roots[0]
        elif b > 0:
            est = lo - c / b
    if est is None and k >= 2:
        step = (dist[k - 1] - dist[k - 2]) / (frames[k - 1] - frames[k - 2])
        if step > 0:
            est = lo + remaining / step
    if est is None:
        # chord between the two bracketing samples
        est = lo + remaining / (dist[k] - dist[k - 1]) * (hi - lo)
    return float(min(max(est, lo), hi))


def detect_impact(
    traj: PixelTrajectory, ground: GroundLine, config: DetectionConfig = DetectionConfig()
) -> ImpactEvent:
    track, warnings = _prepared(traj, config)
    f = track.frames
    y = track.cy
    r = track.radius
    eps = config.velocity_epsilon_px_per_frame
    thresh = ground.y_ground_px - config.radius_margin_multiplier * r
    near_ground = y + r >= thresh
    vel = np.full(len(y), np.nan)
    vel[1:] = np.diff(y) / np.diff(f)
    hits = np.flatnonzero(near_ground[1:] & (vel[1:] < eps)) + 1
    if len(hits) == 0:
        raise NoImpact(
            "ball never came to rest within one radius of the ground", ball_id=traj.ball_id
        )
    k = int(hits[0])
    # speed at k is the motion over [k-1, k]: if the ball was already in the
    # ground band at k-1 it came to rest there
    c = k - 1 if near_ground[k - 1] else k
    dist = y - y[0]
    fallen = float(dist[c])
    if fallen < 2 * r[c]:
        raise BallNotFalling(
            f"net vertical displacement {fallen:.3g} px is below two radii", ball_id=traj.ball_id
        )
    if config.subframe_refinement and c >= 1:
        t_frames = _refine(f, dist, c, fallen)
    else:
        t_frames = float(f[c])
    return ImpactEvent(
        ball_id=traj.ball_id,
        impact_time_s=t_frames / track.fps,
        crossing_frame=int(f[c]),
        velocity_at_crossing_px_per_frame=float(vel[k]),
        fallen_distance_px=fallen,
        detection_frame=int(f[k]),
        warnings=warnings,
    )


def time_to_traverse(
    traj: PixelTrajectory, distance_px: float, config: DetectionConfig = DetectionConfig()
) -> float:
    """First time (s) at which the fallen pixel distance reaches ``distance_px``."""
    if distance_px < 0:
        raise ValueError("distance_px must be >= 0")
    track, _ = _prepared(traj, config)
    f = track.frames
    dist = track.cy - track.cy[0]
    reached = np.flatnonzero(dist >= distance_px)
    if len(reached) == 0:
        raise DistanceNeverReached(
            f"fell at most {dist.max():.3g} px, never {distance_px:.3g} px", ball_id=traj.ball_id
        )
    k = int(reached[0])
    if k == 0:
        return float(f[0]) / track.fps
    if config.subframe_refinement:
        return _refine(f, dist, k, distance_px) / track.fps
    return float(f[k]) / track.fps
