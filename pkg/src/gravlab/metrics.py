"""Gravity estimators: effective gravity, time-scaling corrections, the
two-ball ratio / lag test and incline acceleration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detect import DetectionConfig, ImpactEvent, detect_impact, time_to_traverse
from .errors import (
    CalibrationLeakage,
    DegenerateFit,
    DegenerateTrajectory,
    DetectionError,
    EmptyCalibration,
    MissingSeedGroup,
    NonPositiveRadius,
    NonPositiveTime,
)
from .scene import GroundLine, SceneSpec
from .simulate import PixelTrajectory, fall_time

EARTH_G = 9.81
OUTLIER_THRESHOLD_MPS2 = 50.0
MAX_TILT_DEG = 45.0


class Variant(str, Enum):
    RAW = "Raw"
    MEAN_SCALED = "MeanScaled"
    PER_SAMPLE_SCALED = "PerSampleScaled"
    HEIGHT_ADJUSTED = "HeightAdjusted"


class ScalingKind(str, Enum):
    MEAN = "Mean"
    PER_SAMPLE = "PerSample"
    HEIGHT_ADJUSTED = "HeightAdjusted"


@dataclass(frozen=True)
class GravityEstimate:
    scene_id: str
    seed: int | None
    g_eff_mps2: float
    variant: Variant
    t_eff_s: float
    t_gt_s: float
    h_used_m: float
    outlier: bool
    outlier_threshold_mps2: float = OUTLIER_THRESHOLD_MPS2

    def to_dict(self) -> dict:
        return {
            "g_eff_mps2": self.g_eff_mps2,
            "t_eff_s": self.t_eff_s,
            "t_gt_s": self.t_gt_s,
            "h_used_m": self.h_used_m,
            "outlier": self.outlier,
        }


@dataclass(frozen=True)
class ScalingModel:
    kind: ScalingKind
    mts: float | None = None
    per_sample_factors: Mapping[str, float] = field(default_factory=dict)
    # (scene_id, seed) pairs used for fitting; seed None means every seed
    calibration_ids: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "calibration_ids", frozenset(self.calibration_ids))
        object.__setattr__(self, "per_sample_factors", dict(self.per_sample_factors))
        factors = list(self.per_sample_factors.values())
        if self.mts is not None:
            factors.append(self.mts)
        if any(not f > 0 for f in factors):
            raise ValueError("scaling factors must be > 0")

    def factor_for(self, scene_id: str) -> float:
        if self.kind is ScalingKind.MEAN:
            return self.mts
        try:
            return self.per_sample_factors[scene_id]
        except KeyError:
            raise MissingSeedGroup(f"no per-sample factor for scene {scene_id!r}") from None

    def is_calibration(self, scene_id: str, seed) -> bool:
        ids = self.calibration_ids
        return (scene_id, None) in ids or (scene_id, seed) in ids


@dataclass(frozen=True)
class TwoBallResult:
    scene_id: str
    height_ratio: float
    timing_ratio: float
    delta_t_frames: float
    delta_t_s: float
    t_lower_s: float
    t_upper_s: float
    lower_ball: str
    upper_ball: str
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "height_ratio": self.height_ratio,
            "timing_ratio": self.timing_ratio,
            "delta_t_frames": self.delta_t_frames,
            "delta_t_s": self.delta_t_s,
            "t_lower_s": self.t_lower_s,
            "t_upper_s": self.t_upper_s,
            "lower_ball": self.lower_ball,
            "upper_ball": self.upper_ball,
        }


@dataclass(frozen=True)
class RatioFit:
    slope: float
    intercept: float
    n_points: int


def effective_gravity(h_m: float, t_s: float) -> float:
    """Acceleration implied by falling ``h_m`` in ``t_s`` from rest: 2h/t^2."""
    if not t_s > 0:
        raise NonPositiveTime(f"time must be > 0, got {t_s}")
    if not h_m > 0:
        raise ValueError(f"height must be > 0, got {h_m}")
    return 2.0 * h_m / t_s**2


def raw_estimate(
    scene_id: str,
    seed,
    h_m: float,
    t_eff_s: float,
    *,
    g_truth: float = EARTH_G,
    outlier_threshold_mps2: float = OUTLIER_THRESHOLD_MPS2,
) -> GravityEstimate:
    g = effective_gravity(h_m, t_eff_s)
    return GravityEstimate(
        scene_id=scene_id,
        seed=seed,
        g_eff_mps2=g,
        variant=Variant.RAW,
        t_eff_s=t_eff_s,
        t_gt_s=fall_time(h_m, g_truth),
        h_used_m=h_m,
        outlier=g > outlier_threshold_mps2,
        outlier_threshold_mps2=outlier_threshold_mps2,
    )


def fit_mts(
    calibration: Iterable[tuple[float, float]], calibration_ids: Iterable = ()
) -> ScalingModel:
    """Mean time scaling: arithmetic mean of t_eff / t_gt over the calibration pairs."""
    ratios = []
    for t_eff, t_gt in calibration:
        if not (t_eff > 0 and t_gt > 0):
            raise NonPositiveTime("calibration times must be > 0")
        ratios.append(t_eff / t_gt)
    if not ratios:
        raise EmptyCalibration("no calibration pairs")
    ids = {i if isinstance(i, tuple) else (i, None) for i in calibration_ids}
    return ScalingModel(ScalingKind.MEAN, mts=math.fsum(sorted(ratios)) / len(ratios),
                        calibration_ids=frozenset(ids))


def apply_scaling(
    model: ScalingModel, estimate: GravityEstimate, variant: Variant | None = None
) -> GravityEstimate:
    """Rescale an estimate's clock by the model factor: t -> t/s, g -> g s^2."""
    if model.is_calibration(estimate.scene_id, estimate.seed):
        raise CalibrationLeakage(
            f"scene {estimate.scene_id!r} (seed {estimate.seed}) was used for calibration"
        )
    if variant is None:
        variant = {
            ScalingKind.MEAN: Variant.MEAN_SCALED,
            ScalingKind.PER_SAMPLE: Variant.PER_SAMPLE_SCALED,
            ScalingKind.HEIGHT_ADJUSTED: Variant.HEIGHT_ADJUSTED,
        }[model.kind]
    s = model.factor_for(estimate.scene_id)
    g = estimate.g_eff_mps2 * s * s
    return replace(
        estimate,
        variant=variant,
        t_eff_s=estimate.t_eff_s / s,
        g_eff_mps2=g,
        outlier=g > estimate.outlier_threshold_mps2,
    )


def fit_per_sample(
    seed_groups: Mapping[str, Mapping[str, Mapping[int, float]]],
    gt_times: Mapping[str, float],
) -> ScalingModel:
    """Per-scene clock factors from the fit seeds of each scene.

    ``seed_groups[scene_id]`` holds ``{"fit": {seed: t_eff}, "eval": {seed: t_eff}}``.
    The fit seeds become calibration ids, so only eval seeds can be rescaled.
    """
    factors = {}
    ids = set()
    for sid, groups in seed_groups.items():
        fit = dict(groups.get("fit") or {})
        ev = dict(groups.get("eval") or {})
        if not fit or not ev:
            raise MissingSeedGroup(f"scene {sid!r} needs at least one fit and one eval seed")
        t_gt = gt_times[sid]
        ratios = [fit[s] / t_gt for s in sorted(fit)]
        factors[sid] = math.fsum(ratios) / len(ratios)
        ids.update((sid, s) for s in fit)
    return ScalingModel(ScalingKind.PER_SAMPLE, per_sample_factors=factors,
                        calibration_ids=frozenset(ids))


def fall_tilt_deg(traj: PixelTrajectory, impact: ImpactEvent | None = None) -> float:
    """Angle between the release-to-impact displacement and the image vertical."""
    track, _ = traj.visible_prefix()
    if len(track) < 2:
        raise DegenerateTrajectory("need at least two visible samples", ball_id=traj.ball_id)
    end = len(track) - 1
    if impact is not None:
        end = int(np.searchsorted(track.frames, impact.crossing_frame))
    dx = track.cx[end] - track.cx[0]
    dy = track.cy[end] - track.cy[0]
    if math.hypot(dx, dy) < 2 * track.radius[0] or dy <= 0:
        raise DegenerateTrajectory(
            "release-to-impact displacement is shorter than one ball diameter",
            ball_id=traj.ball_id,
        )
    return min(math.degrees(math.atan2(abs(dx), dy)), MAX_TILT_DEG)


def height_adjusted(
    traj: PixelTrajectory, h_nominal_m: float, impact: ImpactEvent | None = None
) -> tuple[float, float]:
    """Drop height stretched to the observed tilted path, h / cos(phi), and phi in degrees."""
    phi = fall_tilt_deg(traj, impact)
    return h_nominal_m / math.cos(math.radians(phi)), phi


def height_adjusted_estimate(estimate: GravityEstimate, h_adj_m: float) -> GravityEstimate:
    g = effective_gravity(h_adj_m, estimate.t_eff_s)
    return replace(
        estimate,
        variant=Variant.HEIGHT_ADJUSTED,
        h_used_m=h_adj_m,
        g_eff_mps2=g,
        outlier=g > estimate.outlier_threshold_mps2,
    )


def two_ball(
    trajs: Sequence[PixelTrajectory],
    heights: Sequence[float],
    ground: GroundLine,
    config: DetectionConfig = DetectionConfig(),
    *,
    scene_id: str = "",
    seed=None,
) -> TwoBallResult:
    """Unit-free two-ball test: t1^2/t2^2 versus h1/h2, and the equal-distance lag.

    Ball 1 is the lower drop. The lag is the extra time the upper ball needs
    to cover the pixel distance the lower ball fell before impact; positive
    means the upper ball is slower.
    """
    if len(trajs) != 2 or len(heights) != 2:
        raise ValueError("two_ball needs exactly two trajectories and two heights")
    lo, up = (0, 1) if heights[0] <= heights[1] else (1, 0)
    lower, upper = trajs[lo], trajs[up]
    ev_lower = detect_impact(lower, ground, config)
    ev_upper = detect_impact(upper, ground, config)
    try:
        t_cross = time_to_traverse(upper, ev_lower.fallen_distance_px, config)
    except DetectionError as exc:
        exc.ball_id = exc.ball_id or upper.ball_id
        raise
    dt = t_cross - ev_lower.impact_time_s
    return TwoBallResult(
        scene_id=scene_id,
        height_ratio=heights[lo] / heights[up],
        timing_ratio=ev_lower.impact_time_s**2 / ev_upper.impact_time_s**2,
        delta_t_frames=dt * lower.fps,
        delta_t_s=dt,
        t_lower_s=ev_lower.impact_time_s,
        t_upper_s=ev_upper.impact_time_s,
        lower_ball=lower.ball_id,
        upper_ball=upper.ball_id,
        seed=seed,
    )


def ratio_slope(results: Iterable, through_origin: bool = False) -> RatioFit:
    """Least-squares line of timing ratio against height ratio.

    Accepts ``TwoBallResult`` objects or ``(height_ratio, timing_ratio)`` pairs.
    """
    pts = [
        (r.height_ratio, r.timing_ratio) if isinstance(r, TwoBallResult) else tuple(r)
        for r in results
    ]
    if len(pts) < 2:
        raise DegenerateFit("need at least two points")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.ptp(x) == 0:
        raise DegenerateFit("all height ratios are equal")
    if through_origin:
        A = x[:, None]
    else:
        A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    intercept = 0.0 if through_origin else float(coef[1])
    return RatioFit(slope=float(coef[0]), intercept=intercept, n_points=len(pts))


def incline_expected(g: float, theta_deg: float) -> float:
    """Frictionless incline acceleration g sin(theta)."""
    return g * math.sin(math.radians(theta_deg))


def pixel_scale(radius_px: float, ball_diameter_m: float) -> float:
    """Metres per pixel at the object's depth, from its apparent radius."""
    if not radius_px > 0:
        raise NonPositiveRadius(f"radius must be > 0, got {radius_px}")
    return ball_diameter_m / (2.0 * radius_px)


def incline_measured(
    traj: PixelTrajectory, scene: SceneSpec, config: DetectionConfig = DetectionConfig()
) -> float:
    """Fit a in s(t) = a t^2 / 2 to the along-path distance during the slide."""
    track, _ = traj.visible_prefix()
    if len(track) < 3:
        raise DegenerateFit(f"need at least 3 samples, got {len(track)}", ball_id=traj.ball_id)
    s_px = np.hypot(track.cx - track.cx[0], track.cy - track.cy[0])
    step = np.abs(np.diff(s_px)) / np.diff(track.frames)
    stop = len(track)
    moved = s_px[1:] > 2 * track.radius[1:]
    rest = np.flatnonzero(moved & (step < config.velocity_epsilon_px_per_frame))
    if len(rest):
        # the step into frame k is below epsilon: already resting at k-1
        stop = int(rest[0])
    if stop < 3:
        raise DegenerateFit("fewer than 3 samples before the object stops", ball_id=traj.ball_id)
    scale = pixel_scale(float(np.median(track.radius)), scene.ball.diameter_m)
    s_m = s_px[:stop] * scale
    t = track.times[:stop]
    A = 0.5 * t[:, None] ** 2
    if not np.any(A):
        raise DegenerateFit("no time span to fit", ball_id=traj.ball_id)
    (a,), *_ = np.linalg.lstsq(A, s_m, rcond=None)
    return float(a)
