"""Scene geometry, the pinhole camera and manifest I/O.

World frame: x lateral (right), y up with the ground at y = 0, z depth along
the optical axis. Image frame: u to the right, v down (row index), origin at
the top-left pixel corner. Every ball of a scene lies on the drop plane at
depth ``camera.distance_m``.

Drop heights refer to the ball *bottom*, so a ball released from height h
touches the ground after falling exactly h metres.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ManifestParseError, ManifestValidationError, NonPositiveDepth

SCHEMA_VERSION = 1

HEIGHT_RANGE_M = (0.5, 4.0)
TWO_BALL_RATIO_RANGE = (0.25, 3.5)
INCLINE_ANGLE_RANGE_DEG = (30.0, 75.0)
CAMERA_DISTANCE_RANGE_M = (1.0, 8.0)
CAMERA_HEIGHT_OFFSET_M = 0.5
MIN_CAMERA_HEIGHT_M = 0.2
TWO_BALL_GAP_M = 0.5

# (label, diameter in metres)
SPORTS_BALLS = (
    ("basketball", 0.24),
    ("soccer ball", 0.22),
    ("volleyball", 0.21),
    ("bowling ball", 0.218),
    ("softball", 0.097),
    ("baseball", 0.074),
    ("tennis ball", 0.067),
)
INCLINE_CUBE = ("cube", 0.2)


class Protocol(str, Enum):
    SINGLE_BALL = "single"
    TWO_BALL = "two-ball"
    INCLINE = "incline"


@dataclass(frozen=True)
class CameraSpec:
    focal_length_mm: float = 50.0
    sensor_width_mm: float = 36.0
    distance_m: float = 4.0
    height_m: float = 1.0
    image_width_px: int = 1280
    image_height_px: int = 720
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))
        bad = []
        if not self.focal_length_mm > 0:
            bad.append("focal_length_mm must be > 0")
        if not self.sensor_width_mm > 0:
            bad.append("sensor_width_mm must be > 0")
        if not self.distance_m > 0:
            bad.append("distance_m must be > 0")
        if int(self.image_width_px) != self.image_width_px or self.image_width_px <= 0:
            bad.append("image_width_px must be a positive integer")
        if int(self.image_height_px) != self.image_height_px or self.image_height_px <= 0:
            bad.append("image_height_px must be a positive integer")
        if not bad and not (math.isfinite(self.focal_px) and self.focal_px > 0):
            bad.append("focal_px must be finite and positive")
        if bad:
            raise ManifestValidationError(bad)

    @property
    def focal_px(self) -> float:
        return self.focal_length_mm / self.sensor_width_mm * self.image_width_px

    @property
    def cx(self) -> float:
        return self.image_width_px / 2.0

    @property
    def cy(self) -> float:
        return self.image_height_px / 2.0


@dataclass(frozen=True)
class BallSpec:
    diameter_m: float = 0.24
    label: str = "basketball"

    def __post_init__(self):
        if not self.diameter_m > 0:
            raise ManifestValidationError(["ball diameter_m must be > 0"])

    @property
    def radius_m(self) -> float:
        return self.diameter_m / 2.0


@dataclass(frozen=True)
class GroundLine:
    y_ground_px: float


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    protocol: Protocol
    drop_heights_m: tuple[float, ...]
    horizontal_offsets_m: tuple[float, ...]
    camera: CameraSpec
    ball: BallSpec
    fps: float = 24.0
    duration_s: float = 2.0
    gravity_mps2: float = 9.81
    seed: int = 0
    incline_angle_deg: float | None = None
    prompt: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "drop_heights_m", tuple(float(h) for h in self.drop_heights_m))
        object.__setattr__(
            self, "horizontal_offsets_m", tuple(float(x) for x in self.horizontal_offsets_m)
        )
        bad = self.violations()
        if bad:
            raise ManifestValidationError(bad, scene_id=self.scene_id)

    def violations(self) -> list[str]:
        bad = []
        if not self.scene_id:
            bad.append("scene_id must be a non-empty string")
        n = len(self.drop_heights_m)
        if self.protocol is Protocol.TWO_BALL:
            if n != 2:
                bad.append(f"TwoBall requires exactly 2 drop heights, got {n}")
        elif n != 1:
            bad.append(f"{self.protocol.value} requires exactly 1 drop height, got {n}")
        if any(not h >= 0 for h in self.drop_heights_m):
            bad.append("drop heights must be >= 0")
        if len(self.horizontal_offsets_m) != n:
            bad.append("horizontal_offsets_m needs one entry per ball")
        if self.protocol is Protocol.INCLINE:
            lo, hi = INCLINE_ANGLE_RANGE_DEG
            if self.incline_angle_deg is None:
                bad.append("incline_angle_deg is required for the incline protocol")
            elif not lo <= self.incline_angle_deg <= hi:
                bad.append(f"incline_angle_deg must lie in [{lo}, {hi}]")
        elif self.incline_angle_deg is not None:
            bad.append("incline_angle_deg is only allowed for the incline protocol")
        if not self.fps > 0:
            bad.append("fps must be > 0")
        if not self.duration_s > 0:
            bad.append("duration_s must be > 0")
        if not self.gravity_mps2 > 0:
            bad.append("gravity_mps2 must be > 0")
        if int(self.seed) != self.seed:
            bad.append("seed must be an integer")
        return bad

    @property
    def n_balls(self) -> int:
        return len(self.drop_heights_m)

    @property
    def n_frames(self) -> int:
        return int(math.floor(self.duration_s * self.fps + 1e-9))

    def ball_ids(self) -> list[str]:
        return [f"ball{i}" for i in range(self.n_balls)]

    def lower_upper(self) -> tuple[int, int]:
        """Indices of the lower and upper ball of a two-ball scene."""
        h0, h1 = self.drop_heights_m
        return (0, 1) if h0 <= h1 else (1, 0)


def project_point(camera: CameraSpec, x_m, y_m, z_m):
    """Project world points to pixel coordinates (u, v); accepts scalars or arrays."""
    z = np.asarray(z_m, dtype=float)
    if np.any(z <= 0):
        raise NonPositiveDepth(f"depth must be > 0, got {z_m}")
    f = camera.focal_px
    u = camera.cx + f * np.asarray(x_m, dtype=float) / z
    v = camera.cy - f * (np.asarray(y_m, dtype=float) - camera.height_m) / z
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def ground_line(scene: SceneSpec, ball_index: int = 0) -> GroundLine:
    """Image row of the ground plane at the ball's depth, clipped to the image."""
    cam = scene.camera
    _, v = project_point(cam, scene.horizontal_offsets_m[ball_index], 0.0, cam.distance_m)
    return GroundLine(float(min(max(v, 0.0), cam.image_height_px)))


def _fit_distance(camera_height, ys, half_width, focal_px, cx, cy, margin_px=1.0):
    """Smallest depth at which all drop-plane points lie strictly inside the frame."""
    need_v = max(abs(y - camera_height) for y in ys) * focal_px / (cy - margin_px)
    need_u = half_width * focal_px / (cx - margin_px)
    return max(need_v, need_u)


def default_camera_for(
    heights_m: Sequence[float],
    rng: np.random.Generator | int | None = None,
    *,
    ball_diameter_m: float = 0.24,
    half_width_m: float = 0.0,
    height_offset_m: float | None = None,
    distance_m: float | None = None,
) -> CameraSpec:
    """Sample the benchmark camera for a set of drop heights.

    The camera sits at half the tallest drop plus a uniform offset in
    [-0.5, 0.5] m, at a uniform distance in [1, 8] m pushed back as needed so
    the whole fall (plus one ball radius of margin) stays in frame.
    ``height_offset_m`` / ``distance_m`` override the sampled values.
    """
    if not len(heights_m):
        raise ValueError("heights_m must be non-empty")
    rng = np.random.default_rng(rng)
    offset = rng.uniform(-CAMERA_HEIGHT_OFFSET_M, CAMERA_HEIGHT_OFFSET_M)
    dist = rng.uniform(*CAMERA_DISTANCE_RANGE_M)
    if height_offset_m is not None:
        offset = height_offset_m
    if distance_m is not None:
        dist = distance_m

    notes = []
    height = max(heights_m) / 2.0 + offset
    if height < MIN_CAMERA_HEIGHT_M:
        notes.append(f"camera height clamped from {height!r} to {MIN_CAMERA_HEIGHT_M}")
        height = MIN_CAMERA_HEIGHT_M

    probe = CameraSpec(distance_m=1.0, height_m=height)
    r = ball_diameter_m / 2.0
    ys = [max(heights_m) + 3 * r, -r]
    need = _fit_distance(height, ys, half_width_m + 2 * r, probe.focal_px, probe.cx, probe.cy)
    if dist < need:
        notes.append(f"camera distance increased from {dist!r} to {need!r} to fit the fall")
        dist = need
    return CameraSpec(distance_m=float(dist), height_m=float(height), notes=tuple(notes))


def _pick_ball(rng: np.random.Generator) -> BallSpec:
    label, diameter = SPORTS_BALLS[int(rng.integers(len(SPORTS_BALLS)))]
    return BallSpec(diameter_m=diameter, label=label)


def sample_two_ball_heights(rng: np.random.Generator) -> tuple[float, float]:
    """Both heights uniform on [0.5, 4.0], kept only if h0/h1 is in [0.25, 3.5]."""
    lo, hi = TWO_BALL_RATIO_RANGE
    while True:
        h0, h1 = rng.uniform(*HEIGHT_RANGE_M, size=2)
        if lo <= h0 / h1 <= hi:
            return float(h0), float(h1)


def two_ball_offsets(ball: BallSpec) -> tuple[float, float]:
    half = (ball.diameter_m + TWO_BALL_GAP_M) / 2.0
    return (-half, half)


def generate_scenes(
    count: int,
    protocol: Protocol | str,
    seed: int,
    *,
    fps: float = 24.0,
    duration_s: float = 2.0,
    gravity_mps2: float = 9.81,
    prompt: str | None = None,
) -> list[SceneSpec]:
    """Draw ``count`` benchmark scenes for ``protocol`` deterministically from ``seed``."""
    if count <= 0:
        raise ValueError("count must be positive")
    protocol = Protocol(protocol)
    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(count):
        scene_seed = int(rng.integers(0, 2**31 - 1))
        angle = None
        if protocol is Protocol.SINGLE_BALL:
            ball = _pick_ball(rng)
            heights = (float(rng.uniform(*HEIGHT_RANGE_M)),)
            offsets = (0.0,)
            half_width = 0.0
        elif protocol is Protocol.TWO_BALL:
            ball = _pick_ball(rng)
            heights = sample_two_ball_heights(rng)
            offsets = two_ball_offsets(ball)
            half_width = offsets[1]
        else:
            ball = BallSpec(diameter_m=INCLINE_CUBE[1], label=INCLINE_CUBE[0])
            heights = (float(rng.uniform(*HEIGHT_RANGE_M)),)
            angle = float(rng.uniform(*INCLINE_ANGLE_RANGE_DEG))
            offsets = (0.0,)
            half_width = heights[0] / math.tan(math.radians(angle)) / 2.0
        camera = default_camera_for(
            heights, rng, ball_diameter_m=ball.diameter_m, half_width_m=half_width
        )
        scenes.append(
            SceneSpec(
                scene_id=f"{protocol.value}-{i:03d}",
                protocol=protocol,
                drop_heights_m=heights,
                horizontal_offsets_m=offsets,
                camera=camera,
                ball=ball,
                fps=fps,
                duration_s=duration_s,
                gravity_mps2=gravity_mps2,
                seed=scene_seed,
                incline_angle_deg=angle,
                prompt=prompt,
            )
        )
    return scenes


# -- manifest I/O -----------------------------------------------------------

_SCENE_FIELDS = [f.name for f in fields(SceneSpec)]
_CAMERA_FIELDS = [f.name for f in fields(CameraSpec)]
_BALL_FIELDS = [f.name for f in fields(BallSpec)]


def scene_to_dict(scene: SceneSpec) -> dict:
    d = asdict(scene)
    d["protocol"] = scene.protocol.value
    d["drop_heights_m"] = list(scene.drop_heights_m)
    d["horizontal_offsets_m"] = list(scene.horizontal_offsets_m)
    d["camera"]["notes"] = list(scene.camera.notes)
    return {k: d[k] for k in _SCENE_FIELDS}


def _build(data, allowed, where):
    if not isinstance(data, dict):
        raise ManifestParseError("expected an object", field=where)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ManifestParseError(f"unknown field(s) {unknown}", field=where)
    return data


def scene_from_dict(data: dict, where: str = "scenes[?]") -> SceneSpec:
    data = dict(_build(data, _SCENE_FIELDS, where))
    for req in ("scene_id", "protocol", "drop_heights_m", "horizontal_offsets_m", "camera", "ball"):
        if req not in data:
            raise ManifestParseError("missing required field", field=f"{where}.{req}")
    cam = dict(_build(data["camera"], _CAMERA_FIELDS, f"{where}.camera"))
    ball = dict(_build(data["ball"], _BALL_FIELDS, f"{where}.ball"))
    try:
        data["protocol"] = Protocol(data["protocol"])
    except ValueError:
        raise ManifestParseError(
            f"unknown protocol {data['protocol']!r}", field=f"{where}.protocol"
        ) from None
    sid = data.get("scene_id")
    try:
        data["camera"] = CameraSpec(**cam)
        data["ball"] = BallSpec(**ball)
        return SceneSpec(**data)
    except ManifestValidationError as exc:
        raise ManifestValidationError(exc.violations, scene_id=sid) from None
    except (TypeError, ValueError) as exc:
        raise ManifestParseError(str(exc), field=where) from None


def manifest_text(scenes: Iterable[SceneSpec]) -> str:
    scenes = list(scenes)
    ids = [s.scene_id for s in scenes]
    if len(set(ids)) != len(ids):
        raise ManifestValidationError(["scene ids must be unique"])
    doc = {"schema_version": SCHEMA_VERSION, "scenes": [scene_to_dict(s) for s in scenes]}
    return json.dumps(doc, indent=2) + "\n"


def write_manifest(scenes: Iterable[SceneSpec], path) -> None:
    Path(path).write_text(manifest_text(scenes), encoding="utf-8")


def parse_manifest(text: str) -> list[SceneSpec]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ManifestParseError("top level must be an object")
    unknown = sorted(set(doc) - {"schema_version", "scenes"})
    if unknown:
        raise ManifestParseError(f"unknown field(s) {unknown}", field="<root>")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ManifestParseError(
            f"unsupported schema_version {doc.get('schema_version')!r}", field="schema_version"
        )
    raw = doc.get("scenes")
    if not isinstance(raw, list):
        raise ManifestParseError("must be a list", field="scenes")
    scenes = [scene_from_dict(d, f"scenes[{i}]") for i, d in enumerate(raw)]
    ids = [s.scene_id for s in scenes]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ManifestValidationError([f"duplicate scene ids {dupes}"])
    return scenes


def read_manifest(path) -> list[SceneSpec]:
    return parse_manifest(Path(path).read_text(encoding="utf-8"))


def manifest_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
