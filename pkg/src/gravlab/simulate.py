"""Pixel-trajectory synthesis and the trajectory interchange file.

The simulator is the oracle for every metric: undegraded scenes follow exact
constant-g kinematics (no drag, no bounce), and each ``DegradationSpec``
reproduces one failure mode seen in generated videos.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegradationMismatch,
    DegradationParseError,
    NonPositiveGravity,
    TrajectoryParseError,
)
from .scene import Protocol, SceneSpec, project_point

TRAJECTORY_SCHEMA_VERSION = 1
TRAJECTORY_COLUMNS = ("frame", "ball_id", "cx_px", "cy_px", "radius_px", "visible")


def fall_time(h_m: float, g_mps2: float = 9.81) -> float:
    """Time to fall ``h_m`` metres from rest, sqrt(2h/g)."""
    if not g_mps2 > 0:
        raise NonPositiveGravity(f"gravity must be > 0, got {g_mps2}")
    if h_m < 0:
        raise ValueError(f"height must be >= 0, got {h_m}")
    return math.sqrt(2.0 * h_m / g_mps2)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PixelTrajectory:
    """Per-frame centroid and radius track of one ball.

    Frame ``k`` is sampled at time ``k / fps``; frame 0 is the release.
    """

    ball_id: str
    fps: float
    frames: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    radius: np.ndarray
    visible: np.ndarray = None

    def __post_init__(self):
        n = len(self.frames)
        vis = np.ones(n, dtype=bool) if self.visible is None else self.visible
        object.__setattr__(self, "frames", _frozen(self.frames, np.int64))
        object.__setattr__(self, "cx", _frozen(self.cx, float))
        object.__setattr__(self, "cy", _frozen(self.cy, float))
        object.__setattr__(self, "radius", _frozen(self.radius, float))
        object.__setattr__(self, "visible", _frozen(vis, bool))
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        if not all(len(a) == n for a in (self.cx, self.cy, self.radius, self.visible)):
            raise ValueError("sample columns must have equal length")
        if n > 1 and np.any(np.diff(self.frames) <= 0):
            raise ValueError("frame indices must be strictly increasing")
        if np.any(self.radius[self.visible] <= 0):
            raise ValueError("radius must be > 0 for visible samples")

    def __len__(self):
        return len(self.frames)

    def __eq__(self, other):
        if not isinstance(other, PixelTrajectory):
            return NotImplemented
        return (
            self.ball_id == other.ball_id
            and self.fps == other.fps
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("frames", "cx", "cy", "radius", "visible")
            )
        )

    @property
    def times(self) -> np.ndarray:
        return self.frames / self.fps

    @property
    def samples(self) -> list[tuple[int, float, float, float, bool]]:
        return list(
            zip(
                self.frames.tolist(),
                self.cx.tolist(),
                self.cy.tolist(),
                self.radius.tolist(),
                self.visible.tolist(),
            )
        )

    def _take(self, idx) -> "PixelTrajectory":
        return PixelTrajectory(
            self.ball_id,
            self.fps,
            self.frames[idx],
            self.cx[idx],
            self.cy[idx],
            self.radius[idx],
            self.visible[idx],
        )

    def visible_prefix(self) -> tuple["PixelTrajectory", bool]:
        """Visible run starting at the first visible sample, and whether the track was split."""
        vis = np.flatnonzero(self.visible)
        if len(vis) == 0:
            return self._take(slice(0, 0)), False
        start = vis[0]
        stop = start
        while stop < len(self) and self.visible[stop]:
            stop += 1
        split = bool(np.any(self.visible[stop:]))
        return self._take(slice(start, stop)), split

    def truncated(self, n: int) -> "PixelTrajectory":
        return self._take(slice(0, n))


class DegradationKind(str, Enum):
    TIME_DILATION = "TimeDilation"
    PER_OBJECT_GRAVITY = "PerObjectGravity"
    ANGLED_FALL = "AngledFall"
    HOVER = "Hover"
    CENTROID_NOISE = "CentroidNoise"


_PARAMS = {
    DegradationKind.TIME_DILATION: ("factor",),
    DegradationKind.PER_OBJECT_GRAVITY: ("g_lower", "g_upper"),
    DegradationKind.ANGLED_FALL: ("phi_deg",),
    DegradationKind.HOVER: ("release_delay_s",),
    DegradationKind.CENTROID_NOISE: ("sigma_px",),
}


@dataclass(frozen=True)
class DegradationSpec:
    """One emulated generator failure.

    ``applies_to`` selects balls by id (``"*"`` for all). PerObjectGravity
    always addresses the lower and upper ball of a two-ball scene.
    """

    kind: DegradationKind
    factor: float | None = None
    g_lower: float | None = None
    g_upper: float | None = None
    phi_deg: float | None = None
    release_delay_s: float | None = None
    sigma_px: float | None = None
    applies_to: str = "*"

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", DegradationKind(self.kind))
        except ValueError:
            raise DegradationParseError(f"unknown degradation kind {self.kind!r}") from None
        wanted = _PARAMS[self.kind]
        for name in ("factor", "g_lower", "g_upper", "phi_deg", "release_delay_s", "sigma_px"):
            value = getattr(self, name)
            if name in wanted and value is None:
                raise DegradationParseError(f"{self.kind.value} needs {name}")
            if name not in wanted and value is not None:
                raise DegradationParseError(f"{self.kind.value} does not take {name}")
        k = self.kind
        if k is DegradationKind.TIME_DILATION and not self.factor > 0:
            raise DegradationParseError("TimeDilation factor must be > 0")
        if k is DegradationKind.PER_OBJECT_GRAVITY and not (self.g_lower > 0 and self.g_upper > 0):
            raise DegradationParseError("PerObjectGravity accelerations must be > 0")
        if k is DegradationKind.ANGLED_FALL and not abs(self.phi_deg) < 45:
            raise DegradationParseError("AngledFall |phi_deg| must be < 45")
        if k is DegradationKind.HOVER and not self.release_delay_s >= 0:
            raise DegradationParseError("Hover release_delay_s must be >= 0")
        if k is DegradationKind.CENTROID_NOISE and not self.sigma_px >= 0:
            raise DegradationParseError("CentroidNoise sigma_px must be >= 0")

    @classmethod
    def time_dilation(cls, factor, applies_to="*"):
        return cls(DegradationKind.TIME_DILATION, factor=factor, applies_to=applies_to)

    @classmethod
    def per_object_gravity(cls, g_lower, g_upper):
        return cls(DegradationKind.PER_OBJECT_GRAVITY, g_lower=g_lower, g_upper=g_upper)

    @classmethod
    def angled_fall(cls, phi_deg, applies_to="*"):
        return cls(DegradationKind.ANGLED_FALL, phi_deg=phi_deg, applies_to=applies_to)

    @classmethod
    def hover(cls, release_delay_s, applies_to="*"):
        return cls(DegradationKind.HOVER, release_delay_s=release_delay_s, applies_to=applies_to)

    @classmethod
    def centroid_noise(cls, sigma_px, applies_to="*"):
        return cls(DegradationKind.CENTROID_NOISE, sigma_px=sigma_px, applies_to=applies_to)

    def selects(self, ball_id: str) -> bool:
        return self.applies_to == "*" or self.applies_to == ball_id

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        for name in _PARAMS[self.kind]:
            d[name] = getattr(self, name)
        d["applies_to"] = self.applies_to
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise DegradationParseError("degradation entry needs a 'kind'")
        known = {"kind", "applies_to", *[p for ps in _PARAMS.values() for p in ps]}
        unknown = sorted(set(d) - known)
        if unknown:
            raise DegradationParseError(f"unknown degradation field(s) {unknown}")
        return cls(**d)


@dataclass(frozen=True)
class DegradationRule:
    """A degradation plus the (scene, seed) selection it applies to; None selects all."""

    spec: DegradationSpec
    scenes: tuple[str, ...] | None = None
    seeds: tuple[int, ...] | None = None

    def matches(self, scene_id: str, seed: int | None) -> bool:
        if self.scenes is not None and scene_id not in self.scenes:
            return False
        if self.seeds is not None and seed not in self.seeds:
            return False
        return True


def degradations_for(rules: Iterable[DegradationRule], scene_id, seed) -> list[DegradationSpec]:
    return [r.spec for r in rules if r.matches(scene_id, seed)]


def parse_degradations(text: str) -> list[DegradationRule]:
    """Parse a degradation file: ``{"schema_version": 1, "degradations": [...]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DegradationParseError(f"line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("degradations"), list):
        raise DegradationParseError("expected an object with a 'degradations' list")
    if doc.get("schema_version", 1) != 1:
        raise DegradationParseError(f"unsupported schema_version {doc['schema_version']!r}")
    rules = []
    for i, entry in enumerate(doc["degradations"]):
        if not isinstance(entry, dict):
            raise DegradationParseError(f"degradations[{i}] must be an object")
        entry = dict(entry)
        scenes = entry.pop("scenes", None)
        seeds = entry.pop("seeds", None)
        try:
            spec = DegradationSpec.from_dict(entry)
        except (DegradationParseError, TypeError) as exc:
            raise DegradationParseError(f"degradations[{i}]: {exc}") from None
        rules.append(
            DegradationRule(
                spec,
                tuple(scenes) if scenes is not None else None,
                tuple(int(s) for s in seeds) if seeds is not None else None,
            )
        )
    return rules


def load_degradations(path) -> list[DegradationRule]:
    return parse_degradations(Path(path).read_text(encoding="utf-8"))


def dump_degradations(rules: Sequence[DegradationRule]) -> str:
    out = []
    for r in rules:
        d = r.spec.to_dict()
        if r.scenes is not None:
            d["scenes"] = list(r.scenes)
        if r.seeds is not None:
            d["seeds"] = list(r.seeds)
        out.append(d)
    return json.dumps({"schema_version": 1, "degradations": out}, indent=2) + "\n"


# -- kinematics -------------------------------------------------------------


@dataclass
class _BallMotion:
    g: float
    dilation: float = 1.0
    delay_s: float = 0.0
    phi_deg: float = 0.0
    sigma_px: float = 0.0


def _ball_motions(scene: SceneSpec, degradations: Sequence[DegradationSpec]) -> list[_BallMotion]:
    ids = scene.ball_ids()
    motions = [_BallMotion(g=scene.gravity_mps2) for _ in ids]
    for d in degradations:
        if d.kind is DegradationKind.PER_OBJECT_GRAVITY:
            if scene.protocol is not Protocol.TWO_BALL:
                raise DegradationMismatch(
                    f"PerObjectGravity needs a two-ball scene, {scene.scene_id} is "
                    f"{scene.protocol.value}"
                )
            lower, upper = scene.lower_upper()
            motions[lower].g = d.g_lower
            motions[upper].g = d.g_upper
            continue
        if d.kind is DegradationKind.ANGLED_FALL and scene.protocol is Protocol.INCLINE:
            raise DegradationMismatch("AngledFall does not apply to incline scenes")
        hit = [i for i, b in enumerate(ids) if d.selects(b)]
        if not hit:
            raise DegradationMismatch(f"{d.applies_to!r} selects no ball in {scene.scene_id}")
        for i in hit:
            m = motions[i]
            if d.kind is DegradationKind.TIME_DILATION:
                m.dilation *= d.factor
            elif d.kind is DegradationKind.ANGLED_FALL:
                m.phi_deg = d.phi_deg
            elif d.kind is DegradationKind.HOVER:
                m.delay_s += d.release_delay_s
            elif d.kind is DegradationKind.CENTROID_NOISE:
                m.sigma_px = math.hypot(m.sigma_px, d.sigma_px)
    return motions


def physical_time(t_s, motion_delay_s=0.0, dilation=1.0):
    """Map video time to the physical clock of a delayed, dilated replay."""
    return np.maximum(np.asarray(t_s, dtype=float) - motion_delay_s, 0.0) / dilation


def path_distance(tau_s, accel, length_m):
    """Distance covered from rest along a straight path, stopping at ``length_m``."""
    return np.minimum(0.5 * accel * np.asarray(tau_s, dtype=float) ** 2, length_m)


def world_path(scene: SceneSpec, i: int, motion: _BallMotion, t_s):
    """World (x, y_center) of ball ``i`` at video times ``t_s``."""
    h = scene.drop_heights_m[i]
    r = scene.ball.radius_m
    x0 = scene.horizontal_offsets_m[i]
    tau = physical_time(t_s, motion.delay_s, motion.dilation)
    if scene.protocol is Protocol.INCLINE:
        theta = math.radians(scene.incline_angle_deg)
        length = h / math.sin(theta)
        d = path_distance(tau, motion.g * math.sin(theta), length)
        x_start = x0 - length * math.cos(theta) / 2.0
        return x_start + d * math.cos(theta), h + r - d * math.sin(theta)
    phi = math.radians(motion.phi_deg)
    # tilted path keeps acceleration g along the path and still ends on the ground
    length = h / math.cos(phi)
    d = path_distance(tau, motion.g, length)
    return x0 + d * math.sin(phi), h + r - d * math.cos(phi)


def simulate_scene(
    scene: SceneSpec,
    degradations: Sequence[DegradationSpec] = (),
    run_seed: int | None = None,
) -> list[PixelTrajectory]:
    """Render one pixel trajectory per ball at the frame instants k / fps."""
    motions = _ball_motions(scene, degradations)
    cam = scene.camera
    z = cam.distance_m
    frames = np.arange(scene.n_frames)
    t = frames / scene.fps
    radius_px = cam.focal_px * scene.ball.radius_m / z
    out = []
    for i, (ball_id, m) in enumerate(zip(scene.ball_ids(), motions)):
        x, y = world_path(scene, i, m, t)
        u, v = project_point(cam, x, y, np.full_like(t, z))
        if m.sigma_px > 0:
            rng = np.random.default_rng([scene.seed, 0 if run_seed is None else run_seed, i])
            u = u + rng.normal(0.0, m.sigma_px, size=u.shape)
            v = v + rng.normal(0.0, m.sigma_px, size=v.shape)
        out.append(PixelTrajectory(ball_id, scene.fps, frames, u, v, np.full_like(t, radius_px)))
    return out


# -- trajectory file --------------------------------------------------------


def trajectories_text(trajs: Sequence[PixelTrajectory], **meta) -> str:
    trajs = list(trajs)
    if not trajs:
        raise ValueError("nothing to write")
    fps = {t.fps for t in trajs}
    if len(fps) != 1:
        raise ValueError("all trajectories in one file must share fps")
    buf = io.StringIO()
    header = {"schema_version": TRAJECTORY_SCHEMA_VERSION, "fps": repr(float(trajs[0].fps))}
    header.update({k: v for k, v in meta.items() if v is not None})
    for key, value in header.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    rows = []
    for order, tr in enumerate(trajs):
        for f, x, y, r, vis in tr.samples:
            rows.append((f, order, [f, tr.ball_id, repr(x), repr(y), repr(r), int(vis)]))
    rows.sort(key=lambda item: (item[0], item[1]))
    writer.writerows(row for _, _, row in rows)
    return buf.getvalue()


def write_trajectories(trajs: Sequence[PixelTrajectory], path, **meta) -> None:
    """Write trajectories as CSV with a ``# key: value`` metadata preamble."""
    Path(path).write_text(trajectories_text(trajs, **meta), encoding="utf-8")


def parse_trajectories(text: str) -> tuple[dict, list[PixelTrajectory]]:
    meta: dict[str, str] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, sep, value = lines[i][1:].partition(":")
        if not sep:
            raise TrajectoryParseError("metadata lines must read '# key: value'", row=i + 1)
        meta[key.strip()] = value.strip()
        i += 1
    if "fps" not in meta:
        raise TrajectoryParseError("missing '# fps:' metadata line")
    try:
        fps = float(meta["fps"])
    except ValueError:
        raise TrajectoryParseError(f"bad fps {meta['fps']!r}") from None
    reader = csv.reader(lines[i:])
    try:
        header = next(reader)
    except StopIteration:
        raise TrajectoryParseError("missing column header", row=i + 1) from None
    if tuple(h.strip() for h in header) != TRAJECTORY_COLUMNS:
        raise TrajectoryParseError(f"expected header {','.join(TRAJECTORY_COLUMNS)}", row=i + 1)

    cols: dict[str, list[list]] = {}
    for lineno, row in enumerate(reader, start=i + 2):
        if not row:
            continue
        if len(row) != len(TRAJECTORY_COLUMNS):
            raise TrajectoryParseError(f"expected 6 fields, got {len(row)}", row=lineno)
        try:
            frame = int(row[0])
            x, y, r = float(row[2]), float(row[3]), float(row[4])
        except ValueError as exc:
            raise TrajectoryParseError(str(exc), row=lineno) from None
        vis_text = row[5].strip().lower()
        if vis_text not in ("0", "1", "true", "false"):
            raise TrajectoryParseError(f"visible must be 0/1, got {row[5]!r}", row=lineno)
        vis = vis_text in ("1", "true")
        ball = row[1]
        c = cols.setdefault(ball, [[], [], [], [], []])
        if c[0] and frame <= c[0][-1]:
            raise TrajectoryParseError(
                f"frame index {frame} for {ball} is not strictly increasing", row=lineno
            )
        if vis and not r > 0:
            raise TrajectoryParseError("radius_px must be > 0 for visible samples", row=lineno)
        for lst, val in zip(c, (frame, x, y, r, vis)):
            lst.append(val)
    trajs = [PixelTrajectory(b, fps, *c) for b, c in cols.items()]
    return meta, trajs


def load_trajectory_file(path) -> tuple[dict, list[PixelTrajectory]]:
    return parse_trajectories(Path(path).read_text(encoding="utf-8"))


def read_trajectories(path) -> list[PixelTrajectory]:
    return load_trajectory_file(path)[1]
