"""Stroboscopic composites: ball outlines at equal time intervals, rendered as SVG."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .detect import DetectionConfig, ImpactEvent, detect_impact
from .errors import GravlabError
from .metrics import EARTH_G
from .scene import Protocol, SceneSpec, ground_line, project_point
from .simulate import PixelTrajectory, fall_time

STROBES_PER_FALL = 8
BALL_COLORS = ("#1f77b4", "#ff7f0e")


class StrobeReference(str, Enum):
    EARTH_TIME = "earth"
    OWN_IMPACT = "own"


@dataclass(frozen=True)
class StrobeSpec:
    interval_s: float | None = None
    reference: StrobeReference = StrobeReference.EARTH_TIME
    show_expected_marker: bool = True
    output_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "reference", StrobeReference(self.reference))
        if self.interval_s is not None and not self.interval_s > 0:
            raise ValueError("interval_s must be > 0")


@dataclass(frozen=True)
class StrobeComposite:
    scene_id: str
    times_s: np.ndarray
    positions: dict  # ball_id -> (n, 2) array of (u, v)
    radius_px: dict  # ball_id -> float
    ground_y_px: float
    marker: dict | None
    image_size: tuple[int, int]

    def gaps_px(self, ball_id: str) -> np.ndarray:
        """Distances between consecutive strobe positions of one ball."""
        p = self.positions[ball_id]
        return np.hypot(*np.diff(p, axis=0).T)


def _lagrange3(xs, ys, x):
    x0, x1, x2 = xs
    return (
        ys[0] * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
        + ys[1] * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
        + ys[2] * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
    )


def positions_at(
    traj: PixelTrajectory, times_s: Sequence[float], impact: ImpactEvent | None = None
) -> np.ndarray:
    """Ball centres at arbitrary times from the free-flight samples.

    Uses a three-sample quadratic, exact for constant acceleration. After the
    impact the resting pose is returned.
    """
    track, _ = traj.visible_prefix()
    f = track.frames.astype(float)
    free = np.arange(len(track))
    rest = None
    if impact is not None:
        c = int(np.searchsorted(track.frames, impact.crossing_frame))
        free = free[:c] if c >= 1 else free[:1]
        rest = (track.cx[c], track.cy[c])
    out = np.empty((len(times_s), 2))
    for n, t in enumerate(times_s):
        if rest is not None and t >= impact.impact_time_s:
            out[n] = rest
            continue
        tau = t * track.fps
        if len(free) < 3:
            out[n] = (np.interp(tau, f[free], track.cx[free]), np.interp(tau, f[free], track.cy[free]))
            continue
        j = int(np.searchsorted(f[free], tau))
        s = min(max(j - 1, 0), len(free) - 3)
        idx = free[s : s + 3]
        out[n] = (_lagrange3(f[idx], track.cx[idx], tau), _lagrange3(f[idx], track.cy[idx], tau))
    return out


def _earth_end_time(scene: SceneSpec, i: int) -> float:
    h = scene.drop_heights_m[i]
    if scene.protocol is Protocol.INCLINE:
        s = math.sin(math.radians(scene.incline_angle_deg))
        return math.sqrt(2 * (h / s) / (EARTH_G * s))
    return fall_time(h, EARTH_G)


def default_interval(scene: SceneSpec) -> float:
    return fall_time(max(scene.drop_heights_m), EARTH_G) / STROBES_PER_FALL


def build_composite(
    scene: SceneSpec,
    trajs: Sequence[PixelTrajectory],
    spec: StrobeSpec = StrobeSpec(),
    config: DetectionConfig = DetectionConfig(),
) -> StrobeComposite:
    ground = ground_line(scene)
    ref = scene.lower_upper()[0] if scene.protocol is Protocol.TWO_BALL else 0
    impacts = []
    for tr in trajs:
        try:
            impacts.append(detect_impact(tr, ground, config))
        except GravlabError:
            impacts.append(None)
    if spec.reference is StrobeReference.EARTH_TIME:
        end = _earth_end_time(scene, ref)
    else:
        if impacts[ref] is None:
            detect_impact(trajs[ref], ground, config)  # re-raise the detection error
        end = impacts[ref].crossing_frame / scene.fps
    interval = spec.interval_s or default_interval(scene)
    n = int(math.floor(end / interval + 1e-9))
    times = [k * interval for k in range(n + 1)]
    if end - times[-1] > 1e-9:
        times.append(end)
    times = np.array(times)

    positions = {tr.ball_id: positions_at(tr, times, ev) for tr, ev in zip(trajs, impacts)}
    radius = {tr.ball_id: float(tr.radius[0]) for tr in trajs}
    marker = None
    if spec.show_expected_marker and scene.protocol is Protocol.TWO_BALL:
        lo, up = scene.lower_upper()
        h_lo, h_up = scene.drop_heights_m[lo], scene.drop_heights_m[up]
        x = scene.horizontal_offsets_m[up]
        cam = scene.camera
        u, v = project_point(cam, x, h_up - h_lo + scene.ball.radius_m, cam.distance_m)
        r = radius[trajs[up].ball_id]
        marker = {"ball_id": trajs[up].ball_id, "u_px": u, "v_px": v,
                  "x0_px": u - 2 * r, "x1_px": u + 2 * r}
    cam = scene.camera
    return StrobeComposite(
        scene_id=scene.scene_id,
        times_s=times,
        positions=positions,
        radius_px=radius,
        ground_y_px=ground.y_ground_px,
        marker=marker,
        image_size=(cam.image_width_px, cam.image_height_px),
    )


def _num(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def render_svg(comp: StrobeComposite) -> str:
    w, h = comp.image_size
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f"<title>{escape(comp.scene_id)}</title>",
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<line class="ground" x1="0" y1="{_num(comp.ground_y_px)}" x2="{w}" '
        f'y2="{_num(comp.ground_y_px)}" stroke="black" stroke-width="2"/>',
    ]
    n = len(comp.times_s)
    for b, (ball_id, pts) in enumerate(comp.positions.items()):
        color = BALL_COLORS[b % len(BALL_COLORS)]
        out.append(f'<g class="ball" id="{escape(ball_id)}" stroke="{color}" fill="none">')
        for k, (u, v) in enumerate(pts):
            opacity = 0.25 + 0.75 * (k + 1) / n
            out.append(
                f'<circle cx="{_num(u)}" cy="{_num(v)}" r="{_num(comp.radius_px[ball_id])}" '
                f'stroke-opacity="{_num(opacity)}" data-t="{_num(comp.times_s[k] * 1000)}ms"/>'
            )
        out.append("</g>")
    if comp.marker is not None:
        m = comp.marker
        out.append(
            f'<line class="expected" x1="{_num(m["x0_px"])}" y1="{_num(m["v_px"])}" '
            f'x2="{_num(m["x1_px"])}" y2="{_num(m["v_px"])}" stroke="red" '
            'stroke-width="2" stroke-dasharray="8,6"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(comp: StrobeComposite, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(comp))
