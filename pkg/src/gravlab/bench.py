"""Benchmark runs: expand a manifest over seeds, evaluate every (scene, seed)
pair, fit the time-scaling models and aggregate into a report.

Per-pair failures never abort a run; they become error rows in the report.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .detect import DetectionConfig, detect_impact
from .errors import (
    CalibrationLeakage,
    DegenerateTrajectory,
    EmptyRun,
    GravlabError,
    MissingTrajectory,
    ReportConsistencyError,
)
from .metrics import (
    EARTH_G,
    OUTLIER_THRESHOLD_MPS2,
    Variant,
    apply_scaling,
    fit_mts,
    fit_per_sample,
    height_adjusted,
    height_adjusted_estimate,
    incline_expected,
    incline_measured,
    ratio_slope,
    raw_estimate,
    two_ball,
)
from .scene import Protocol, SceneSpec, ground_line, read_manifest
from .simulate import (
    DegradationRule,
    degradations_for,
    dump_degradations,
    fall_time,
    read_trajectories,
    simulate_scene,
)

REPORT_SCHEMA_VERSION = 1
DEFAULT_SEEDS = (42, 123, 777, 999)
SCALED_VARIANTS = frozenset(
    {Variant.MEAN_SCALED, Variant.PER_SAMPLE_SCALED, Variant.HEIGHT_ADJUSTED}
)


def trajectory_filename(scene_id: str, seed: int) -> str:
    return f"{scene_id}__seed{seed}.csv"


@dataclass(frozen=True)
class RunConfig:
    manifest_path: str
    traj_dir: str | None = None
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    split: tuple[int, int] = (30, 45)
    split_seed: int = 0
    calibration_ids: tuple[str, ...] | None = None
    evaluation_ids: tuple[str, ...] | None = None
    scaling_variants: frozenset = SCALED_VARIANTS
    detection: DetectionConfig = DetectionConfig()
    outlier_threshold_mps2: float = OUTLIER_THRESHOLD_MPS2
    workers: int = 1
    # only used when trajectories are simulated in memory (traj_dir is None)
    degradations: tuple[DegradationRule, ...] = ()
    fit_seeds: tuple[int, ...] = (999, 777)
    eval_seeds: tuple[int, ...] = (42, 123)
    mts_seed_average: bool = False
    height_adjust_with_mts: bool = False
    ratio_through_origin: bool = False

    def __post_init__(self):
        object.__setattr__(self, "manifest_path", str(self.manifest_path))
        if self.traj_dir is not None:
            object.__setattr__(self, "traj_dir", str(self.traj_dir))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "split", tuple(int(n) for n in self.split))
        object.__setattr__(self, "scaling_variants", frozenset(Variant(v) for v in self.scaling_variants))
        object.__setattr__(self, "degradations", tuple(self.degradations))
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ValueError("seeds must be non-empty and distinct")
        if any(n < 0 for n in self.split):
            raise ValueError("split counts must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def echo(self) -> dict:
        """Configuration as recorded in reports (worker count lives in provenance)."""
        d = {
            "manifest_path": self.manifest_path,
            "traj_dir": self.traj_dir,
            "seeds": list(self.seeds),
            "split": list(self.split),
            "split_seed": self.split_seed,
            "calibration_ids": None if self.calibration_ids is None else list(self.calibration_ids),
            "evaluation_ids": None if self.evaluation_ids is None else list(self.evaluation_ids),
            "scaling_variants": sorted(v.value for v in self.scaling_variants),
            "detection": asdict(self.detection),
            "outlier_threshold_mps2": self.outlier_threshold_mps2,
            "degradations": json.loads(dump_degradations(self.degradations))["degradations"],
            "fit_seeds": list(self.fit_seeds),
            "eval_seeds": list(self.eval_seeds),
            "mts_seed_average": self.mts_seed_average,
            "height_adjust_with_mts": self.height_adjust_with_mts,
            "ratio_through_origin": self.ratio_through_origin,
        }
        return d


# -- aggregation ------------------------------------------------------------


def _mean(values) -> float:
    values = sorted(values)
    return math.fsum(values) / len(values)


def aggregate(records: Iterable) -> dict:
    """Summary statistics over (scene_id, seed, value) triples.

    The headline mean averages seeds within each scene first and then the
    scene means; the order statistics pool every (scene, seed) value.
    A bare number is accepted as a record of its own scene.
    """
    by_scene: dict[str, list[float]] = {}
    pooled = []
    for i, rec in enumerate(records):
        if isinstance(rec, (int, float)):
            sid, value = f"#{i}", float(rec)
        else:
            sid, _, value = rec
        by_scene.setdefault(sid, []).append(float(value))
        pooled.append(float(value))
    if not pooled:
        raise EmptyRun("no records to aggregate")
    arr = np.sort(np.array(pooled))
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    return {
        "mean": _mean(_mean(v) for v in by_scene.values()),
        "median": float(med),
        "min": float(arr[0]),
        "max": float(arr[-1]),
        "q1": float(q1),
        "q3": float(q3),
        "n_samples": len(pooled),
        "n_scenes": len(by_scene),
        "mean_over": "scene means of per-seed values",
        "pooled_over": "all (scene, seed) values",
    }


def _maybe_aggregate(records) -> dict | None:
    records = list(records)
    return aggregate(records) if records else None


# -- per-task evaluation ----------------------------------------------------


def _error_row(scene_id, seed, exc: Exception) -> dict:
    err = {"kind": getattr(exc, "kind", type(exc).__name__), "message": str(exc)}
    ball = getattr(exc, "ball_id", None)
    if ball is not None:
        err["ball_id"] = ball
    return {"scene_id": scene_id, "seed": seed, "status": "error", "error": err}


def _load_or_simulate(scene: SceneSpec, seed: int, traj_dir, degradations):
    if traj_dir is None:
        return simulate_scene(scene, degradations_for(degradations, scene.scene_id, seed), seed)
    path = Path(traj_dir) / trajectory_filename(scene.scene_id, seed)
    if not path.exists():
        raise MissingTrajectory(f"no trajectory file {path.name}")
    trajs = read_trajectories(path)
    by_id = {t.ball_id: t for t in trajs}
    missing = [b for b in scene.ball_ids() if b not in by_id]
    if missing:
        raise MissingTrajectory(f"{path.name} lacks ball(s) {missing}")
    return [by_id[b] for b in scene.ball_ids()]


def _impact_dict(ev) -> dict:
    return {
        "impact_time_s": ev.impact_time_s,
        "crossing_frame": ev.crossing_frame,
        "detection_frame": ev.detection_frame,
        "fallen_distance_px": ev.fallen_distance_px,
        "velocity_at_crossing_px_per_frame": ev.velocity_at_crossing_px_per_frame,
    }


def _evaluate(task) -> dict:
    protocol, scene, seed, traj_dir, degradations, detection = task
    try:
        trajs = _load_or_simulate(scene, seed, traj_dir, degradations)
        ground = ground_line(scene)
        row = {"scene_id": scene.scene_id, "seed": seed, "status": "ok"}
        if protocol is Protocol.SINGLE_BALL:
            traj = trajs[0]
            ev = detect_impact(traj, ground, detection)
            row["h_m"] = scene.drop_heights_m[0]
            row["impact"] = _impact_dict(ev)
            row["warnings"] = list(ev.warnings)
            try:
                h_adj, phi = height_adjusted(traj, scene.drop_heights_m[0], ev)
                row["tilt_deg"], row["h_adj_m"] = phi, h_adj
            except GravlabError as exc:
                row["tilt_error"] = _error_row(scene.scene_id, seed, exc)["error"]
        elif protocol is Protocol.TWO_BALL:
            res = two_ball(trajs, scene.drop_heights_m, ground, detection,
                           scene_id=scene.scene_id, seed=seed)
            row["heights_m"] = list(scene.drop_heights_m)
            row["two_ball"] = res.to_dict()
        else:
            expected = incline_expected(scene.gravity_mps2, scene.incline_angle_deg)
            measured = incline_measured(trajs[0], scene, detection)
            row["theta_deg"] = scene.incline_angle_deg
            row["incline"] = {
                "expected_mps2": expected,
                "measured_mps2": measured,
                "ratio": measured / expected,
            }
        return row
    except GravlabError as exc:
        return _error_row(scene.scene_id, seed, exc)


def _run_tasks(tasks: list, workers: int) -> list[dict]:
    if workers == 1 or len(tasks) <= 1:
        return [_evaluate(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate, tasks, chunksize=chunk))


# -- report -----------------------------------------------------------------


@dataclass
class BenchmarkReport:
    protocol: str
    config: dict
    records: list[dict]
    models: dict
    statistics: dict
    checks: dict
    provenance: dict = field(default_factory=dict)

    def to_dict(self, include_provenance: bool = True) -> dict:
        d = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "protocol": self.protocol,
            "config": self.config,
            "models": self.models,
            "statistics": self.statistics,
            "checks": self.checks,
            "records": self.records,
        }
        if include_provenance:
            d["provenance"] = self.provenance
        return d

    def to_json(self, include_provenance: bool = True) -> str:
        return json.dumps(self.to_dict(include_provenance), indent=2, allow_nan=False) + "\n"

    @property
    def errors(self) -> list[dict]:
        return [r for r in self.records if r["status"] == "error"]

    def error_kinds(self) -> list[str]:
        return [r["error"]["kind"] for r in self.errors]

    def ok(self) -> bool:
        return all(self.checks.values())


def write_report(report: BenchmarkReport, path) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")


def read_report(path, check: bool = True) -> BenchmarkReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ReportConsistencyError(f"unsupported report schema {doc.get('schema_version')!r}")
    rep = BenchmarkReport(
        protocol=doc["protocol"],
        config=doc["config"],
        records=doc["records"],
        models=doc["models"],
        statistics=doc["statistics"],
        checks=doc["checks"],
        provenance=doc.get("provenance", {}),
    )
    if check:
        again = compute_statistics(
            Protocol(rep.protocol), rep.records, rep.config.get("ratio_through_origin", False)
        )
        if _jsonable(again) != rep.statistics:
            raise ReportConsistencyError("statistics do not match the per-scene records")
    return rep


def _jsonable(obj):
    return json.loads(json.dumps(obj))


def compute_statistics(protocol: Protocol, records: Sequence[dict], through_origin=False) -> dict:
    """Statistics block derived purely from per-scene records."""
    ok = [r for r in records if r["status"] == "ok"]
    stats: dict = {"n_records": len(records), "n_ok": len(ok), "n_errors": len(records) - len(ok)}
    if protocol is Protocol.SINGLE_BALL:
        for variant in Variant:
            ests = [(r["scene_id"], r["seed"], r["estimates"][variant.value])
                    for r in ok if variant.value in r.get("estimates", {})]
            if not ests:
                continue
            stats[variant.value] = {
                "all": aggregate((s, sd, e["g_eff_mps2"]) for s, sd, e in ests),
                "excluding_outliers": _maybe_aggregate(
                    (s, sd, e["g_eff_mps2"]) for s, sd, e in ests if not e["outlier"]
                ),
                "n_outliers": sum(e["outlier"] for _, _, e in ests),
            }
    elif protocol is Protocol.TWO_BALL:
        res = [(r["scene_id"], r["seed"], r["two_ball"]) for r in ok]
        if res:
            stats["delta_t_frames"] = aggregate((s, sd, t["delta_t_frames"]) for s, sd, t in res)
            stats["timing_ratio"] = aggregate((s, sd, t["timing_ratio"]) for s, sd, t in res)
            try:
                fit = ratio_slope(
                    [(t["height_ratio"], t["timing_ratio"]) for _, _, t in res], through_origin
                )
                stats["ratio_fit"] = {"slope": fit.slope, "intercept": fit.intercept,
                                      "n_points": fit.n_points}
            except GravlabError as exc:
                stats["ratio_fit"] = {"error": {"kind": exc.kind, "message": str(exc)}}
    else:
        inc = [(r["scene_id"], r["seed"], r["incline"]) for r in ok]
        if inc:
            stats["measured_over_expected"] = aggregate((s, sd, v["ratio"]) for s, sd, v in inc)
            stats["measured_mps2"] = aggregate((s, sd, v["measured_mps2"]) for s, sd, v in inc)
    return stats


def _split(config: RunConfig, scene_ids: list[str]) -> tuple[list[str], list[str]]:
    if config.calibration_ids is not None or config.evaluation_ids is not None:
        cal = list(config.calibration_ids or ())
        ev = list(config.evaluation_ids or [s for s in scene_ids if s not in set(cal)])
    else:
        n_cal, n_eval = config.split
        if n_cal + n_eval > len(scene_ids):
            raise ValueError(
                f"split {n_cal}+{n_eval} exceeds the {len(scene_ids)} scenes in the manifest"
            )
        order = np.random.default_rng(config.split_seed).permutation(len(scene_ids))
        shuffled = [sorted(scene_ids)[i] for i in order]
        cal, ev = shuffled[:n_cal], shuffled[n_cal : n_cal + n_eval]
    overlap = sorted(set(cal) & set(ev))
    if overlap:
        raise CalibrationLeakage(f"scenes in both calibration and evaluation: {overlap}")
    return cal, ev


def _scenes_for(config: RunConfig, protocol: Protocol) -> list[SceneSpec]:
    scenes = [s for s in read_manifest(config.manifest_path) if s.protocol is protocol]
    if not scenes:
        raise EmptyRun(f"manifest has no {protocol.value} scenes")
    return scenes


def _evaluate_all(config: RunConfig, protocol: Protocol, scenes) -> list[dict]:
    tasks = [
        (protocol, scene, seed, config.traj_dir, config.degradations, config.detection)
        for scene in scenes
        for seed in config.seeds
    ]
    return _run_tasks(tasks, config.workers)


def _finish(config, protocol, records, models, extra_checks=None) -> BenchmarkReport:
    stats = compute_statistics(protocol, records, config.ratio_through_origin)
    checks = {"statistics_consistent": _jsonable(stats) == _jsonable(
        compute_statistics(protocol, _jsonable(records), config.ratio_through_origin))}
    checks.update(extra_checks or {})
    echo = config.echo()
    config_hash = hashlib.sha256(json.dumps(echo, sort_keys=True).encode()).hexdigest()
    provenance = {
        "tool_version": __version__,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "workers": config.workers,
        "config_hash": config_hash,
        "python": platform.python_version(),
    }
    return BenchmarkReport(
        protocol=protocol.value,
        config=echo,
        records=_jsonable(records),
        models=_jsonable(models),
        statistics=_jsonable(stats),
        checks=checks,
        provenance=provenance,
    )


def _set_error(row: dict, variant: Variant, exc: GravlabError) -> None:
    row.setdefault("estimate_errors", {})[variant.value] = {"kind": exc.kind, "message": str(exc)}


def run_single_ball(config: RunConfig) -> BenchmarkReport:
    """Raw and time-scaled effective gravity over every (scene, seed)."""
    protocol = Protocol.SINGLE_BALL
    scenes = _scenes_for(config, protocol)
    records = _evaluate_all(config, protocol, scenes)
    ok = [r for r in records if r["status"] == "ok"]
    thr = config.outlier_threshold_mps2

    raw = {}
    for r in ok:
        est = raw_estimate(r["scene_id"], r["seed"], r["h_m"], r["impact"]["impact_time_s"],
                           outlier_threshold_mps2=thr)
        raw[(r["scene_id"], r["seed"])] = est
        r["estimates"] = {Variant.RAW.value: est.to_dict()}

    models: dict = {}
    checks = {}
    variants = config.scaling_variants
    mts_model = None
    if Variant.MEAN_SCALED in variants or (
        Variant.HEIGHT_ADJUSTED in variants and config.height_adjust_with_mts
    ):
        cal, ev = _split(config, [s.scene_id for s in scenes])
        checks["split_disjoint"] = not (set(cal) & set(ev))
        cal_set, ev_set = set(cal), set(ev)
        if config.mts_seed_average:
            per_scene: dict[str, list] = {}
            for (sid, _), e in raw.items():
                if sid in cal_set:
                    per_scene.setdefault(sid, []).append(e)
            pairs = [(_mean(e.t_eff_s for e in es), es[0].t_gt_s) for es in per_scene.values()]
        else:
            pairs = [(e.t_eff_s, e.t_gt_s) for (sid, _), e in sorted(raw.items()) if sid in cal_set]
        models["split"] = {"calibration": sorted(cal), "evaluation": sorted(ev)}
        try:
            mts_model = fit_mts(pairs, cal)
            models["mts"] = mts_model.mts
            models["mts_pairs"] = len(pairs)
        except GravlabError as exc:
            models["mts_error"] = {"kind": exc.kind, "message": str(exc)}
        if mts_model is not None and Variant.MEAN_SCALED in variants:
            for r in ok:
                if r["scene_id"] in ev_set:
                    est = apply_scaling(mts_model, raw[(r["scene_id"], r["seed"])])
                    r["estimates"][Variant.MEAN_SCALED.value] = est.to_dict()

    if Variant.PER_SAMPLE_SCALED in variants:
        fit_seeds, eval_seeds = set(config.fit_seeds), set(config.eval_seeds)
        factors = {}
        for scene in scenes:
            sid = scene.scene_id
            groups = {
                "fit": {sd: raw[(sid, sd)].t_eff_s for sd in config.fit_seeds if (sid, sd) in raw},
                "eval": {sd: raw[(sid, sd)].t_eff_s for sd in config.eval_seeds if (sid, sd) in raw},
            }
            rows = [r for r in ok if r["scene_id"] == sid and r["seed"] in eval_seeds]
            try:
                model = fit_per_sample({sid: groups}, {sid: fall_time(scene.drop_heights_m[0], EARTH_G)})
            except GravlabError as exc:
                for r in rows:
                    _set_error(r, Variant.PER_SAMPLE_SCALED, exc)
                continue
            factors[sid] = model.per_sample_factors[sid]
            for r in rows:
                est = apply_scaling(model, raw[(sid, r["seed"])])
                r["estimates"][Variant.PER_SAMPLE_SCALED.value] = est.to_dict()
        models["per_sample_factors"] = {k: factors[k] for k in sorted(factors)}
        models["per_sample_seeds"] = {"fit": sorted(fit_seeds), "eval": sorted(eval_seeds)}

    if Variant.HEIGHT_ADJUSTED in variants:
        for r in ok:
            if "h_adj_m" not in r:
                msg = r.get("tilt_error", {}).get("message", "no tilt measurement")
                _set_error(r, Variant.HEIGHT_ADJUSTED, DegenerateTrajectory(msg))
                continue
            est = raw[(r["scene_id"], r["seed"])]
            if config.height_adjust_with_mts:
                if mts_model is None or r["scene_id"] not in set(models["split"]["evaluation"]):
                    continue
                est = apply_scaling(mts_model, est)
            adj = height_adjusted_estimate(est, r["h_adj_m"])
            r["estimates"][Variant.HEIGHT_ADJUSTED.value] = adj.to_dict()

    return _finish(config, protocol, records, models, checks)


def run_two_ball(config: RunConfig) -> BenchmarkReport:
    """Timing ratios, equal-distance lags and the ratio line over two-ball scenes."""
    protocol = Protocol.TWO_BALL
    scenes = _scenes_for(config, protocol)
    records = _evaluate_all(config, protocol, scenes)
    return _finish(config, protocol, records, {})


def run_incline(config: RunConfig) -> BenchmarkReport:
    """Measured versus expected g sin(theta) over incline scenes."""
    protocol = Protocol.INCLINE
    scenes = _scenes_for(config, protocol)
    records = _evaluate_all(config, protocol, scenes)
    return _finish(config, protocol, records, {})


RUNNERS = {
    Protocol.SINGLE_BALL: run_single_ball,
    Protocol.TWO_BALL: run_two_ball,
    Protocol.INCLINE: run_incline,
}


def run(config: RunConfig, protocol: Protocol | str | None = None) -> BenchmarkReport:
    """Dispatch on ``protocol``, or on the single protocol present in the manifest."""
    if protocol is None:
        present = {s.protocol for s in read_manifest(config.manifest_path)}
        if len(present) != 1:
            raise ValueError(f"manifest mixes protocols {sorted(p.value for p in present)}")
        protocol = present.pop()
    return RUNNERS[Protocol(protocol)](config)


def ht_rows(report: BenchmarkReport) -> list[tuple]:
    """(variant, scene_id, seed, h_m, t_s, g_eff) rows for h-t scatter plots."""
    rows = []
    for r in report.records:
        for variant, e in r.get("estimates", {}).items():
            rows.append((variant, r["scene_id"], r["seed"], e["h_used_m"], e["t_eff_s"],
                         e["g_eff_mps2"]))
    return rows
