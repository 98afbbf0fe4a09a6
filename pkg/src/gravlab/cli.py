"""Command-line entry point.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .bench import (
    DEFAULT_SEEDS,
    SCALED_VARIANTS,
    RunConfig,
    ht_rows,
    run,
    trajectory_filename,
    write_report,
)
from .detect import DetectionConfig
from .errors import (
    DegradationParseError,
    GravlabError,
    ManifestParseError,
    ManifestValidationError,
)
from .metrics import Variant
from .scene import Protocol, generate_scenes, manifest_hash, read_manifest, write_manifest
from .simulate import (
    degradations_for,
    load_degradations,
    read_trajectories,
    simulate_scene,
    trajectories_text,
)
from .strobe import StrobeReference, StrobeSpec, build_composite, write_svg

log = logging.getLogger("gravlab")

SCALING_CHOICES = {
    "none": frozenset(),
    "mean": frozenset({Variant.MEAN_SCALED}),
    "per-sample": frozenset({Variant.PER_SAMPLE_SCALED}),
    "height": frozenset({Variant.HEIGHT_ADJUSTED}),
    "all": SCALED_VARIANTS,
}


class UsageError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _default_workers() -> int:
    env = os.environ.get("GRAVLAB_WORKERS")
    if not env:
        return 1
    try:
        return _positive_int(env)
    except (ValueError, argparse.ArgumentTypeError):
        raise UsageError(f"GRAVLAB_WORKERS must be a positive integer, got {env!r}") from None


def _add_detection_flags(p):
    g = p.add_argument_group("impact detection")
    g.add_argument("--epsilon", type=_positive_float, default=1.0,
                   help="velocity threshold in pixels/frame (default 1.0)")
    g.add_argument("--no-subframe", action="store_true", help="disable sub-frame refinement")
    g.add_argument("--frame-resolution", action="store_true",
                   help="impact times on the frame grid (implies --no-subframe)")
    g.add_argument("--paper-faithful", dest="frame_resolution", action="store_true",
                   help=argparse.SUPPRESS)


def _detection(args) -> DetectionConfig:
    return DetectionConfig(
        velocity_epsilon_px_per_frame=args.epsilon,
        subframe_refinement=not (args.no_subframe or args.frame_resolution),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gravlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenes", help="write a benchmark manifest")
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--protocol", choices=[x.value for x in Protocol], default="single")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", "--out", dest="manifest", required=True)
    p.add_argument("--fps", type=_positive_float, default=24.0)
    p.add_argument("--duration", type=_positive_float, default=2.0)
    p.add_argument("--gravity", type=_positive_float, default=9.81)
    p.add_argument("--prompt", default=None, help="prompt text stored with every scene")

    p = sub.add_parser("simulate", help="render trajectory files for every scene and seed")
    p.add_argument("--manifest", required=True)
    p.add_argument("--degradations", default=None, help="degradation file (JSON)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=list(DEFAULT_SEEDS))

    p = sub.add_parser("eval", help="evaluate trajectories and write a report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--traj-dir", default=None,
                   help="directory of trajectory files; simulated in memory when omitted")
    p.add_argument("--degradations", default=None, help="applied only when simulating in memory")
    p.add_argument("--protocol", choices=[x.value for x in Protocol], default=None)
    p.add_argument("--out", required=True, help="report path")
    p.add_argument("--plot-data", default=None, help="h-t scatter CSV")
    p.add_argument("--plot-svg", default=None, help="h-t scatter chart (SVG)")
    p.add_argument("--scaling", nargs="+", choices=sorted(SCALING_CHOICES), default=["all"])
    p.add_argument("--split", type=int, nargs=2, metavar=("CAL", "EVAL"), default=[30, 45])
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--seeds", type=int, nargs="+", default=list(DEFAULT_SEEDS))
    p.add_argument("--fit-seeds", type=int, nargs="+", default=[999, 777])
    p.add_argument("--eval-seeds", type=int, nargs="+", default=[42, 123])
    p.add_argument("--mts-seed-average", action="store_true",
                   help="average seeds per scene before fitting the mean time scale")
    p.add_argument("--height-with-mts", action="store_true",
                   help="combine the height adjustment with the mean time scale")
    p.add_argument("--through-origin", action="store_true", help="slope-only ratio fit")
    p.add_argument("--outlier-threshold", type=_positive_float, default=50.0)
    p.add_argument("--allow-missing", action="store_true",
                   help="record absent trajectory files as error rows")
    p.add_argument("--workers", type=_positive_int, default=None)
    _add_detection_flags(p)

    p = sub.add_parser("strobe", help="render a stroboscopic composite (SVG)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scene", required=True, help="scene id")
    p.add_argument("--traj", nargs="+", default=None,
                   help="trajectory file(s) for the scene; simulated when omitted")
    p.add_argument("--degradations", default=None, help="applied only when simulating")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--interval", type=float, default=None, help="seconds between strobes")
    p.add_argument("--reference", choices=[x.value for x in StrobeReference], default="earth")
    p.add_argument("--no-marker", action="store_true")
    p.add_argument("--out", required=True)
    _add_detection_flags(p)

    p = sub.add_parser("report-diff", help="compare two reports field by field")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--include-provenance", action="store_true")
    return parser


def cmd_gen_scenes(args) -> int:
    scenes = generate_scenes(
        args.count, args.protocol, args.seed,
        fps=args.fps, duration_s=args.duration, gravity_mps2=args.gravity, prompt=args.prompt,
    )
    write_manifest(scenes, args.manifest)
    print(f"wrote {len(scenes)} {args.protocol} scenes to {args.manifest}")
    return 0


def cmd_simulate(args) -> int:
    scenes = read_manifest(args.manifest)
    rules = load_degradations(args.degradations) if args.degradations else []
    digest = manifest_hash(args.manifest)
    outputs, failures = [], []
    for scene in scenes:
        for seed in args.seeds:
            degs = degradations_for(rules, scene.scene_id, seed)
            try:
                trajs = simulate_scene(scene, degs, seed)
            except GravlabError as exc:
                failures.append(f"{scene.scene_id} seed {seed}: {exc.kind}: {exc}")
                continue
            text = trajectories_text(
                trajs,
                scene_id=scene.scene_id,
                seed=seed,
                manifest_sha256=digest,
                degradations=json.dumps([d.to_dict() for d in degs], separators=(",", ":")),
            )
            outputs.append((trajectory_filename(scene.scene_id, seed), text))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in outputs:
        (out_dir / name).write_text(text, encoding="utf-8")
    print(f"wrote {len(outputs)} trajectory files to {out_dir}")
    for line in failures:
        print(f"error: {line}", file=sys.stderr)
    return 1 if failures else 0


def _write_plot_data(report, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "scene_id", "seed", "h_m", "t_s", "g_eff_mps2"])
        for row in ht_rows(report):
            w.writerow([row[0], row[1], row[2], *(repr(float(x)) for x in row[3:])])


def _write_plot_svg(report, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    matplotlib.rcParams["svg.hashsalt"] = "gravlab"
    rows = ht_rows(report)
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant in Variant:
        pts = [(r[4], r[3]) for r in rows if r[0] == variant.value]
        if pts:
            t, h = zip(*pts)
            ax.scatter(t, h, s=12, label=variant.value)
    if rows:
        tt = np.linspace(0, max(r[4] for r in rows) * 1.05, 100)
        ax.plot(tt, 0.5 * 9.81 * tt**2, "--", color="gray", label="9.81 m/s²")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("h (m)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_eval(args) -> int:
    variants = frozenset().union(*(SCALING_CHOICES[s] for s in args.scaling))
    rules = tuple(load_degradations(args.degradations)) if args.degradations else ()
    workers = args.workers or _default_workers()
    try:
        config = RunConfig(
            manifest_path=args.manifest,
            traj_dir=args.traj_dir,
            seeds=tuple(args.seeds),
            split=tuple(args.split),
            split_seed=args.split_seed,
            scaling_variants=variants,
            detection=_detection(args),
            outlier_threshold_mps2=args.outlier_threshold,
            workers=workers,
            degradations=rules,
            fit_seeds=tuple(args.fit_seeds),
            eval_seeds=tuple(args.eval_seeds),
            mts_seed_average=args.mts_seed_average,
            height_adjust_with_mts=args.height_with_mts,
            ratio_through_origin=args.through_origin,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.traj_dir and not args.allow_missing:
        scenes = read_manifest(args.manifest)
        if args.protocol:
            scenes = [s for s in scenes if s.protocol.value == args.protocol]
        missing = [
            trajectory_filename(s.scene_id, seed)
            for s in scenes
            for seed in config.seeds
            if not (Path(args.traj_dir) / trajectory_filename(s.scene_id, seed)).exists()
        ]
        if missing:
            for name in missing:
                print(f"error: missing trajectory {name}", file=sys.stderr)
            print("pass --allow-missing to record them as error rows", file=sys.stderr)
            return 1
    try:
        report = run(config, args.protocol)
    except ValueError as exc:
        if isinstance(exc, GravlabError):
            raise
        raise UsageError(str(exc)) from None
    write_report(report, args.out)
    if args.plot_data:
        _write_plot_data(report, args.plot_data)
    if args.plot_svg:
        _write_plot_svg(report, args.plot_svg)
    print(f"wrote {report.protocol} report to {args.out} "
          f"({report.statistics['n_ok']} ok, {report.statistics['n_errors']} error rows)")
    failed = [k for k, v in report.checks.items() if not v]
    if failed:
        print(f"error: self-checks failed: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_strobe(args) -> int:
    try:
        spec = StrobeSpec(
            interval_s=args.interval,
            reference=args.reference,
            show_expected_marker=not args.no_marker,
            output_path=args.out,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    scenes = {s.scene_id: s for s in read_manifest(args.manifest)}
    if args.scene not in scenes:
        raise UsageError(f"scene {args.scene!r} is not in {args.manifest}")
    scene = scenes[args.scene]
    if args.traj:
        trajs = [t for path in args.traj for t in read_trajectories(path)]
        by_id = {t.ball_id: t for t in trajs}
        trajs = [by_id[b] for b in scene.ball_ids() if b in by_id]
        if len(trajs) != scene.n_balls:
            raise UsageError(f"expected balls {scene.ball_ids()} in the trajectory files")
    else:
        rules = load_degradations(args.degradations) if args.degradations else []
        trajs = simulate_scene(scene, degradations_for(rules, scene.scene_id, args.seed), args.seed)
    comp = build_composite(scene, trajs, spec, _detection(args))
    write_svg(comp, args.out)
    print(f"wrote {len(comp.times_s)}-strobe composite to {args.out}")
    return 0


def _diff(a, b, path, rtol, atol, out):
    if isinstance(a, dict) and isinstance(b, dict):
        for k in list(a) + [k for k in b if k not in a]:
            if k not in a or k not in b:
                out.append(f"{path}.{k}: present in only one report")
            else:
                _diff(a[k], b[k], f"{path}.{k}", rtol, atol, out)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            out.append(f"{path}: length {len(a)} != {len(b)}")
        for i, (x, y) in enumerate(zip(a, b)):
            _diff(x, y, f"{path}[{i}]", rtol, atol, out)
    elif (isinstance(a, (int, float)) and isinstance(b, (int, float))
          and not isinstance(a, bool) and not isinstance(b, bool)):
        if abs(a - b) > atol + rtol * abs(b):
            out.append(f"{path}: {a!r} != {b!r}")
    elif a != b:
        out.append(f"{path}: {a!r} != {b!r}")


def report_diff(a: dict, b: dict, rtol=1e-9, atol=1e-12, include_provenance=False) -> list[str]:
    """Human-readable list of differences between two report documents."""
    if not include_provenance:
        a = {k: v for k, v in a.items() if k != "provenance"}
        b = {k: v for k, v in b.items() if k != "provenance"}
    out: list[str] = []
    _diff(a, b, "$", rtol, atol, out)
    return out


def cmd_report_diff(args) -> int:
    docs = [json.loads(Path(p).read_text(encoding="utf-8")) for p in (args.a, args.b)]
    diffs = report_diff(*docs, rtol=args.rtol, atol=args.atol,
                        include_provenance=args.include_provenance)
    for line in diffs:
        print(line)
    if diffs:
        print(f"{len(diffs)} difference(s)")
        return 1
    print("reports match")
    return 0


COMMANDS = {
    "gen-scenes": cmd_gen_scenes,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
    "strobe": cmd_strobe,
    "report-diff": cmd_report_diff,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ManifestParseError, ManifestValidationError,
            DegradationParseError) as exc:
        print(f"gravlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (GravlabError, OSError) as exc:
        print(f"gravlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
