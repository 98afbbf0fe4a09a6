import json

import pytest

from gravlab.cli import main, report_diff
from gravlab.scene import read_manifest


def gen(tmp_path, count=6, protocol="single", seed=3, name="m.json"):
    path = tmp_path / name
    assert main(["gen-scenes", "--count", str(count), "--protocol", protocol,
                 "--seed", str(seed), "--manifest", str(path)]) == 0
    return path


def test_gen_scenes_deterministic(tmp_path):
    a = gen(tmp_path, name="a.json")
    b = gen(tmp_path, name="b.json")
    assert a.read_bytes() == b.read_bytes()
    assert len(read_manifest(a)) == 6


def test_gen_two_ball_ratios(tmp_path):
    for scene in read_manifest(gen(tmp_path, 40, "two-ball")):
        h0, h1 = scene.drop_heights_m
        assert 0.25 <= h0 / h1 <= 3.5


@pytest.mark.parametrize("count", ["0", "-2", "x"])
def test_gen_scenes_bad_count(tmp_path, count, capsys):
    out = tmp_path / "m.json"
    assert main(["gen-scenes", "--count", count, "--manifest", str(out)]) == 2
    assert not out.exists()


def test_simulate_then_eval(tmp_path, capsys):
    manifest = gen(tmp_path)
    traj = tmp_path / "traj"
    assert main(["simulate", "--manifest", str(manifest), "--out-dir", str(traj),
                 "--seeds", "42", "123"]) == 0
    assert len(list(traj.glob("*.csv"))) == 12
    report = tmp_path / "r.json"
    plot = tmp_path / "ht.csv"
    svg = tmp_path / "ht.svg"
    rc = main(["eval", "--manifest", str(manifest), "--traj-dir", str(traj), "--out", str(report),
               "--seeds", "42", "123", "--scaling", "mean", "--split", "2", "4",
               "--plot-data", str(plot), "--plot-svg", str(svg), "--workers", "1"])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["statistics"]["Raw"]["all"]["mean"] == pytest.approx(9.81, rel=1e-3)
    assert doc["statistics"]["MeanScaled"]["all"]["n_scenes"] == 4
    assert plot.read_text().splitlines()[0] == "variant,scene_id,seed,h_m,t_s,g_eff_mps2"
    assert svg.read_text().lstrip().startswith("<?xml")


def test_plot_svg_is_reproducible(tmp_path):
    manifest = gen(tmp_path)
    svgs = []
    for i in range(2):
        svg = tmp_path / f"{i}.svg"
        assert main(["eval", "--manifest", str(manifest), "--out", str(tmp_path / f"{i}.json"),
                     "--scaling", "none", "--seeds", "42", "--plot-svg", str(svg)]) == 0
        svgs.append(svg.read_bytes())
    assert svgs[0] == svgs[1]


def test_unknown_degradation_kind(tmp_path, capsys):
    manifest = gen(tmp_path)
    bad = tmp_path / "d.json"
    bad.write_text(json.dumps({"schema_version": 1, "degradations": [{"kind": "Warp", "factor": 2}]}))
    traj = tmp_path / "traj"
    assert main(["simulate", "--manifest", str(manifest), "--degradations", str(bad),
                 "--out-dir", str(traj)]) == 2
    assert not traj.exists()
    assert "Warp" in capsys.readouterr().err


def test_dilation_file(tmp_path):
    manifest = tmp_path / "m.json"
    assert main(["gen-scenes", "--count", "4", "--seed", "1", "--duration", "3",
                 "--manifest", str(manifest)]) == 0
    degs = tmp_path / "d.json"
    degs.write_text(json.dumps({"schema_version": 1,
                                "degradations": [{"kind": "TimeDilation", "factor": 2.43}]}))
    report = tmp_path / "r.json"
    assert main(["eval", "--manifest", str(manifest), "--degradations", str(degs),
                 "--out", str(report), "--split", "2", "2", "--scaling", "mean"]) == 0
    doc = json.loads(report.read_text())
    assert doc["models"]["mts"] == pytest.approx(2.43, rel=0.01)


def test_missing_files(tmp_path, capsys):
    manifest = gen(tmp_path, 3)
    traj = tmp_path / "empty"
    traj.mkdir()
    report = tmp_path / "r.json"
    args = ["eval", "--manifest", str(manifest), "--traj-dir", str(traj), "--out", str(report),
            "--seeds", "42", "--scaling", "none"]
    assert main(args) == 1
    assert not report.exists()
    assert main(args + ["--allow-missing"]) == 0
    doc = json.loads(report.read_text())
    kinds = [r["error"]["kind"] for r in doc["records"]]
    assert kinds == ["MissingTrajectory"] * 3


def test_bad_manifest_exit_code(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text('{"schema_version": 1,\n "scenes": [\n}')
    assert main(["eval", "--manifest", str(path), "--out", str(tmp_path / "r.json")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_strobe(tmp_path):
    manifest = gen(tmp_path, 2, "two-ball")
    scene_id = read_manifest(manifest)[0].scene_id
    out = tmp_path / "s.svg"
    assert main(["strobe", "--manifest", str(manifest), "--scene", scene_id,
                 "--out", str(out)]) == 0
    assert 'class="expected"' in out.read_text()
    assert main(["strobe", "--manifest", str(manifest), "--scene", "nope",
                 "--out", str(out)]) == 2


def test_strobe_from_trajectory_file(tmp_path):
    manifest = gen(tmp_path, 1)
    traj = tmp_path / "traj"
    assert main(["simulate", "--manifest", str(manifest), "--out-dir", str(traj), "--seeds", "42"]) == 0
    (path,) = traj.glob("*.csv")
    out = tmp_path / "s.svg"
    assert main(["strobe", "--manifest", str(manifest), "--scene", "single-000",
                 "--traj", str(path), "--reference", "own", "--out", str(out)]) == 0


def test_report_diff(tmp_path, capsys):
    manifest = gen(tmp_path)
    reports = []
    for i, workers in enumerate(("1", "3")):
        path = tmp_path / f"r{i}.json"
        assert main(["eval", "--manifest", str(manifest), "--out", str(path), "--split", "2", "4",
                     "--workers", workers]) == 0
        reports.append(str(path))
    assert main(["report-diff", *reports]) == 0
    assert main(["report-diff", *reports, "--include-provenance"]) == 1


def test_report_diff_numbers():
    a = {"x": [1.0, 2.0], "y": "s", "provenance": {"w": 1}}
    assert report_diff(a, {"x": [1.0, 2.0 + 1e-13], "y": "s", "provenance": {"w": 2}}) == []
    assert report_diff(a, {"x": [1.0, 2.1], "y": "t"}) == ["$.x[1]: 2.0 != 2.1", "$.y: 's' != 't'"]


def test_workers_env(tmp_path, monkeypatch):
    manifest = gen(tmp_path, 4)
    monkeypatch.setenv("GRAVLAB_WORKERS", "2")
    path = tmp_path / "r.json"
    assert main(["eval", "--manifest", str(manifest), "--out", str(path), "--scaling", "none"]) == 0
    assert json.loads(path.read_text())["provenance"]["workers"] == 2


@pytest.mark.parametrize("flag", ["--frame-resolution", "--paper-faithful", "--no-subframe"])
def test_frame_resolution_flags(tmp_path, flag):
    manifest = tmp_path / "m.json"
    assert main(["gen-scenes", "--count", "1", "--manifest", str(manifest)]) == 0
    report = tmp_path / "r.json"
    assert main(["eval", "--manifest", str(manifest), "--out", str(report), "--scaling", "none",
                 "--seeds", "42", flag]) == 0
    impact = json.loads(report.read_text())["records"][0]["impact"]
    assert impact["impact_time_s"] * 24 == pytest.approx(impact["crossing_frame"])
