import pytest

from gravlab.scene import (
    BallSpec,
    CameraSpec,
    Protocol,
    SceneSpec,
    two_ball_offsets,
    write_manifest,
)

BALL = BallSpec(diameter_m=0.24, label="basketball")


def single_scene(h=4.0, scene_id="drop", *, distance=None, cam_height=None, fps=24.0,
                 duration=2.0, seed=0, gravity=9.81):
    # 3h keeps the whole fall inside the 720 px frame at half height
    distance = max(3.0 * h, 2.0) if distance is None else distance
    cam = CameraSpec(distance_m=distance, height_m=h / 2 if cam_height is None else cam_height)
    return SceneSpec(scene_id, Protocol.SINGLE_BALL, (h,), (0.0,), cam, BALL,
                     fps=fps, duration_s=duration, seed=seed, gravity_mps2=gravity)


def two_ball_scene(h_a=1.0, h_b=2.0, scene_id="pair", *, distance=None, duration=2.0, seed=0):
    distance = max(3.0 * max(h_a, h_b), 2.0) if distance is None else distance
    cam = CameraSpec(distance_m=distance, height_m=max(h_a, h_b) / 2)
    return SceneSpec(scene_id, Protocol.TWO_BALL, (h_a, h_b), two_ball_offsets(BALL), cam, BALL,
                     duration_s=duration, seed=seed)


def incline_scene(h=2.0, theta=45.0, scene_id="slide", *, distance=10.0):
    cube = BallSpec(diameter_m=0.2, label="cube")
    cam = CameraSpec(distance_m=distance, height_m=h / 2)
    return SceneSpec(scene_id, Protocol.INCLINE, (h,), (0.0,), cam, cube, incline_angle_deg=theta)


@pytest.fixture
def earth_scene():
    return single_scene(4.0)


@pytest.fixture
def manifest_of(tmp_path):
    def _write(scenes, name="manifest.json"):
        path = tmp_path / name
        write_manifest(scenes, path)
        return path

    return _write


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
