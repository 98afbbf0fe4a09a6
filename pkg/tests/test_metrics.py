import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gravlab.detect import detect_impact
from gravlab.errors import (
    CalibrationLeakage,
    DegenerateFit,
    DegenerateTrajectory,
    EmptyCalibration,
    MissingSeedGroup,
    NonPositiveRadius,
    NonPositiveTime,
)
from gravlab.metrics import (
    EARTH_G,
    ScalingKind,
    ScalingModel,
    Variant,
    apply_scaling,
    effective_gravity,
    fall_tilt_deg,
    fit_mts,
    fit_per_sample,
    height_adjusted,
    height_adjusted_estimate,
    incline_expected,
    incline_measured,
    pixel_scale,
    ratio_slope,
    raw_estimate,
    two_ball,
)
from gravlab.scene import generate_scenes, ground_line
from gravlab.simulate import DegradationSpec, PixelTrajectory, simulate_scene

from conftest import incline_scene, single_scene, two_ball_scene

pos = st.floats(0.05, 50.0, allow_nan=False)


def test_effective_gravity_values():
    t = math.sqrt(8 / 9.81)
    assert effective_gravity(4.0, t) == pytest.approx(9.81, rel=1e-12)
    assert effective_gravity(1.0, 1.0) == 2.0
    with pytest.raises(NonPositiveTime):
        effective_gravity(1.0, 0.0)


@settings(max_examples=200)
@given(h=pos, t=pos)
def test_effective_gravity_inverts_fall_time(h, t):
    g = effective_gravity(h, t)
    assert math.sqrt(2 * h / g) == pytest.approx(t, rel=1e-12)


def test_raw_estimate_fields():
    est = raw_estimate("a", 42, 2.0, 0.1)
    assert est.g_eff_mps2 == pytest.approx(400.0)
    assert est.outlier
    assert est.t_gt_s == pytest.approx(math.sqrt(4 / 9.81))
    assert est.variant is Variant.RAW
    assert not raw_estimate("a", 42, 2.0, 0.1, outlier_threshold_mps2=500).outlier


def test_fit_mts_mean():
    model = fit_mts([(2.0, 1.0), (3.0, 1.0), (1.0, 0.5)], ["a", "b"])
    assert model.mts == pytest.approx(7 / 3)
    assert model.kind is ScalingKind.MEAN
    assert model.is_calibration("a", 123)
    assert not model.is_calibration("c", 123)


def test_fit_mts_empty():
    with pytest.raises(EmptyCalibration):
        fit_mts([])


def test_fit_mts_rejects_zero_time():
    with pytest.raises(NonPositiveTime):
        fit_mts([(0.0, 1.0)])


@settings(max_examples=200)
@given(h=st.floats(0.5, 4.0), s=st.floats(0.2, 6.0))
def test_scaling_recovers_g(h, s):
    t_gt = math.sqrt(2 * h / EARTH_G)
    est = raw_estimate("e", 1, h, t_gt * s)
    model = ScalingModel(ScalingKind.MEAN, mts=s)
    out = apply_scaling(model, est)
    assert out.g_eff_mps2 == pytest.approx(EARTH_G, rel=1e-12)
    assert out.g_eff_mps2 == pytest.approx(est.g_eff_mps2 * s * s, rel=1e-12)
    assert out.t_eff_s == pytest.approx(t_gt, rel=1e-12)
    assert out.variant is Variant.MEAN_SCALED


def test_apply_scaling_refuses_calibration_scene():
    model = fit_mts([(2.0, 1.0)], [("a", 42)])
    with pytest.raises(CalibrationLeakage):
        apply_scaling(model, raw_estimate("a", 42, 1.0, 1.0))
    # other seed of the same scene is fine
    apply_scaling(model, raw_estimate("a", 123, 1.0, 1.0))


def test_per_sample_factors():
    groups = {
        "a": {"fit": {999: 2.0, 777: 2.2}, "eval": {42: 2.1}},
        "b": {"fit": {999: 0.5}, "eval": {42: 0.5, 123: 0.5}},
    }
    model = fit_per_sample(groups, {"a": 1.0, "b": 0.5})
    assert model.factor_for("a") == pytest.approx(2.1)
    assert model.factor_for("b") == pytest.approx(1.0)
    assert model.is_calibration("a", 999) and not model.is_calibration("a", 42)
    with pytest.raises(MissingSeedGroup):
        model.factor_for("zzz")
    with pytest.raises(CalibrationLeakage):
        apply_scaling(model, raw_estimate("a", 777, 1.0, 1.0))
    out = apply_scaling(model, raw_estimate("a", 42, 1.0, 2.1))
    assert out.t_eff_s == pytest.approx(1.0)
    assert out.variant is Variant.PER_SAMPLE_SCALED


def test_per_sample_missing_group():
    with pytest.raises(MissingSeedGroup):
        fit_per_sample({"a": {"fit": {999: 1.0}}}, {"a": 1.0})


def test_height_adjustment_thirty_degrees():
    scene = single_scene(2.0)
    (traj,) = simulate_scene(scene, [DegradationSpec.angled_fall(30.0)])
    h_adj, phi = height_adjusted(traj, 2.0)
    assert phi == pytest.approx(30.0, abs=1e-9)
    assert h_adj / 2.0 == pytest.approx(1.1547, abs=1e-4)


def test_height_adjustment_cap():
    traj = PixelTrajectory("b", 24.0, [0, 1], [0.0, 300.0], [0.0, 100.0], [10.0, 10.0])
    assert fall_tilt_deg(traj) == 45.0
    h_adj, _ = height_adjusted(traj, 1.0)
    assert h_adj == pytest.approx(math.sqrt(2))


def test_height_adjustment_degenerate():
    traj = PixelTrajectory("b", 24.0, [0, 1], [0.0, 1.0], [0.0, 2.0], [10.0, 10.0])
    with pytest.raises(DegenerateTrajectory):
        fall_tilt_deg(traj)


def test_height_adjusted_estimate():
    est = raw_estimate("a", None, 1.0, 0.5)
    adj = height_adjusted_estimate(est, 2.0)
    assert adj.g_eff_mps2 == pytest.approx(2 * est.g_eff_mps2)
    assert adj.variant is Variant.HEIGHT_ADJUSTED and adj.h_used_m == 2.0


def test_angled_fall_recovered_by_height_adjustment():
    scene = single_scene(2.0)
    (traj,) = simulate_scene(scene, [DegradationSpec.angled_fall(20.0)])
    ev = detect_impact(traj, ground_line(scene))
    raw = raw_estimate(scene.scene_id, None, 2.0, ev.impact_time_s)
    h_adj, _ = height_adjusted(traj, 2.0, ev)
    adj = height_adjusted_estimate(raw, h_adj)
    # path h/cos(phi) under g along the path takes sqrt(2h/(g cos phi))
    assert raw.g_eff_mps2 == pytest.approx(EARTH_G * math.cos(math.radians(20)), rel=1e-6)
    assert adj.g_eff_mps2 == pytest.approx(EARTH_G, rel=1e-6)


# -- two-ball -----------------------------------------------------------------


def test_two_ball_earth():
    scene = two_ball_scene(3.0, 1.5)
    res = two_ball(simulate_scene(scene), scene.drop_heights_m, ground_line(scene))
    assert res.lower_ball == "ball1" and res.upper_ball == "ball0"
    assert res.height_ratio == pytest.approx(0.5)
    assert res.timing_ratio == pytest.approx(0.5, rel=1e-9)
    assert res.delta_t_frames == pytest.approx(0.0, abs=1e-9)


def test_two_ball_slow_upper_lags():
    scene = two_ball_scene(1.0, 2.0, duration=3.0)
    trajs = simulate_scene(scene, [DegradationSpec.per_object_gravity(9.81, 9.81 * 0.7)])
    res = two_ball(trajs, scene.drop_heights_m, ground_line(scene))
    t1 = math.sqrt(2 / 9.81)
    assert res.delta_t_s == pytest.approx(t1 / math.sqrt(0.7) - t1, rel=1e-9)
    assert res.delta_t_frames > 0


def test_ratio_slope_exact_line():
    fit = ratio_slope([(0.2, 0.5), (0.4, 0.9), (0.8, 1.7)])
    assert fit.slope == pytest.approx(2.0) and fit.intercept == pytest.approx(0.1)
    assert fit.n_points == 3


def test_ratio_slope_through_origin():
    fit = ratio_slope([(1.0, 1.0), (2.0, 3.0)], through_origin=True)
    # sum(xy)/sum(x^2) = 7/5
    assert fit.slope == pytest.approx(1.4) and fit.intercept == 0.0


@pytest.mark.parametrize("pts", [[(0.5, 0.5)], [(0.5, 0.4), (0.5, 0.6)], []])
def test_ratio_slope_degenerate(pts):
    with pytest.raises(DegenerateFit):
        ratio_slope(pts)


# -- incline --------------------------------------------------------------------


def test_incline_expected_values():
    assert incline_expected(9.81, 30.0) == pytest.approx(4.905)
    assert incline_expected(9.81, 75.0) == pytest.approx(9.47573, abs=1e-5)
    assert incline_expected(9.81, 90.0) == pytest.approx(9.81)


def test_pixel_scale():
    assert pixel_scale(60.0, 0.24) == pytest.approx(0.002)
    with pytest.raises(NonPositiveRadius):
        pixel_scale(0.0, 0.24)


@pytest.mark.parametrize("scene", generate_scenes(8, "single", 2), ids=lambda s: s.scene_id)
def test_pixel_scale_matches_projection(scene):
    (traj,) = simulate_scene(scene)
    cam = scene.camera
    assert pixel_scale(traj.radius[0], scene.ball.diameter_m) == pytest.approx(
        cam.distance_m / cam.focal_px, rel=0.01
    )


@pytest.mark.parametrize("theta", [30.0, 45.0, 60.0, 75.0])
def test_incline_roundtrip(theta):
    scene = incline_scene(2.0, theta)
    (traj,) = simulate_scene(scene)
    a = incline_measured(traj, scene)
    assert a == pytest.approx(incline_expected(9.81, theta), rel=0.02)


def test_incline_needs_samples():
    scene = incline_scene()
    traj = PixelTrajectory("b", 24.0, [0, 1], [0.0, 1.0], [0.0, 1.0], [5.0, 5.0])
    with pytest.raises(DegenerateFit):
        incline_measured(traj, scene)
