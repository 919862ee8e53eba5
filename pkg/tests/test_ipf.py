import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipfmocap.imaging import render_silhouette
from ipfmocap.ipf import (
    IPFConfig,
    NoiseStreams,
    ParticleSet,
    TrackingError,
    initialize,
    measure,
    predict,
    select,
    track_silhouettes,
)
from ipfmocap.kinematics import ConfigError, DimensionError, default_skeleton, expand_interval

from .helpers import axis_camera, rod_flesh, rod_skeleton
from .oracles import cartesian_grid, loop_counts, loop_weight

SK = default_skeleton()
ROD = rod_skeleton(0.5)
ROD_FLESH = rod_flesh(0.05)
CAM = axis_camera(width=64, height=48)


def rod_pose(tx=0.0, ty=0.0, rx=math.pi / 2):
    return np.array([tx, ty, 5.0, 0.0, 0.0, rx])


def rod_sil(pose):
    return render_silhouette(ROD, ROD_FLESH, pose, CAM)


def rod_config(**kw):
    base = dict(
        interesting_dims=(3,),  # rz swings the rod within the image plane
        grid_step_deg=5.0,
        grid_levels=3,
        m_selected=3,
        noise_angle_deg=0.0,
        noise_translation_m=0.0,
        init_grid=((2, (5.0,)), (5, (90.0,))),
    )
    base.update(kw)
    return IPFConfig(**base)


def oracle_weight(pose, observed):
    return loop_weight(*loop_counts(observed.mask, rod_sil(pose).mask))


# -- config --------------------------------------------------------------------------


def test_default_population():
    cfg = IPFConfig()
    assert cfg.interval_size == 81 and cfg.population == 6561
    assert [SK.dofs[d].name for d in cfg.interesting_dims] == ["l_hip_flex", "l_knee_flex", "r_hip_flex", "r_knee_flex"]


@pytest.mark.parametrize(
    "kw",
    [
        dict(grid_levels=4),
        dict(grid_levels=0),
        dict(interesting_dims=(19, 19)),
        dict(interesting_dims=()),
        dict(interesting_dims=(31,)),
        dict(grid_step_deg=0.0),
        dict(m_selected=0),
        dict(noise_angle_deg=-1.0),
        dict(rng_seed=-3),
        dict(init_grid=((0, ()),)),
    ],
)
def test_config_rejects(kw):
    with pytest.raises(ConfigError):
        IPFConfig(**kw)


def test_noise_sigma_zero_on_interesting_dims():
    cfg = IPFConfig(noise_per_dof=((0, 0.05), (7, 3.0)))
    sigma = cfg.noise_sigma(SK)
    assert np.all(sigma[list(cfg.interesting_dims)] == 0)
    assert sigma[0] == 0.05 and sigma[7] == pytest.approx(math.radians(3.0))
    assert sigma[1] == 0.02 and sigma[10] == pytest.approx(math.radians(1.0))


def test_init_lattice_odometer_order():
    cfg = IPFConfig(init_grid=((0, (0.0, 1.0)), (19, (0.0, 10.0, 20.0))))
    lat = cfg.init_lattice(SK)
    assert lat.shape == (6, 31)
    np.testing.assert_allclose(lat[:, 0], [0, 0, 0, 1, 1, 1])
    np.testing.assert_allclose(np.degrees(lat[:, 19]), [0, 10, 20] * 2)


def test_init_lattice_outside_limits():
    with pytest.raises(ConfigError):
        IPFConfig(init_grid=((19, (90.0,)),)).init_lattice(SK)


# -- select ----------------------------------------------------------------------------


def test_select_heaviest_stable():
    poses = np.arange(4)[:, None] * np.ones((4, 31))
    ps = ParticleSet(poses, [0.1, 0.9, 0.5, 0.9])
    out = select(ps, 2)
    np.testing.assert_array_equal(out.poses[:, 0], [1, 3])
    np.testing.assert_array_equal(out.weights, [0.9, 0.9])


def test_select_skips_duplicates_and_pads():
    poses = np.zeros((4, 31))
    poses[2, 0] = 1.0
    ps = ParticleSet(poses, [0.3, 0.8, 0.5, 0.1])
    out = select(ps, 4)
    # two distinct poses exist: the zero pose (best weight 0.8) and the shifted one
    np.testing.assert_array_equal(out.poses[:, 0], [0, 1, 0, 0])
    np.testing.assert_array_equal(out.weights, [0.8, 0.5, 0.8, 0.8])


def test_select_negative_zero_is_duplicate():
    poses = np.zeros((2, 31))
    poses[1, 4] = -0.0
    out = select(ParticleSet(poses, [0.5, 0.4]), 2)
    np.testing.assert_array_equal(out.weights, [0.5, 0.5])


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=60), st.integers(1, 60))
def test_select_matches_sort_oracle(weights, m):
    n = len(weights)
    poses = np.arange(n)[:, None] * np.ones((n, 3))
    out = select(ParticleSet(poses, weights), m)
    order = sorted(range(n), key=lambda i: (-weights[i], i))
    expected = (order + [order[0]] * m)[:m]
    np.testing.assert_array_equal(out.poses[:, 0], expected)


# -- predict ----------------------------------------------------------------------------


def test_predict_count_and_zero_noise_grid():
    cfg = IPFConfig(noise_angle_deg=0.0, noise_translation_m=0.0, m_selected=2)
    sel = ParticleSet(np.tile(SK.neutral_pose(), (2, 1)), [1.0, 0.5])
    sel.poses[1, 19] = math.radians(10)
    out = predict(sel, cfg, SK, 3)
    assert len(out) == 2 * 81
    expected = np.concatenate(
        [expand_interval(p, list(cfg.interesting_dims), cfg.grid_step, 3, SK) for p in sel.poses]
    )
    np.testing.assert_array_equal(out.poses, expected)


def test_predict_two_particles_two_dims_cartesian_oracle():
    cfg = IPFConfig(interesting_dims=(19, 25), noise_angle_deg=0.0, noise_translation_m=0.0, m_selected=2)
    sel = ParticleSet(np.tile(SK.neutral_pose(), (2, 1)), [1.0, 1.0])
    sel.poses[0, 19] = math.radians(58)  # near the upper limit: clamping shows up
    sel.poses[1, 25] = math.radians(-12)
    out = predict(sel, cfg, SK, 1)
    expected = np.concatenate(
        [cartesian_grid(list(p), [19, 25], math.radians(5), 3, SK.lower, SK.upper) for p in sel.poses]
    )
    assert len(out) == 18
    np.testing.assert_array_equal(out.poses, expected)


def test_predict_noise_only_on_remaining_dims():
    cfg = IPFConfig(m_selected=1, noise_angle_deg=3.0, rng_seed=9)
    sel = ParticleSet(SK.neutral_pose()[None], [1.0])
    out = predict(sel, cfg, SK, 2)
    L = list(cfg.interesting_dims)
    grid = expand_interval(sel.poses[0], L, cfg.grid_step, 3, SK)
    np.testing.assert_array_equal(out.poses[:, L], grid[:, L])
    R = [d for d in range(31) if d not in L]
    assert np.any(out.poses[:, R] != sel.poses[0, R], axis=1).all()
    assert np.all(out.poses >= SK.lower) and np.all(out.poses <= SK.upper)


def test_predict_deterministic_and_seed_sensitive():
    sel = ParticleSet(np.tile(SK.neutral_pose(), (3, 1)), [1.0, 0.9, 0.8])
    a = predict(sel, IPFConfig(m_selected=3, rng_seed=4), SK, 5)
    b = predict(sel, IPFConfig(m_selected=3, rng_seed=4), SK, 5)
    c = predict(sel, IPFConfig(m_selected=3, rng_seed=5), SK, 5)
    d = predict(sel, IPFConfig(m_selected=3, rng_seed=4), SK, 6)
    np.testing.assert_array_equal(a.poses, b.poses)
    assert not np.array_equal(a.poses, c.poses)
    assert not np.array_equal(a.poses, d.poses)


@settings(max_examples=25, deadline=None)
@given(st.permutations(list(range(8))), st.integers(0, 2**31), st.integers(0, 1000), st.integers(1, 30))
def test_noise_streams_order_independent(order, seed, frame, width):
    bulk = NoiseStreams(seed, frame, width).normals(8)
    assert bulk.shape == (8, width)
    shuffled = NoiseStreams(seed, frame, width)
    for o in order:
        np.testing.assert_array_equal(shuffled.normal(o), bulk[o])


def test_noise_draws_independent_of_population():
    few = NoiseStreams(3, 4, 27).normals(5)
    many = NoiseStreams(3, 4, 27).normals(50)
    np.testing.assert_array_equal(few, many[:5])


def test_noise_streams_are_standard_normal():
    draws = NoiseStreams(1, 2, 27).normals(4000).ravel()
    assert abs(draws.mean()) < 0.01 and abs(draws.std() - 1.0) < 0.01
    assert abs(np.mean(np.abs(draws) < 1.0) - 0.6827) < 0.005
    a = NoiseStreams(1, 2, 27).normals(2)
    assert not np.array_equal(a[0], a[1])


# -- initialize / measure ------------------------------------------------------------


def test_single_pose_lattice():
    obs = [rod_sil(rod_pose())]
    ps = initialize(obs, rod_config(), ROD, ROD_FLESH, [CAM])
    assert len(ps) == 1
    np.testing.assert_array_equal(ps.poses[0], rod_pose())
    assert ps.weights[0] == obs[0].count


def test_lattice_search_finds_truth_and_weights_match_oracle():
    truth = rod_pose(tx=0.1, ty=-0.1)
    obs = rod_sil(truth)
    cfg = rod_config(init_grid=((0, (-0.1, 0.0, 0.1)), (1, (-0.1, 0.0, 0.1)), (2, (5.0,)), (5, (90.0,))))
    ps = initialize([obs], cfg, ROD, ROD_FLESH, [CAM])
    assert len(ps) == 9
    np.testing.assert_allclose(ps.poses[0], truth, atol=1e-12)
    assert list(ps.weights) == sorted(ps.weights, reverse=True)
    for p, w in zip(ps.poses, ps.weights):
        assert w == oracle_weight(p, obs)


def test_measure_rescore_and_lowest_index_tie():
    obs = rod_sil(rod_pose(tx=0.05))
    poses = np.array([rod_pose(tx=x) for x in (-0.2, 0.05, 0.3, 0.05)])
    weighted, best = measure(ParticleSet(poses, np.zeros(4)), [obs], ROD, ROD_FLESH, [CAM])
    np.testing.assert_array_equal(weighted.weights, [oracle_weight(p, obs) for p in poses])
    np.testing.assert_array_equal(best.pose, poses[1])
    assert best.weight == weighted.weights[3]


def test_measure_two_cameras_average():
    cam2 = axis_camera(focal=300.0, width=64, height=48)
    pose = rod_pose(tx=0.1)
    obs = [rod_sil(rod_pose()), render_silhouette(ROD, ROD_FLESH, rod_pose(), cam2)]
    (w,) = measure(ParticleSet(pose[None], [0.0]), obs, ROD, ROD_FLESH, [CAM, cam2])[0].weights
    w1 = oracle_weight(pose, obs[0])
    w2 = loop_weight(*loop_counts(obs[1].mask, render_silhouette(ROD, ROD_FLESH, pose, cam2).mask))
    assert w == pytest.approx((w1 + w2) / 2, rel=1e-15)


def test_measure_empty_set():
    with pytest.raises(ValueError):
        measure(ParticleSet(np.empty((0, 6)), np.empty(0)), [rod_sil(rod_pose())], ROD, ROD_FLESH, [CAM])


# -- tracking ------------------------------------------------------------------------


def test_one_frame_track():
    traj = track_silhouettes([[rod_sil(rod_pose())]], rod_config(), ROD, ROD_FLESH, [CAM], 20.0)
    assert len(traj) == 1 and traj.joints.shape == (1, 2, 3)


def test_static_subject_identical_estimates():
    obs = [rod_sil(rod_pose())] * 6
    log = []
    traj = track_silhouettes(
        [obs], rod_config(), ROD, ROD_FLESH, [CAM], 20.0, on_frame=lambda *a: log.append(a)
    )
    for p in traj.poses:
        np.testing.assert_array_equal(p, rod_pose())
    assert [row[0] for row in log] == list(range(6))
    assert [row[3] for row in log[1:]] == [9] * 5  # M * I = 3 * 3


def test_track_input_checks():
    with pytest.raises(DimensionError):
        track_silhouettes([[rod_sil(rod_pose())]], rod_config(), ROD, ROD_FLESH, [CAM, CAM], 20.0)
    with pytest.raises(ValueError):
        track_silhouettes([[]], rod_config(), ROD, ROD_FLESH, [CAM], 20.0)


def test_frame_failure_reports_frame_index():
    good = rod_sil(rod_pose())
    bad = type(good)(np.zeros((10, 10), dtype=bool))
    with pytest.raises(TrackingError) as err:
        track_silhouettes([[good, good, bad]], rod_config(), ROD, ROD_FLESH, [CAM], 20.0)
    assert err.value.frame == 2
