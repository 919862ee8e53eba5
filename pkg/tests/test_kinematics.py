import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipfmocap.kinematics import (
    N_DOF,
    N_JOINTS,
    N_SEGMENTS,
    ConfigError,
    DimensionError,
    LimitError,
    check_pose,
    default_skeleton,
    expand_interval,
    forward_kinematics,
    forward_kinematics_batch,
    validate_pose,
)

from .oracles import cartesian_grid, rot_y

SK = default_skeleton()


def random_valid_pose(draw_floats):
    return np.clip(SK.lower + (SK.upper - SK.lower) * np.asarray(draw_floats), SK.lower, SK.upper)


unit_vectors = st.lists(st.floats(0.0, 1.0), min_size=N_DOF, max_size=N_DOF)


# -- structure ----------------------------------------------------------------------


def test_counts():
    assert len(SK.joints) == N_JOINTS == 19
    assert len(SK.rendered_segments) == N_SEGMENTS == 17
    assert SK.n_dof == N_DOF == 31
    links = [(j.parent, i) for i, j in enumerate(SK.joints) if j.parent >= 0]
    assert len(links) == 18
    assert SK.joints[SK.root].name == "sacrum"


def test_limits_ordered():
    assert np.all(SK.lower < SK.upper)


def test_four_limb_chains_recoverable():
    chains = {SK.joint_names[c[-1]]: [SK.joint_names[i] for i in c] for c in SK.kinematic_chains()}
    for side in "lr":
        assert chains[f"{side}_wrist"][-3:] == [f"{side}_shoulder", f"{side}_elbow", f"{side}_wrist"]
        assert chains[f"{side}_toe"] == ["sacrum", f"{side}_hip", f"{side}_knee", f"{side}_ankle", f"{side}_toe"]
        assert chains[f"{side}_wrist"][:3] == ["sacrum", "thorax", "neck"]


def test_unfleshed_link_is_sacrum_to_thorax():
    links = {(j.parent, i) for i, j in enumerate(SK.joints) if j.parent >= 0}
    (missing,) = links - set(SK.rendered_segments)
    assert (SK.joint_names[missing[0]], SK.joint_names[missing[1]]) == ("sacrum", "thorax")


def test_segment_lengths_scale_with_height():
    tall = default_skeleton(2.1)
    np.testing.assert_allclose(tall.rest_lengths(), SK.rest_lengths() * 2.1 / 1.75, rtol=1e-12)


def test_bad_skeletons_rejected():
    j = SK.joints
    with pytest.raises(ConfigError):
        type(SK)(j, ((0, 3),), SK.dofs)  # not a link
    with pytest.raises(ConfigError):
        type(SK)(tuple(j) + (type(j[0])("extra_root", -1, (0.0, 0.0, 0.0)),), (), ())


# -- validate_pose ----------------------------------------------------------------------


def test_zero_pose_valid():
    assert validate_pose(SK, np.zeros(N_DOF)) == []


def test_hip_flexion_70_violates():
    pose = np.zeros(N_DOF)
    k = SK.dof_index("r_hip_flex")
    pose[k] = math.radians(70)
    (v,) = validate_pose(SK, pose)
    assert v.dof == k
    assert v.bound == pytest.approx((math.radians(-30), math.radians(60)))


def test_hip_flexion_at_upper_bound_valid():
    pose = np.zeros(N_DOF)
    pose[SK.dof_index("r_hip_flex")] = math.radians(60)
    assert validate_pose(SK, pose) == []


def test_wrong_length_pose():
    with pytest.raises(DimensionError):
        validate_pose(SK, np.zeros(30))


def test_fk_rejects_invalid_pose():
    pose = np.zeros(N_DOF)
    pose[SK.dof_index("l_knee_flex")] = -0.5
    with pytest.raises(LimitError) as err:
        forward_kinematics(SK, pose)
    assert err.value.violations[0].name == "l_knee_flex"


# -- forward kinematics -----------------------------------------------------------------


def cumulative_offsets():
    out = np.zeros((N_JOINTS, 3))
    for i, j in enumerate(SK.joints):
        parent = out[j.parent] if j.parent >= 0 else np.zeros(3)
        out[i] = parent + np.asarray(j.offset)
    return out


def test_neutral_pose_is_cumulative_offsets():
    # parents precede children in the default joint list, so one pass suffices
    assert all(j.parent < i for i, j in enumerate(SK.joints))
    np.testing.assert_allclose(forward_kinematics(SK, np.zeros(N_DOF)), cumulative_offsets(), atol=1e-15)


def test_root_translation_shifts_everything():
    pose = np.zeros(N_DOF)
    pose[0] = 1.0
    np.testing.assert_allclose(
        forward_kinematics(SK, pose), forward_kinematics(SK, np.zeros(N_DOF)) + [1.0, 0.0, 0.0], atol=1e-15
    )


def test_knee_flexion_90_single_axis_oracle():
    pose = np.zeros(N_DOF)
    pose[SK.dof_index("r_knee_flex")] = math.radians(90)
    joints = forward_kinematics(SK, pose)
    knee, ankle = joints[SK.joint_index("r_knee")], joints[SK.joint_index("r_ankle")]
    shank = np.asarray(SK.joints[SK.joint_index("r_ankle")].offset)
    # knee flexion rotates about +y: the shank, hanging straight down, swings backwards
    expected = rot_y(math.radians(90)) @ shank
    np.testing.assert_allclose(ankle - knee, expected, atol=1e-12)
    np.testing.assert_allclose(ankle - knee, [-np.linalg.norm(shank), 0.0, 0.0], atol=1e-12)
    assert abs(np.dot(ankle - knee, shank)) < 1e-12


def test_hip_flexion_moves_knee_forward():
    pose = np.zeros(N_DOF)
    pose[SK.dof_index("l_hip_flex")] = math.radians(30)
    joints = forward_kinematics(SK, pose)
    hip, knee = joints[SK.joint_index("l_hip")], joints[SK.joint_index("l_knee")]
    thigh = np.linalg.norm(SK.joints[SK.joint_index("l_knee")].offset)
    np.testing.assert_allclose(knee - hip, [thigh * 0.5, 0.0, -thigh * math.sqrt(3) / 2], atol=1e-12)


def test_abduction_moves_feet_outward():
    pose = np.zeros(N_DOF)
    pose[SK.dof_index("l_hip_abd")] = math.radians(20)
    pose[SK.dof_index("r_hip_abd")] = math.radians(20)
    joints = forward_kinematics(SK, pose)
    neutral = forward_kinematics(SK, np.zeros(N_DOF))
    assert joints[SK.joint_index("l_ankle"), 1] > neutral[SK.joint_index("l_ankle"), 1]
    assert joints[SK.joint_index("r_ankle"), 1] < neutral[SK.joint_index("r_ankle"), 1]


def test_batch_matches_single():
    rng = np.random.default_rng(4)
    poses = SK.lower + (SK.upper - SK.lower) * rng.random((7, N_DOF))
    batch = forward_kinematics_batch(SK, poses)
    for p, b in zip(poses, batch):
        np.testing.assert_array_equal(forward_kinematics(SK, p), b)


@settings(max_examples=60, deadline=None)
@given(unit_vectors, st.tuples(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.floats(-0.9, 0.9)))
def test_translation_equivariance(u, shift):
    pose = random_valid_pose(u)
    pose[:3] = (0.3, -0.2, 1.0)
    moved = pose.copy()
    moved[:3] += shift
    np.testing.assert_allclose(forward_kinematics(SK, moved), forward_kinematics(SK, pose) + shift, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(unit_vectors)
def test_segments_rigid(u):
    joints = forward_kinematics(SK, random_valid_pose(u))
    lengths = [np.linalg.norm(joints[c] - joints[p]) for p, c in SK.rendered_segments]
    np.testing.assert_allclose(lengths, SK.rest_lengths(), atol=1e-9, rtol=0)


# -- expand_interval ------------------------------------------------------------------


def test_one_dim_three_levels():
    pose = np.zeros(N_DOF)
    k = SK.dof_index("l_hip_flex")
    pose[k] = math.radians(20)
    grid = expand_interval(pose, [k], math.radians(5), 3, SK)
    np.testing.assert_allclose(np.degrees(grid[:, k]), [15, 20, 25])


def test_four_dims_81():
    grid = expand_interval(np.zeros(N_DOF) + SK.neutral_pose(), [19, 22, 25, 28], math.radians(5), 3, SK)
    assert grid.shape == (81, N_DOF)


def test_clamped_duplicate_kept():
    pose = np.zeros(N_DOF)
    k = SK.dof_index("r_hip_flex")
    pose[k] = math.radians(60)
    grid = expand_interval(pose, [k], math.radians(5), 3, SK)
    np.testing.assert_allclose(np.degrees(grid[:, k]), [55, 60, 60])


def test_repeated_dim_rejected():
    with pytest.raises(ConfigError):
        expand_interval(np.zeros(N_DOF), [19, 19], 0.1, 3, SK)


def test_even_levels_rejected():
    with pytest.raises(ConfigError, match="odd"):
        expand_interval(np.zeros(N_DOF), [19], 0.1, 4, SK)


@settings(max_examples=50, deadline=None)
@given(
    unit_vectors,
    st.lists(st.integers(0, N_DOF - 1), min_size=1, max_size=3, unique=True),
    st.sampled_from([1, 3, 5]),
    st.floats(0.001, 0.3),
)
def test_grid_matches_cartesian_oracle(u, dims, levels, step):
    pose = random_valid_pose(u)
    grid = expand_interval(pose, dims, step, levels, SK)
    assert len(grid) == levels ** len(dims)
    expected = cartesian_grid(list(pose), dims, step, levels, SK.lower, SK.upper)
    np.testing.assert_array_equal(grid, expected)
    # never leaves the limits
    assert np.all(grid >= SK.lower) and np.all(grid <= SK.upper)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(19, 30), min_size=1, max_size=3, unique=True), st.sampled_from([3, 5]))
def test_center_is_input_without_clamping(dims, levels):
    pose = (SK.lower + SK.upper) / 2
    grid = expand_interval(pose, dims, math.radians(1), levels, SK)
    np.testing.assert_array_equal(grid[len(grid) // 2], pose)


def test_check_pose_passthrough():
    pose = SK.neutral_pose()
    assert check_pose(SK, pose) is not None
