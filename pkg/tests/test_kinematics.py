import json
import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rom_boundary.errors import ConfigError, RejectedInputError, SchemaError
from rom_boundary.kinematics import (
    DOF_NAMES,
    BonePose,
    KinematicChain,
    Quaternion,
    Side,
    SkeletonFrame,
    compose_zxy,
    extract_joint_angles,
    extract_sequence,
    hemisphere_align,
    load_chain,
    pose_frame,
    quat_to_rotmat,
    relative_rotation,
    rotmat_to_euler_zxy,
    wrap_degrees,
)


def random_quaternion(rng) -> Quaternion:
    v = rng.normal(size=4)
    return Quaternion.from_array(v / np.linalg.norm(v))


def random_rotation(rng) -> np.ndarray:
    return quat_to_rotmat(random_quaternion(rng))


def random_q(rng) -> np.ndarray:
    """Joint vector away from gimbal lock at shoulder and wrist"""
    q = rng.uniform(-170, 170, size=7)
    q[0] = rng.uniform(-80, 80)
    q[6] = rng.uniform(-80, 80)
    return q


# quaternion -> rotation matrix

def test_identity_quaternion_gives_identity_matrix():
    assert np.allclose(quat_to_rotmat(Quaternion.identity()), np.eye(3), atol=1e-15)


def test_quarter_turn_about_x_maps_y_to_z():
    h = math.sqrt(0.5)
    R = quat_to_rotmat(Quaternion(h, h, 0.0, 0.0))
    assert np.allclose(R @ [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], atol=1e-12)


def test_random_quaternions_give_proper_rotations(rng):
    for _ in range(1000):
        q = random_quaternion(rng)
        R = quat_to_rotmat(q)
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9
        assert abs(np.linalg.det(R) - 1.0) < 1e-9


def test_rotation_matrix_matches_scipy(rng):
    for _ in range(50):
        q = random_quaternion(rng)
        expected = Rotation.from_quat([q.x, q.y, q.z, q.w]).as_matrix()
        assert np.allclose(quat_to_rotmat(q), expected, atol=1e-12)


def test_non_unit_quaternion_rejected():
    with pytest.raises(RejectedInputError):
        quat_to_rotmat(Quaternion(1.0, 0.01, 0.0, 0.0))


def test_from_rotmat_inverts_quat_to_rotmat(rng):
    for _ in range(200):
        q = random_quaternion(rng)
        back = Quaternion.from_rotmat(quat_to_rotmat(q))
        assert abs(abs(back.dot(q)) - 1.0) < 1e-12


# hemisphere alignment

def test_hemisphere_align_flips_negated_quaternion():
    aligned = hemisphere_align([Quaternion(1, 0, 0, 0), Quaternion(-1, 0, 0, 0)])
    assert aligned == [Quaternion(1, 0, 0, 0), Quaternion(1, 0, 0, 0)]


def test_hemisphere_align_singleton_unchanged():
    assert hemisphere_align([Quaternion(1, 0, 0, 0)]) == [Quaternion(1, 0, 0, 0)]


def test_hemisphere_align_rejects_empty_and_non_unit():
    with pytest.raises(RejectedInputError):
        hemisphere_align([])
    with pytest.raises(RejectedInputError):
        hemisphere_align([Quaternion(2, 0, 0, 0)])


def test_hemisphere_align_repairs_flipped_slerp_path(rng):
    start = Rotation.from_quat(rng.normal(size=4))
    end = Rotation.from_quat(rng.normal(size=4))
    path = []
    for t in np.linspace(0.0, 1.0, 100):
        rotvec = (start.inv() * end).as_rotvec() * t
        x, y, z, w = (start * Rotation.from_rotvec(rotvec)).as_quat()
        path.append(Quaternion(w, x, y, z))
    for index in (17, 42, 88):
        path[index] = -path[index]

    aligned = hemisphere_align(path)

    assert aligned[0] == path[0]
    assert all(a.dot(b) >= 0 for a, b in zip(aligned[:-1], aligned[1:]))
    for original, result in zip(path, aligned):
        assert np.allclose(quat_to_rotmat(original), quat_to_rotmat(result), atol=1e-12)
    assert hemisphere_align(aligned) == aligned


# relative rotation

def test_relative_rotation_identities(rng):
    R = random_rotation(rng)
    assert np.allclose(relative_rotation(np.eye(3), R), R, atol=1e-15)
    assert np.allclose(relative_rotation(R, R), np.eye(3), atol=1e-12)


def test_relative_rotation_reconstructs_distal(rng):
    for _ in range(100):
        R1, R2 = random_rotation(rng), random_rotation(rng)
        assert np.allclose(R1 @ relative_rotation(R1, R2), R2, atol=1e-9)


def test_relative_rotation_rejects_non_rotation():
    with pytest.raises(RejectedInputError):
        relative_rotation(np.eye(3), np.diag([1.0, 1.0, -1.0]))


# ZXY Euler angles

def test_euler_of_identity_is_zero():
    e = rotmat_to_euler_zxy(np.eye(3))
    assert (e.z, e.x, e.y) == (0.0, 0.0, 0.0)
    assert not e.gimbal


def test_single_x_rotation():
    e = rotmat_to_euler_zxy(compose_zxy(0.0, 30.0, 0.0))
    assert e.z == pytest.approx(0.0, abs=1e-9)
    assert e.x == pytest.approx(30.0, abs=1e-9)
    assert e.y == pytest.approx(0.0, abs=1e-9)


def test_compose_matches_scipy_intrinsic_zxy(rng):
    for _ in range(50):
        z, x, y = rng.uniform(-180, 180, size=3)
        expected = Rotation.from_euler("ZXY", [z, x, y], degrees=True).as_matrix()
        assert np.allclose(compose_zxy(z, x, y), expected, atol=1e-12)


def test_compose_extract_round_trip(rng):
    for _ in range(1000):
        z, y = rng.uniform(-179.9, 179.9, size=2)
        x = rng.uniform(-89.0, 89.0)
        R = compose_zxy(z, x, y)
        e = rotmat_to_euler_zxy(R)
        assert not e.gimbal
        assert np.allclose([e.z, e.x, e.y], [z, x, y], atol=1e-6)
        assert np.max(np.abs(compose_zxy(e.z, e.x, e.y) - R)) < 1e-7


def test_gimbal_lock_is_flagged_and_reconstructs():
    R = compose_zxy(30.0, 90.0, 0.0)
    e = rotmat_to_euler_zxy(R)
    assert e.gimbal
    assert e.x == pytest.approx(90.0, abs=1e-6)
    assert e.y == 0.0
    assert np.allclose(compose_zxy(e.z, e.x, e.y), R, atol=1e-9)


def test_gimbal_lock_keeps_previous_y():
    R = compose_zxy(10.0, -90.0, 25.0)
    e = rotmat_to_euler_zxy(R, previous_y=25.0)
    assert e.gimbal
    assert e.y == pytest.approx(25.0)
    assert e.z == pytest.approx(10.0, abs=1e-6)
    assert np.allclose(compose_zxy(e.z, e.x, e.y), R, atol=1e-9)


def test_wrap_degrees():
    assert wrap_degrees(180.0) == 180.0
    assert wrap_degrees(-180.0) == 180.0
    assert wrap_degrees(190.0) == pytest.approx(-170.0)
    assert wrap_degrees(540.0) == 180.0
    assert np.allclose(wrap_degrees(np.array([0.0, 359.0, -359.0])), [0.0, -1.0, 1.0])


# joint angles

def test_zero_pose_gives_zero_vector():
    chain = KinematicChain.default()
    for side in Side:
        q = extract_joint_angles(pose_frame(np.zeros(7), chain, side), chain, side)
        assert np.allclose(q.q, 0.0, atol=1e-6)
        assert not q.flagged


def test_abduction_of_ninety_degrees():
    chain = KinematicChain.default()
    target = np.zeros(7)
    target[0] = 90.0
    q = extract_joint_angles(pose_frame(target, chain, "right"), chain, "right")
    assert np.allclose(q.q, target, atol=1e-6)
    assert q.gimbal == ("shoulder",)


def test_forward_compose_then_extract(rng):
    chain = KinematicChain.default()
    for side in Side:
        for _ in range(200):
            target = random_q(rng)
            q = extract_joint_angles(pose_frame(target, chain, side), chain, side)
            assert np.allclose(q.q, target, atol=1e-6)


def test_invariant_to_global_rigid_transform(rng):
    chain = KinematicChain.default()
    for _ in range(20):
        target = random_q(rng)
        root = random_rotation(rng)
        q = extract_joint_angles(pose_frame(target, chain, "left", root=root), chain, "left")
        assert np.allclose(q.q, target, atol=1e-6)


def test_rest_orientations_define_zero_pose(rng):
    base = KinematicChain.default()
    rest = {bone: random_quaternion(rng) for bone in base.bones(Side.RIGHT)}
    chain = KinematicChain(links=base.links, rest=rest)
    target = random_q(rng)

    q = extract_joint_angles(pose_frame(target, chain, "right"), chain, "right")
    assert np.allclose(q.q, target, atol=1e-6)

    # the rest frames themselves are the zero pose
    frame = SkeletonFrame(0.0, {bone: BonePose(np.zeros(3), rest[bone]) for bone in rest})
    assert np.allclose(extract_joint_angles(frame, chain, "right").q, 0.0, atol=1e-6)


def test_missing_bone_names_the_bone():
    chain = KinematicChain.default()
    frame = pose_frame(np.zeros(7), chain, "right")
    bones = dict(frame.bones)
    del bones["right_forearm"]
    with pytest.raises(SchemaError, match="right_forearm"):
        extract_joint_angles(SkeletonFrame(0.0, bones), chain, "right")


def test_extract_sequence_survives_sign_flips(rng):
    chain = KinematicChain.default()
    targets = [random_q(rng) for _ in range(10)]
    frames = [pose_frame(q, chain, "right", timestamp=t * 0.01) for t, q in enumerate(targets)]
    flipped = []
    for t, frame in enumerate(frames):
        bones = {b: BonePose(p.position, -p.orientation if t % 3 == 1 else p.orientation)
                 for b, p in frame.bones.items()}
        flipped.append(SkeletonFrame(frame.timestamp, bones))

    results = extract_sequence(flipped, chain, "right")
    assert len(results) == len(targets)
    for result, target in zip(results, targets):
        assert np.allclose(result.q, target, atol=1e-6)


def test_chain_config_round_trip(tmp_path):
    chain = KinematicChain.default()
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(chain.to_dict()))
    loaded = load_chain(path)
    assert loaded.bones(Side.LEFT) == chain.bones(Side.LEFT)
    assert loaded.joints(Side.RIGHT)["elbow"] == ("right_upper_arm", "right_forearm")


def test_chain_rejects_parent_after_child(tmp_path):
    links = {"right": [["hip", None], ["upper", "chest"], ["chest", "hip"], ["fore", "upper"], ["hand", "fore"]]}
    path = tmp_path / "chain.json"
    path.write_text(json.dumps({"links": links}))
    with pytest.raises(ConfigError):
        load_chain(path)


def test_dof_names_cover_seven_angles():
    assert len(DOF_NAMES) == 7
