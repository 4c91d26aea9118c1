import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspsim.errors import InvalidArgumentError
from graspsim.se3 import (
    Pose6,
    compose,
    euler_to_matrix,
    euler_to_transform,
    grasp_to_world,
    inverse,
    transform_to_euler,
    vec6_decode,
    vec6_encode,
    wrap_angle,
)

angles = st.floats(-np.pi, np.pi, allow_nan=False, allow_infinity=False)
coords = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


def random_pose(rng):
    return Pose6(rng.uniform(-2, 2, 3), rng.uniform(-np.pi, np.pi, 3))


pose_st = st.builds(
    lambda p, o: Pose6(np.array(p), np.array(o)),
    st.tuples(coords, coords, coords),
    st.tuples(angles, angles, angles),
)


def test_wrap_angle_ties_and_range():
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    xs = np.linspace(-20, 20, 2001)
    w = wrap_angle(xs)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)


def test_zero_pose_is_identity_transform():
    t = euler_to_transform(Pose6.identity())
    assert np.allclose(t.rotation, np.eye(3))
    assert np.allclose(t.translation, 0.0)


def test_yaw_quarter_turn_maps_x_to_y():
    # oracle: plain Rz(pi/2) applied to x-hat
    t = euler_to_transform(Pose6(np.zeros(3), np.array([0, 0, np.pi / 2])))
    assert np.allclose(t.rotation @ np.array([1.0, 0, 0]), [0, 1, 0], atol=1e-12)


def test_euler_matrix_convention_is_intrinsic_xyz(rng):
    for _ in range(50):
        a, b, c = rng.uniform(-np.pi, np.pi, 3)
        ca, sa = np.cos(a), np.sin(a)
        cb, sb = np.cos(b), np.sin(b)
        cc, sc = np.cos(c), np.sin(c)
        rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
        ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
        rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
        assert np.allclose(euler_to_matrix([a, b, c]), rx @ ry @ rz, atol=1e-12)


def test_transform_euler_roundtrip(rng):
    for _ in range(200):
        p = random_pose(rng)
        q = transform_to_euler(euler_to_transform(p))
        assert np.allclose(
            euler_to_matrix(q.orientation), euler_to_matrix(p.orientation), atol=1e-9
        )
        assert np.allclose(q.position, p.position)


def test_roundtrip_near_gimbal_lock():
    p = Pose6(np.zeros(3), np.array([0.3, np.pi / 2, 0.0]))
    q = transform_to_euler(euler_to_transform(p))
    assert np.allclose(
        euler_to_matrix(q.orientation), euler_to_matrix(p.orientation), atol=1e-7
    )


def test_compose_identity_and_inverse(rng):
    for _ in range(50):
        p = random_pose(rng)
        assert compose(Pose6.identity(), p).approx_equal(p, 1e-12)
        q = compose(p, inverse(p))
        assert np.allclose(q.position, 0.0, atol=1e-9)
        assert np.allclose(euler_to_matrix(q.orientation), np.eye(3), atol=1e-9)


def test_compose_yaw_then_translation():
    a = Pose6(np.zeros(3), np.array([0, 0, np.pi / 2]))
    b = Pose6(np.array([1.0, 0, 0]), np.zeros(3))
    c = compose(a, b)
    assert np.allclose(c.position, [0, 1, 0], atol=1e-12)


def test_grasp_to_world_cases():
    rel = Pose6(np.array([0.1, 0, 0]), np.array([0.0, 0.2, 0.3]))
    assert grasp_to_world(rel, Pose6.identity()).approx_equal(rel, 1e-12)

    shift = Pose6(np.array([1.0, 2.0, 3.0]), np.zeros(3))
    moved = grasp_to_world(rel, shift)
    assert np.allclose(moved.position, rel.position + shift.position)
    assert np.allclose(moved.orientation, rel.orientation)

    obj = Pose6(np.array([5.0, 0, 0]), np.array([0, 0, np.pi / 2]))
    world = grasp_to_world(Pose6(np.array([0.1, 0, 0]), np.zeros(3)), obj)
    assert np.allclose(world.position, [5.0, 0.1, 0.0], atol=1e-12)


def test_vec6_encode_decode():
    assert np.allclose(vec6_encode(Pose6.identity()), np.zeros(6))
    p = Pose6(np.array([1.0, 2, 3]), np.array([0.1, -0.2, 0.3]))
    assert vec6_decode(vec6_encode(p)).approx_equal(p, 1e-15)
    q = vec6_decode(np.array([1.0, 2, 3, 3 * np.pi, 0, 0]))
    assert q.orientation[0] == pytest.approx(np.pi)


def test_non_finite_rejected():
    with pytest.raises(InvalidArgumentError):
        Pose6(np.array([np.nan, 0, 0]), np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        vec6_decode(np.array([0, 0, 0, np.inf, 0, 0]))


@settings(max_examples=80, deadline=None)
@given(pose_st, pose_st, pose_st)
def test_composition_associativity(a, b, c):
    # pose equality within 1e-9 = positions and rotation matrices within 1e-9
    # (geodesic angle is sqrt-amplified near zero, so matrices are compared)
    lhs = compose(compose(a, b), c)
    rhs = compose(a, compose(b, c))
    assert np.allclose(lhs.position, rhs.position, atol=1e-9)
    assert np.allclose(euler_to_matrix(lhs.orientation),
                       euler_to_matrix(rhs.orientation), atol=1e-9)


@settings(max_examples=80, deadline=None)
@given(pose_st, pose_st, pose_st)
def test_grasp_to_world_frame_equivariance(rel, obj, d):
    lhs = grasp_to_world(rel, compose(d, obj))
    rhs = compose(d, grasp_to_world(rel, obj))
    assert np.allclose(lhs.position, rhs.position, atol=1e-9)
    assert np.allclose(euler_to_matrix(lhs.orientation),
                       euler_to_matrix(rhs.orientation), atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.tuples(angles, angles, angles))
def test_rotations_always_orthonormal(orn):
    r = euler_to_matrix(np.array(orn))
    assert np.max(np.abs(r @ r.T - np.eye(3))) < 1e-9
    assert abs(np.linalg.det(r) - 1.0) < 1e-9
