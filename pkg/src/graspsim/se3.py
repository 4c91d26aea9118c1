"""Rigid-body pose algebra on 6-DoF poses (position + intrinsic XYZ Euler).

One Euler convention is used everywhere in this package: intrinsic XYZ,
i.e. R = Rx(a) @ Ry(b) @ Rz(c).  Angles are kept normalized to (-pi, pi],
with the tie at -pi mapping to +pi, so pose equality is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Normalize angle(s) to (-pi, pi]; exactly -pi maps to +pi."""
    w = np.asarray(x, dtype=float)
    w = w - TWO_PI * np.round(w / TWO_PI)
    w = np.where(w <= -np.pi, w + TWO_PI, w)
    w = np.where(w > np.pi, w - TWO_PI, w)
    if np.ndim(x) == 0:
        return float(w)
    return w


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise InvalidArgumentError(f"{name} must be finite, got {value!r}")


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pose6:
    """6-DoF rigid pose: position in meters, intrinsic-XYZ Euler in radians."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = _ro(self.position)
        orn = _ro(self.orientation)
        if pos.shape != (3,) or orn.shape != (3,):
            raise InvalidArgumentError(
                f"Pose6 needs two 3-vectors, got {pos.shape} / {orn.shape}"
            )
        _check_finite("Pose6.position", pos)
        _check_finite("Pose6.orientation", orn)
        orn = _ro(wrap_angle(orn))
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", orn)

    @staticmethod
    def identity() -> "Pose6":
        return Pose6(np.zeros(3), np.zeros(3))

    def approx_equal(self, other: "Pose6", tol: float = 1e-9) -> bool:
        """Same rigid pose within tol: positions and rotation matrices agree.

        Euler triples are compared through their rotation matrices because
        two distinct triples can encode one rotation (pitch-family ambiguity).
        """
        dp = np.max(np.abs(self.position - other.position))
        dr = np.max(np.abs(euler_to_matrix(self.orientation)
                           - euler_to_matrix(other.orientation)))
        return bool(dp <= tol and dr <= tol)


@dataclass(frozen=True)
class Twist:
    """Spatial velocity: linear m/s, angular rad/s."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        lin = _ro(self.linear)
        ang = _ro(self.angular)
        if lin.shape != (3,) or ang.shape != (3,):
            raise InvalidArgumentError(
                f"Twist needs two 3-vectors, got {lin.shape} / {ang.shape}"
            )
        _check_finite("Twist.linear", lin)
        _check_finite("Twist.angular", ang)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "angular", ang)

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class Transform:
    """Internal matrix form of a pose: 3x3 rotation + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _ro(self.rotation)
        tra = _ro(self.translation)
        if rot.shape != (3, 3) or tra.shape != (3,):
            raise InvalidArgumentError(
                f"Transform needs 3x3 + 3, got {rot.shape} / {tra.shape}"
            )
        err = np.max(np.abs(rot @ rot.T - np.eye(3)))
        det = np.linalg.det(rot)
        if err > 1e-9 or abs(det - 1.0) > 1e-9:
            raise InvalidArgumentError(
                f"rotation not orthonormal (orth err {err:.2e}, det {det:.12f})"
            )
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(orientation) -> np.ndarray:
    """Rotation matrix for intrinsic-XYZ Euler angles (Rx @ Ry @ Rz)."""
    a, b, c = np.asarray(orientation, dtype=float)
    return rot_x(a) @ rot_y(b) @ rot_z(c)


def matrix_to_euler(rotation) -> np.ndarray:
    """Invert euler_to_matrix.  Gimbal lock (|cos b| ~ 0) resolves with c = 0."""
    r = np.asarray(rotation, dtype=float)
    sb = float(np.clip(r[0, 2], -1.0, 1.0))
    b = np.arcsin(sb)
    if abs(sb) < 1.0 - 1e-12:
        a = np.arctan2(-r[1, 2], r[2, 2])
        c = np.arctan2(-r[0, 1], r[0, 0])
    else:
        a = np.arctan2(np.sign(sb) * r[1, 0], r[1, 1])
        c = 0.0
    return wrap_angle(np.array([a, b, c]))


def euler_to_transform(p: Pose6) -> Transform:
    """Matrix form of a pose."""
    return Transform(euler_to_matrix(p.orientation), p.position)


def transform_to_euler(t: Transform) -> Pose6:
    """Pose form of a transform; angles come back normalized."""
    return Pose6(t.translation, matrix_to_euler(t.rotation))


def compose(a: Pose6, b: Pose6) -> Pose6:
    """Pose of frame b expressed through frame a (matrix composition internally)."""
    ra = euler_to_matrix(a.orientation)
    rb = euler_to_matrix(b.orientation)
    return Pose6(ra @ b.position + a.position, matrix_to_euler(ra @ rb))


def inverse(p: Pose6) -> Pose6:
    r = euler_to_matrix(p.orientation)
    return Pose6(-(r.T @ p.position), matrix_to_euler(r.T))


def grasp_to_world(rel: Pose6, obj: Pose6) -> Pose6:
    """Re-project an object-local grasp pose into the world frame."""
    return compose(obj, rel)


def vec6_encode(p: Pose6) -> np.ndarray:
    """Flatten a pose to [px, py, pz, rx, ry, rz]."""
    return np.concatenate([p.position, p.orientation])


def vec6_decode(v) -> Pose6:
    """Rebuild a pose from a 6-vector; angles are normalized on the way in."""
    v = np.asarray(v, dtype=float)
    if v.shape != (6,):
        raise InvalidArgumentError(f"vec6_decode expects shape (6,), got {v.shape}")
    _check_finite("vec6_decode input", v)
    return Pose6(v[:3], v[3:])


def rotation_angle_between(orn_a, orn_b) -> float:
    """Geodesic angle in radians between two Euler orientations."""
    ra = euler_to_matrix(orn_a)
    rb = euler_to_matrix(orn_b)
    tr = np.trace(ra.T @ rb)
    return float(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))
