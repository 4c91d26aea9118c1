"""Idealized whole-body command executor.

The base is a unicycle whose height rides the terrain; the arm is a
first-order tracker that pulls the world end-effector pose toward the
integrated target.  Integrators use exact (exponential / closed-form circle)
discretization so that stepping at different rates stays consistent.  A
synthetic 12-joint gait signal stands in for leg state so the locomotion
reward formulas have inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError, SingularJacobianError
from .se3 import Pose6, Twist, compose, euler_to_matrix, matrix_to_euler, wrap_angle

WORKSPACE_RADIUS = 0.8
WORKSPACE_CENTER = np.array([0.0, 0.0, 0.3])   # in the base frame
NOMINAL_HEIGHT = 0.55
BASE_Z_TAU = 0.2
EE_TAU = 0.15
EE_RATE_LIMIT = 1.0       # m/s cap on end-effector travel
MAX_DP = 0.05             # per-action position increment bound (norm)
MAX_DR = 0.2              # per-component orientation increment bound
MAX_V_LIN = 0.8
MAX_OMEGA = 1.0
GAIT_WAVELENGTH = 0.5     # meters of travel per gait cycle
GAIT_AMPLITUDE = 0.35
DEFAULT_JOINTS = np.tile(np.array([0.0, 0.8, -1.5]), 4)
_LEG_PHASES = np.repeat(np.array([0.0, np.pi, np.pi, 0.0]), 3)


@dataclass(frozen=True)
class HighLevelAction:
    """Policy output: ee increments plus base velocity commands (clamped)."""

    dp: np.ndarray
    dr: np.ndarray
    v_lin: float
    omega_yaw: float
    gripper_close: bool = False

    def __post_init__(self):
        dp = np.asarray(self.dp, dtype=float)
        dr = np.asarray(self.dr, dtype=float)
        if dp.shape != (3,) or dr.shape != (3,):
            raise InvalidArgumentError("dp and dr must be 3-vectors")
        if not (np.all(np.isfinite(dp)) and np.all(np.isfinite(dr))
                and np.isfinite(self.v_lin) and np.isfinite(self.omega_yaw)):
            raise InvalidArgumentError("HighLevelAction fields must be finite")
        n = float(np.linalg.norm(dp))
        if n > MAX_DP:
            dp = dp * (MAX_DP / n)
        dp = dp.copy()
        dp.setflags(write=False)
        dr = np.clip(dr, -MAX_DR, MAX_DR)
        dr.setflags(write=False)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "dr", dr)
        object.__setattr__(self, "v_lin", float(np.clip(self.v_lin, -MAX_V_LIN, MAX_V_LIN)))
        object.__setattr__(self, "omega_yaw",
                           float(np.clip(self.omega_yaw, -MAX_OMEGA, MAX_OMEGA)))

    @staticmethod
    def zero() -> "HighLevelAction":
        return HighLevelAction(np.zeros(3), np.zeros(3), 0.0, 0.0)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dp, self.dr, [self.v_lin, self.omega_yaw]])


@dataclass(frozen=True)
class CommandVector:
    """Low-level command: target ee pose (base frame) + base velocities (R^8)."""

    p_hat: np.ndarray
    r_hat: np.ndarray
    v_lin: float
    omega_yaw: float

    def __post_init__(self):
        p = np.asarray(self.p_hat, dtype=float)
        r = np.asarray(self.r_hat, dtype=float)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(r))):
            raise InvalidArgumentError("CommandVector fields must be finite")
        p = p.copy()
        p.setflags(write=False)
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "p_hat", p)
        object.__setattr__(self, "r_hat", r)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p_hat, self.r_hat, [self.v_lin, self.omega_yaw]])


@dataclass(frozen=True)
class RobotState:
    base_pose: Pose6
    base_twist: Twist
    ee_target: Pose6          # base frame
    ee_pose: Pose6            # world frame
    gripper: str = "open"     # open | closed
    yaw_ref: float = 0.0
    joint_proxy: np.ndarray = None
    travel: float = 0.0       # cumulative base path length, drives the gait

    def __post_init__(self):
        jp = self.joint_proxy
        jp = DEFAULT_JOINTS.copy() if jp is None else np.asarray(jp, dtype=float).copy()
        if jp.shape != (12,):
            raise InvalidArgumentError("joint_proxy must be a 12-vector")
        jp.setflags(write=False)
        object.__setattr__(self, "joint_proxy", jp)


CARRY_EE_TARGET = Pose6(np.array([0.35, 0.0, 0.2]), np.zeros(3))


def initial_robot(terrain=None, yaw: float = 0.0) -> RobotState:
    """Robot at the origin, standing at nominal height, arm tucked."""
    z = NOMINAL_HEIGHT + (terrain.height_at(0.0, 0.0) if terrain is not None else 0.0)
    base = Pose6(np.array([0.0, 0.0, z]), np.array([0.0, 0.0, yaw]))
    ee_world = compose(base, CARRY_EE_TARGET)
    return RobotState(
        base_pose=base,
        base_twist=Twist.zero(),
        ee_target=CARRY_EE_TARGET,
        ee_pose=ee_world,
        gripper="open",
        yaw_ref=yaw,
    )


def clamp_to_workspace(p) -> np.ndarray:
    """Project a base-frame point into the reachable ball."""
    p = np.asarray(p, dtype=float)
    off = p - WORKSPACE_CENTER
    n = float(np.linalg.norm(off))
    if n <= WORKSPACE_RADIUS:
        return p
    return WORKSPACE_CENTER + off * (WORKSPACE_RADIUS / n)


def accumulate_command(robot: RobotState, a: HighLevelAction) -> CommandVector:
    """Integrate action increments into an absolute low-level command."""
    p_hat = clamp_to_workspace(robot.ee_target.position + a.dp)
    r_hat = wrap_angle(robot.ee_target.orientation + a.dr)
    return CommandVector(p_hat, r_hat, a.v_lin, a.omega_yaw)


def _unicycle_step(x, y, yaw, v, omega, dt):
    """Closed-form constant-command unicycle advance."""
    if abs(omega) < 1e-12:
        return x + v * np.cos(yaw) * dt, y + v * np.sin(yaw) * dt, yaw + omega * dt
    yaw1 = yaw + omega * dt
    x1 = x + (v / omega) * (np.sin(yaw1) - np.sin(yaw))
    y1 = y - (v / omega) * (np.cos(yaw1) - np.cos(yaw))
    return x1, y1, yaw1


def _lag_angle(current, target, alpha):
    """Exponential pull of each angle toward the target along the short way."""
    err = wrap_angle(np.asarray(target) - np.asarray(current))
    return wrap_angle(np.asarray(current) + alpha * err)


def gait_joint_proxy(travel: float) -> np.ndarray:
    """Synthetic periodic leg-joint signal as a function of distance traveled."""
    phase = 2.0 * np.pi * travel / GAIT_WAVELENGTH
    return DEFAULT_JOINTS + GAIT_AMPLITUDE * np.sin(phase + _LEG_PHASES)


def execute_command(robot: RobotState, u: CommandVector, terrain,
                    dt: float) -> RobotState:
    """Advance the robot by dt under a constant command."""
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    x0, y0 = robot.base_pose.position[0], robot.base_pose.position[1]
    yaw0 = robot.base_pose.orientation[2]
    x1, y1, yaw1 = _unicycle_step(x0, y0, yaw0, u.v_lin, u.omega_yaw, dt)

    z_target = NOMINAL_HEIGHT + (terrain.height_at(x1, y1) if terrain is not None else 0.0)
    z0 = robot.base_pose.position[2]
    z1 = z_target + (z0 - z_target) * np.exp(-dt / BASE_Z_TAU)

    base_pose = Pose6(np.array([x1, y1, z1]), np.array([0.0, 0.0, wrap_angle(yaw1)]))
    base_twist = Twist(
        np.array([(x1 - x0) / dt, (y1 - y0) / dt, (z1 - z0) / dt]),
        np.array([0.0, 0.0, u.omega_yaw]),
    )

    # The arm rides the base, so the first-order tracking happens in base
    # coordinates: with constant commands the target is fixed there and the
    # exact exponential pull makes stepping rate-consistent.
    ee_target = Pose6(u.p_hat, u.r_hat)
    r_old = euler_to_matrix(robot.base_pose.orientation)
    rel_pos = r_old.T @ (robot.ee_pose.position - robot.base_pose.position)
    rel_rot = r_old.T @ euler_to_matrix(robot.ee_pose.orientation)
    rel_orn = matrix_to_euler(rel_rot)
    pull = 1.0 - np.exp(-dt / EE_TAU)
    step_vec = (u.p_hat - rel_pos) * pull
    step_len = float(np.linalg.norm(step_vec))
    max_step = EE_RATE_LIMIT * dt
    if step_len > max_step:
        step_vec *= max_step / step_len
    rel_new = Pose6(rel_pos + step_vec, _lag_angle(rel_orn, u.r_hat, pull))
    ee_pose = compose(base_pose, rel_new)

    travel = robot.travel + abs(u.v_lin) * dt
    return replace(
        robot,
        base_pose=base_pose,
        base_twist=base_twist,
        ee_target=ee_target,
        ee_pose=ee_pose,
        joint_proxy=gait_joint_proxy(travel),
        travel=travel,
    )


def ee_pose_in_base(robot: RobotState) -> Pose6:
    """Current world ee pose expressed in the base frame."""
    r = euler_to_matrix(robot.base_pose.orientation)
    dp = robot.ee_pose.position - robot.base_pose.position
    rel_rot = r.T @ euler_to_matrix(robot.ee_pose.orientation)
    return Pose6(r.T @ dp, matrix_to_euler(rel_rot))


def ik_pseudoinverse_step(jacobian, error) -> np.ndarray:
    """Minimum-norm joint step solving J dq = e via J^T (J J^T)^{-1} e."""
    j = np.asarray(jacobian, dtype=float)
    e = np.asarray(error, dtype=float)
    if j.ndim != 2 or e.shape != (j.shape[0],):
        raise InvalidArgumentError(
            f"need J (m,n) and e (m,), got {j.shape} and {e.shape}"
        )
    jjt = j @ j.T
    if np.linalg.cond(jjt) > 1e12:
        raise SingularJacobianError(
            f"J J^T condition number {np.linalg.cond(jjt):.3e} exceeds 1e12"
        )
    return j.T @ np.linalg.solve(jjt, e)


def interpolate_target(p, p_end, t: float, total: float) -> np.ndarray:
    """Linear blend from p to p_end: (t/T) p_end + (1 - t/T) p."""
    if total <= 0:
        raise InvalidArgumentError(f"T must be positive, got {total}")
    if t < 0 or t > total:
        raise InvalidArgumentError(f"t must lie in [0, {total}], got {t}")
    p = np.asarray(p, dtype=float)
    p_end = np.asarray(p_end, dtype=float)
    w = t / total
    return w * p_end + (1.0 - w) * p


def gait_observables(robot: RobotState, prev: RobotState, dt: float,
                     u: CommandVector, terrain=None) -> dict:
    """Synthetic low-level signals derived from the gait clock.

    These feed the locomotion reward formulas; they carry no dynamics.
    """
    q = robot.joint_proxy
    q_prev = prev.joint_proxy
    q_dot = (q - q_prev) / dt
    phase = 2.0 * np.pi * robot.travel / GAIT_WAVELENGTH
    leg_phase = phase + _LEG_PHASES[::3]
    contact = 0.5 * (1.0 + np.cos(leg_phase))          # 1 = stance command
    weight = 9.81 * 12.0
    f_foot = weight * contact / np.maximum(np.sum(contact), 1e-6)
    v_z_foot = -GAIT_AMPLITUDE * np.sin(leg_phase) * abs(u.v_lin)
    t_air = 0.5 * (1.0 - contact)
    h_terrain = terrain.height_at(robot.base_pose.position[0],
                                  robot.base_pose.position[1]) if terrain else 0.0
    return {
        "q": q,
        "q_dot": q_dot,
        "q_star": gait_joint_proxy(robot.travel + abs(u.v_lin) * dt),
        "tau": 0.5 * q_dot,
        "contact_cmd": contact,
        "f_foot": f_foot,
        "v_z_foot": v_z_foot,
        "t_air": t_air,
        "h_b": robot.base_pose.position[2] - h_terrain,
        "h_b_target": NOMINAL_HEIGHT,
    }
