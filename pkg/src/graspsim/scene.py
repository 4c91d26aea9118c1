"""World model: terrain, object catalog, floating-platform motion, episode state.

The platform is kinematic: it follows a prescribed per-level trajectory with
bounded acceleration, and the target object rides on it rigidly until grasped.
Everything is a value; stepping is pure (state in, state out) and the RNG
state travels inside ``SceneState`` so episodes replay bit-for-bit.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, replace

import numpy as np

from .errors import CatalogError, InvalidArgumentError, NotFoundError
from .se3 import (
    TWO_PI,
    Pose6,
    Twist,
    compose,
    inverse,
    rotation_angle_between,
    wrap_angle,
)

TERRAIN_MAX_HEIGHT = 0.1
PLATFORM_THICKNESS = 0.04
PLATFORM_MARGIN = 0.02          # footprint = object footprint + this margin
PLATFORM_Z_RANGE = (0.2, 0.7)   # platform-top height band at reset (and L4 z band)
PLATFORM_AHEAD_RANGE = (1.5, 2.5)
PLATFORM_LATERAL_RANGE = (-0.3, 0.3)
PLATFORM_MAX_ACCEL = 0.5        # m/s^2, kinematic bound for random trajectories
LEVEL_SPEED_RANGES = {
    1: (0.0, 0.15),
    2: (0.15, 0.30),
    3: (0.0, 0.30),
    4: (0.0, 0.30),
}
L4_MAX_VZ = 0.25
OU_THETA = 1.0                  # 1/s mean reversion
OU_SIGMA = 0.12                 # fluctuation around the seeded drift velocity
GRAVITY = 9.81

LIFT_SUCCESS_HEIGHT = 0.15      # meters above the platform top
LIFT_HOLD_STEPS = 10            # consecutive physics steps
YAW_FAIL_LIMIT = np.deg2rad(70.0)
BUMP_REACH = 0.05               # ee this close to the surface disturbs the object
BUMP_DISTANCE = 0.03            # horizontal shove applied by a failed close

SHAPES = ("sphere", "box", "cylinder")
CATEGORIES = ("ball", "long_box", "square_box", "bottle", "cup", "elongated")
_DIM_COUNT = {"sphere": 1, "box": 3, "cylinder": 2}


# ---------------------------------------------------------------------------
# Terrain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TerrainField:
    """Height grid on a regular XY lattice, queried with bilinear interpolation."""

    heights: np.ndarray
    cell_size: float
    origin: np.ndarray

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.ndim != 2 or h.shape[0] < 2 or h.shape[1] < 2:
            raise InvalidArgumentError("terrain grid must be at least 2x2")
        h.setflags(write=False)
        o = np.array(self.origin, dtype=float)
        o.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", o)
        flat32 = np.ascontiguousarray(h, dtype=np.float32).ravel()
        flat32.setflags(write=False)
        object.__setattr__(self, "flat32", flat32)

    def height_at(self, x: float, y: float) -> float:
        """Bilinear height; coordinates outside the lattice clamp to the edge."""
        return float(self.heights_at(np.array([x]), np.array([y]))[0])

    def heights_at(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized bilinear height query (clamped at the lattice edge)."""
        nx, ny = self.heights.shape
        gx = np.clip((xs - self.origin[0]) / self.cell_size, 0.0, nx - 1.0)
        gy = np.clip((ys - self.origin[1]) / self.cell_size, 0.0, ny - 1.0)
        i0 = np.minimum(gx.astype(np.intp), nx - 2)
        j0 = np.minimum(gy.astype(np.intp), ny - 2)
        fx = gx - i0
        fy = gy - j0
        flat = self.heights.ravel()
        idx = i0 * ny + j0
        h00 = flat.take(idx)
        h01 = flat.take(idx + 1)
        h10 = flat.take(idx + ny)
        h11 = flat.take(idx + ny + 1)
        top = h00 + fx * (h10 - h00)
        bot = h01 + fx * (h11 - h01)
        return top + fy * (bot - top)


def sample_terrain(seed: int, extent: float = 8.0, cell_size: float = 0.1) -> TerrainField:
    """Seeded uneven ground: iid uniform [0, 0.1] heights, one 3x3 box smooth."""
    if extent <= 0 or cell_size <= 0:
        raise InvalidArgumentError(
            f"extent and cell_size must be positive, got {extent}, {cell_size}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(round(extent / cell_size)) + 1
    raw = rng.uniform(0.0, TERRAIN_MAX_HEIGHT, size=(n, n))
    padded = np.pad(raw, 1, mode="edge")
    smooth = np.zeros_like(raw)
    for di in range(3):
        for dj in range(3):
            smooth += padded[di:di + n, dj:dj + n]
    smooth /= 9.0
    return TerrainField(smooth, cell_size, np.array([-extent / 2.0, -extent / 2.0]))


# ---------------------------------------------------------------------------
# Object catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectSpec:
    """Primitive proxy for a graspable object."""

    id: str
    shape: str
    dims: tuple
    mass: float
    split: str
    category: str

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise CatalogError(f"{self.id}: unknown shape {self.shape!r}")
        if self.category not in CATEGORIES:
            raise CatalogError(f"{self.id}: unknown category {self.category!r}")
        if self.split not in ("seen", "unseen"):
            raise CatalogError(f"{self.id}: split must be seen/unseen, got {self.split!r}")
        if len(self.dims) != _DIM_COUNT[self.shape]:
            raise CatalogError(
                f"{self.id}: {self.shape} needs {_DIM_COUNT[self.shape]} dims, "
                f"got {len(self.dims)}"
            )
        if any(d <= 0 for d in self.dims) or self.mass <= 0:
            raise CatalogError(f"{self.id}: dims and mass must be positive")

    @property
    def half_height(self) -> float:
        if self.shape == "sphere":
            return self.dims[0]
        if self.shape == "box":
            return self.dims[2] / 2.0
        return self.dims[1] / 2.0

    @property
    def footprint_half(self) -> tuple:
        """Half extents of the upright object's XY bounding box."""
        if self.shape == "sphere":
            r = self.dims[0]
            return (r, r)
        if self.shape == "box":
            return (self.dims[0] / 2.0, self.dims[1] / 2.0)
        r = self.dims[0]
        return (r, r)

    @property
    def bounding_radius(self) -> float:
        if self.shape == "sphere":
            return self.dims[0]
        if self.shape == "box":
            return float(np.linalg.norm(self.dims) / 2.0)
        r, h = self.dims
        return float(np.hypot(r, h / 2.0))


def parse_catalog(text: str) -> list[ObjectSpec]:
    """Parse catalog text: `id shape dim[,dim..] mass split category` per line."""
    specs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise CatalogError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        oid, shape, dims_s, mass_s, split, category = parts
        try:
            dims = tuple(float(d) for d in dims_s.split(","))
            mass = float(mass_s)
        except ValueError as exc:
            raise CatalogError(f"line {lineno} ({oid}): bad number: {exc}") from exc
        specs.append(ObjectSpec(oid, shape, dims, mass, split, category))
    return specs


def validate_catalog(specs: list[ObjectSpec]) -> list[ObjectSpec]:
    if len(specs) != 43:
        raise CatalogError(f"catalog must hold exactly 43 objects, got {len(specs)}")
    seen = [s for s in specs if s.split == "seen"]
    unseen = [s for s in specs if s.split == "unseen"]
    if len(seen) != 30 or len(unseen) != 13:
        raise CatalogError(
            f"catalog split must be 30 seen / 13 unseen, got {len(seen)}/{len(unseen)}"
        )
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise CatalogError(f"duplicate object ids: {dupes}")
    for group, name in ((seen, "seen"), (unseen, "unseen")):
        aspect = [s.half_height / max(s.footprint_half) for s in group]
        if not any(a > 1.25 for a in aspect) or not any(a <= 1.0 for a in aspect):
            raise CatalogError(f"{name} split needs both compact and tall/slender objects")
    return specs


def load_catalog(path=None) -> list[ObjectSpec]:
    """Load and validate an object catalog; default is the bundled 43-object set."""
    if path is None:
        text = (
            importlib.resources.files("graspsim.data")
            .joinpath("objects.txt")
            .read_text(encoding="utf-8")
        )
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    return validate_catalog(parse_catalog(text))


def catalog_by_id(specs: list[ObjectSpec]) -> dict:
    return {s.id: s for s in specs}


# ---------------------------------------------------------------------------
# Platform trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlatformTrajectory:
    """Per-level motion law for the floating platform."""

    level: int
    mode: str                    # linear | arc | random
    speed_range: tuple
    z_policy: str                # fixed | free
    speed: float = 0.0           # constant speed for linear/arc
    heading: float = 0.0         # initial travel direction, radians
    turn_rate: float = 0.0       # rad/s, nonzero only for arcs
    ou_theta: float = OU_THETA
    ou_sigma: float = OU_SIGMA
    drift: tuple = (0.0, 0.0)    # seeded OU mean velocity for random modes
    z_amp: float = 0.0           # seeded vertical-velocity oscillation (level 4)
    z_freq: float = 0.0
    z_phase: float = 0.0


def make_trajectory(level: int, seed: int) -> PlatformTrajectory:
    """Seeded trajectory for one of the four benchmark levels."""
    if level not in (1, 2, 3, 4):
        raise InvalidArgumentError(f"level must be 1..4, got {level}")
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = LEVEL_SPEED_RANGES[level]
    if level in (1, 2):
        mode = "linear" if rng.random() < 0.5 else "arc"
        speed = float(rng.uniform(lo, hi))
        heading = float(rng.uniform(-np.pi, np.pi))
        turn_rate = 0.0
        if mode == "arc":
            radius = float(rng.uniform(1.0, 3.0))
            turn_rate = (speed / radius) * (1.0 if rng.random() < 0.5 else -1.0)
        return PlatformTrajectory(level, mode, (lo, hi), "fixed",
                                  speed=speed, heading=heading, turn_rate=turn_rate)
    drift_dir = rng.uniform(-np.pi, np.pi)
    drift_mag = rng.uniform(0.08, 0.25) if level == 3 else rng.uniform(0.18, hi)
    drift = (float(drift_mag * np.cos(drift_dir)), float(drift_mag * np.sin(drift_dir)))
    if level == 3:
        return PlatformTrajectory(level, "random", (lo, hi), "fixed", drift=drift)
    return PlatformTrajectory(
        level, "random", (lo, hi), "free", drift=drift,
        z_amp=float(rng.uniform(0.18, L4_MAX_VZ)),
        z_freq=float(rng.uniform(0.08, 0.25)),
        z_phase=float(rng.uniform(0.0, TWO_PI)),
    )


# ---------------------------------------------------------------------------
# Scene state and stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeConfig:
    level: int
    object_id: str
    seed: int
    physics_dt: float = 0.02
    decision_dt: float = 0.1
    timeout_steps: int = 300

    def __post_init__(self):
        if self.timeout_steps <= 0:
            raise InvalidArgumentError("timeout_steps must be positive")
        ratio = self.decision_dt / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidArgumentError(
                f"decision_dt must be an integer multiple of physics_dt "
                f"({self.decision_dt} / {self.physics_dt})"
            )

    @property
    def substeps(self) -> int:
        return int(round(self.decision_dt / self.physics_dt))


@dataclass(frozen=True)
class EpisodeStatus:
    phase: str = "approaching"   # approaching|grasped|lifted|success|failed_*
    attempt_count: int = 0
    success_step: int | None = None
    hold_steps: int = 0          # consecutive physics steps above lift height

    @property
    def terminal(self) -> bool:
        return self.phase.startswith("failed") or self.phase == "success"


@dataclass(frozen=True)
class SceneState:
    time: float
    platform_pose: Pose6
    platform_twist: Twist
    object_pose: Pose6
    object_twist: Twist
    object_attached_to: str      # platform | gripper | free
    terrain: TerrainField
    rng_state: dict
    object_spec: ObjectSpec
    mount_offset: Pose6          # object pose in the platform frame while riding
    platform_half: tuple         # XY half extents of the platform top
    grip_offset: Pose6 | None = None  # object pose in the ee frame while held


def _rng_from_state(state: dict) -> np.random.Generator:
    g = np.random.Generator(np.random.PCG64())
    g.bit_generator.state = state
    return g


def trajectory_velocity(traj: PlatformTrajectory, t: float) -> np.ndarray | None:
    """Closed-form platform velocity for the prescribed modes; None for random."""
    if traj.mode == "linear":
        return traj.speed * np.array([np.cos(traj.heading), np.sin(traj.heading), 0.0])
    if traj.mode == "arc":
        a = traj.heading + traj.turn_rate * t
        return traj.speed * np.array([np.cos(a), np.sin(a), 0.0])
    return None


def reset_episode(config: EpisodeConfig, catalog,
                  traj: PlatformTrajectory | None = None) -> SceneState:
    """Seeded initial scene: platform ahead of the robot spawn, object riding it.

    Passing the trajectory primes the initial platform twist so prescribed
    (linear/arc) motion starts at its constant speed rather than ramping.
    """
    lookup = catalog if isinstance(catalog, dict) else catalog_by_id(catalog)
    if config.object_id not in lookup:
        raise NotFoundError(f"object id {config.object_id!r} not in catalog")
    spec = lookup[config.object_id]
    rng = np.random.Generator(np.random.PCG64(config.seed))
    terrain = sample_terrain(int(rng.integers(2**63)))
    px = rng.uniform(*PLATFORM_AHEAD_RANGE)
    py = rng.uniform(*PLATFORM_LATERAL_RANGE)
    pz = rng.uniform(*PLATFORM_Z_RANGE)
    platform_pose = Pose6(np.array([px, py, pz]), np.zeros(3))
    mount = Pose6(np.array([0.0, 0.0, spec.half_height]), np.zeros(3))
    fx, fy = spec.footprint_half
    twist = Twist.zero()
    if traj is not None:
        v0 = trajectory_velocity(traj, 0.0)
        if v0 is not None:
            twist = Twist(v0, np.zeros(3))
    state = SceneState(
        time=0.0,
        platform_pose=platform_pose,
        platform_twist=twist,
        object_pose=compose(platform_pose, mount),
        object_twist=twist,
        object_attached_to="platform",
        terrain=terrain,
        rng_state=rng.bit_generator.state,
        object_spec=spec,
        mount_offset=mount,
        platform_half=(fx + PLATFORM_MARGIN, fy + PLATFORM_MARGIN),
    )
    return state


def initial_status() -> EpisodeStatus:
    return EpisodeStatus()


def _platform_velocity(state: SceneState, traj: PlatformTrajectory, dt: float):
    """Velocity for the next step plus the advanced RNG state."""
    closed_form = trajectory_velocity(traj, state.time + dt)
    if closed_form is not None:
        return closed_form, state.rng_state

    # Mean-reverting random velocity, acceleration-bounded and speed-clipped.
    v = state.platform_twist.linear
    rng = _rng_from_state(state.rng_state)
    noise = rng.normal(size=2)
    dv = (traj.ou_theta * (np.asarray(traj.drift) - v[:2]) * dt
          + traj.ou_sigma * np.sqrt(dt) * noise)
    dv_cap = PLATFORM_MAX_ACCEL * dt
    dv_norm = float(np.linalg.norm(dv))
    if dv_norm > dv_cap:
        dv *= dv_cap / dv_norm
    vxy = v[:2] + dv
    lo, hi = traj.speed_range
    speed = float(np.linalg.norm(vxy))
    if speed > hi:
        vxy *= hi / speed
    elif speed < lo and speed > 0.0:
        vxy *= lo / speed
    vz = 0.0
    if traj.z_policy == "free":
        vz_target = traj.z_amp * np.sin(
            TWO_PI * traj.z_freq * (state.time + dt) + traj.z_phase
        )
        dvz = float(np.clip(vz_target - v[2], -dv_cap, dv_cap))
        vz = float(np.clip(v[2] + dvz, -L4_MAX_VZ, L4_MAX_VZ))
    return np.array([vxy[0], vxy[1], vz]), rng.bit_generator.state


def step_scene(state: SceneState, traj: PlatformTrajectory, dt: float,
               ee_pose: Pose6 | None = None) -> SceneState:
    """Advance the platform by dt; the object follows its carrier rigidly.

    The displacement over this step uses the stored (pre-step) twist, so a
    finite difference of positions across the step reproduces the twist
    exactly.  When the object rides the gripper, ``ee_pose`` must be the
    end-effector pose after the robot has stepped.
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    p = state.platform_pose.position + state.platform_twist.linear * dt
    lo, hi = PLATFORM_Z_RANGE
    v_next, rng_state = _platform_velocity(state, traj, dt)
    if traj.z_policy == "free":
        if p[2] <= lo:
            p = np.array([p[0], p[1], lo])
            v_next[2] = max(v_next[2], 0.0)
        elif p[2] >= hi:
            p = np.array([p[0], p[1], hi])
            v_next[2] = min(v_next[2], 0.0)
    platform_pose = Pose6(p, state.platform_pose.orientation)
    platform_twist = Twist(v_next, np.zeros(3))

    attached = state.object_attached_to
    obj_pose = state.object_pose
    obj_twist = state.object_twist
    grip = state.grip_offset
    if attached == "platform":
        obj_pose = compose(platform_pose, state.mount_offset)
        obj_twist = platform_twist
    elif attached == "gripper":
        if ee_pose is None:
            raise InvalidArgumentError("step_scene needs ee_pose while object is held")
        new_pose = compose(ee_pose, grip)
        lin = (new_pose.position - obj_pose.position) / dt
        ang = wrap_angle(new_pose.orientation - obj_pose.orientation) / dt
        obj_pose = new_pose
        obj_twist = Twist(lin, ang)
    else:  # free: ballistic drop until resting on the terrain
        vz = obj_twist.linear[2] - GRAVITY * dt
        pos = obj_pose.position + np.array([obj_twist.linear[0] * dt,
                                            obj_twist.linear[1] * dt,
                                            obj_twist.linear[2] * dt])
        floor = state.terrain.height_at(pos[0], pos[1]) + state.object_spec.half_height
        if pos[2] <= floor:
            pos = np.array([pos[0], pos[1], floor])
            obj_twist = Twist.zero()
        else:
            obj_twist = Twist(np.array([obj_twist.linear[0], obj_twist.linear[1], vz]),
                              obj_twist.angular)
        obj_pose = Pose6(pos, obj_pose.orientation)

    return replace(
        state,
        time=state.time + dt,
        platform_pose=platform_pose,
        platform_twist=platform_twist,
        object_pose=obj_pose,
        object_twist=obj_twist,
        rng_state=rng_state,
    )


# ---------------------------------------------------------------------------
# Grasp attempts and episode status
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraspCriteria:
    """Tolerances for a gripper close to capture the object."""

    pos_tol: float = 0.025
    ori_tol: float = 0.26
    max_rel_speed: float = 0.2


def relative_close_speed(state: SceneState, robot) -> float:
    """Object speed relative to the robot base (the arm is settled at close)."""
    return float(np.linalg.norm(state.object_twist.linear - robot.base_twist.linear))


def find_aligned_candidate(bank, state: SceneState, ee_pose: Pose6,
                           criteria: GraspCriteria):
    """Index of a stored grasp whose world pose matches the ee, or None."""
    best = None
    best_d = np.inf
    for i, cand in enumerate(bank.candidates):
        world = compose(state.object_pose, cand.pose)
        d = float(np.linalg.norm(world.position - ee_pose.position))
        if d > criteria.pos_tol:
            continue
        if rotation_angle_between(world.orientation, ee_pose.orientation) > criteria.ori_tol:
            continue
        if d < best_d:
            best, best_d = i, d
    return best


def apply_gripper_close(state: SceneState, robot, bank,
                        criteria: GraspCriteria) -> tuple[SceneState, bool]:
    """Resolve a gripper-close event.

    An aligned, slow-enough close captures the object onto the gripper.  A
    miss close enough to touch shoves the object across the platform; the
    footprint is barely larger than the object, so a shove usually drops it.
    """
    if state.object_attached_to != "platform":
        return state, False
    ee = robot.ee_pose
    aligned = find_aligned_candidate(bank, state, ee, criteria)
    if aligned is not None and relative_close_speed(state, robot) <= criteria.max_rel_speed:
        grip = compose(inverse(ee), state.object_pose)
        return replace(state, object_attached_to="gripper", grip_offset=grip), True

    gap = float(np.linalg.norm(ee.position - state.object_pose.position))
    if gap <= state.object_spec.bounding_radius + BUMP_REACH:
        away = state.object_pose.position[:2] - ee.position[:2]
        n = float(np.linalg.norm(away))
        away = away / n if n > 1e-9 else np.array([1.0, 0.0])
        rel = state.mount_offset.position[:2] + BUMP_DISTANCE * away
        fx, fy = state.platform_half
        if abs(rel[0]) > fx or abs(rel[1]) > fy:
            # Shoved off the platform: it falls and the episode is lost.
            pos = state.object_pose.position + np.array([away[0], away[1], 0.0]) * BUMP_DISTANCE
            return replace(
                state,
                object_attached_to="free",
                object_pose=Pose6(pos, state.object_pose.orientation),
                object_twist=Twist.zero(),
            ), False
        mount = Pose6(np.array([rel[0], rel[1], state.mount_offset.position[2]]),
                      state.mount_offset.orientation)
        return replace(
            state,
            mount_offset=mount,
            object_pose=compose(state.platform_pose, mount),
        ), False
    return state, False


def check_status(state: SceneState, robot, status: EpisodeStatus,
                 config: EpisodeConfig, decision_step: int,
                 close_event: bool = False) -> EpisodeStatus:
    """Advance the episode state machine by one physics step."""
    if status.terminal:
        return status
    attempts = status.attempt_count + (1 if close_event else 0)
    yaw_drift = abs(wrap_angle(robot.base_pose.orientation[2] - robot.yaw_ref))
    if yaw_drift > YAW_FAIL_LIMIT:
        return EpisodeStatus("failed_yaw", attempts, None, 0)
    if decision_step >= config.timeout_steps:
        return EpisodeStatus("failed_timeout", attempts, None, 0)

    if state.object_attached_to == "gripper":
        lift = state.object_pose.position[2] - state.platform_pose.position[2]
        if lift >= LIFT_SUCCESS_HEIGHT:
            hold = status.hold_steps + 1
            if hold >= LIFT_HOLD_STEPS:
                return EpisodeStatus("success", attempts, decision_step, hold)
            return EpisodeStatus("lifted", attempts, None, hold)
        return EpisodeStatus("grasped", attempts, None, 0)

    if state.object_attached_to == "free":
        return EpisodeStatus("failed_dropped", attempts, None, 0)
    rel = state.mount_offset.position[:2]
    fx, fy = state.platform_half
    if abs(rel[0]) > fx or abs(rel[1]) > fy:
        return EpisodeStatus("failed_dropped", attempts, None, 0)
    return EpisodeStatus("approaching", attempts, None, 0)
