"""Episode loop wiring all modules together.

One decision step = render (optional) -> latency buffer -> history stack ->
teacher acts on privileged state -> command integration -> five physics
substeps -> status/reward bookkeeping.  Fully deterministic per seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .camera import (
    LatencyBuffer,
    ObsHistory,
    base_camera,
    render_frame,
    stack_observation,
    wrist_camera,
)
from .config import SimConfig
from .errors import NotFoundError
from .gfm import alignment_gfm_weights, build_memory, generate_candidates
from .robot import (
    DEFAULT_JOINTS,
    NOMINAL_HEIGHT,
    accumulate_command,
    execute_command,
    gait_observables,
    initial_robot,
)
from .rewards import (
    HighLevelRewardInput,
    LowLevelState,
    high_level_reward,
    low_level_reward,
)
from .scene import (
    EpisodeConfig,
    apply_gripper_close,
    catalog_by_id,
    check_status,
    initial_status,
    load_catalog,
    make_trajectory,
    reset_episode,
    step_scene,
)
from .se3 import euler_to_matrix, wrap_angle
from .teacher import TeacherConfig, teacher_step
from .robot import ee_pose_in_base

CLOSE_COOLDOWN_STEPS = 5


def derive_seed(*parts) -> int:
    """Stable sub-seed from integer parts (order matters)."""
    return int(np.random.SeedSequence([int(p) & 0x7FFFFFFF for p in parts])
               .generate_state(1)[0])


def build_proprio(robot, terrain) -> np.ndarray:
    """24-number proprioception vector fed to the student network."""
    base = robot.base_pose
    h = base.position[2] - (terrain.height_at(base.position[0], base.position[1])
                            if terrain is not None else 0.0)
    ee_local = ee_pose_in_base(robot)
    return np.concatenate([
        [h],
        base.orientation,
        robot.base_twist.linear,
        robot.base_twist.angular,
        robot.ee_target.position,
        robot.ee_target.orientation,
        ee_local.position,
        ee_local.orientation,
        [1.0 if robot.gripper == "closed" else 0.0],
        [wrap_angle(base.orientation[2] - robot.yaw_ref)],
    ]).astype(np.float32)


@dataclass
class EpisodeLog:
    """Per-episode record: config echo, per-step traces, close events, outcome."""

    level: int
    object_id: str
    category: str
    seed: int
    physics_dt: float
    decision_dt: float
    timeout_steps: int
    steps: list
    close_events: list
    outcome: str
    attempt_count: int
    success_step: int | None

    def to_json(self) -> str:
        payload = {
            "level": self.level,
            "object_id": self.object_id,
            "category": self.category,
            "seed": self.seed,
            "physics_dt": self.physics_dt,
            "decision_dt": self.decision_dt,
            "timeout_steps": self.timeout_steps,
            "outcome": self.outcome,
            "attempt_count": self.attempt_count,
            "success_step": self.success_step,
            "close_events": self.close_events,
            "steps": self.steps,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def first_close_success(self) -> bool:
        return bool(self.close_events) and bool(self.close_events[0][1])


@dataclass(frozen=True)
class EpisodeSummary:
    """Compact episode result used by the metrics aggregation."""

    level: int
    object_id: str
    category: str
    seed: int
    outcome: str
    success_step: int | None
    attempt_count: int
    first_close_success: bool
    n_steps: int


def summarize(log: EpisodeLog) -> EpisodeSummary:
    return EpisodeSummary(
        log.level, log.object_id, log.category, log.seed, log.outcome,
        log.success_step, log.attempt_count, log.first_close_success, log.n_steps,
    )


def _high_level_input(scene, robot, status, action_vec, prev_action,
                      q_dot, q_dot_prev, v_x_star, just_completed):
    base = robot.base_pose
    obj = scene.object_pose.position
    d_obj = obj - base.position
    n = np.linalg.norm(d_obj)
    d_obj = d_obj / n if n > 1e-9 else np.array([1.0, 0.0, 0.0])
    d_ee = euler_to_matrix(robot.ee_pose.orientation)[:, 0]
    yaw = base.orientation[2]
    d_base = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    lift = max(0.0, scene.object_pose.position[2] - scene.platform_pose.position[2]) \
        if scene.object_attached_to == "gripper" else 0.0
    phase = {"approaching": "approaching", "grasped": "grasped",
             "lifted": "lifted"}.get(status.phase, "lifted")
    terrain_h = scene.terrain.height_at(base.position[0], base.position[1])
    return HighLevelRewardInput(
        phase=phase,
        dist_ee_obj=float(np.linalg.norm(robot.ee_pose.position - obj)),
        lift_height=float(lift),
        completed=just_completed,
        q_dot_prev=q_dot_prev,
        q_dot=q_dot,
        a_prev=prev_action,
        a=action_vec,
        v_x_star=float(v_x_star),
        d_obj=d_obj,
        d_ee=d_ee / np.linalg.norm(d_ee),
        d_base=d_base,
        x_obj=float(np.linalg.norm(obj[:2] - base.position[:2])),
        x_base=0.0,
        h_current=float(base.position[2] - terrain_h),
        h_target=NOMINAL_HEIGHT,
        psi_c=float(yaw),
        psi_0=float(robot.yaw_ref),
    )


def run_episode(config: EpisodeConfig, *, teacher_cfg: TeacherConfig | None = None,
                sim_cfg: SimConfig | None = None, gfm_weights=None, catalog=None,
                observe: bool = False, collect_observations: bool = False):
    """Run one seeded episode; returns the log (plus observations if asked).

    ``observe`` switches the render/latency/stack pipeline on; it changes
    nothing about the control flow (the teacher is privileged), so pure
    benchmark sweeps leave it off for speed.  ``collect_observations``
    implies ``observe`` and returns (log, records) where each record is
    (stacked tensor, proprio, action vector, gripper bit, step index).
    """
    teacher_cfg = teacher_cfg or TeacherConfig()
    sim_cfg = sim_cfg or SimConfig()
    observe = observe or collect_observations
    catalog = catalog if catalog is not None else load_catalog()
    lookup = catalog_by_id(catalog) if not isinstance(catalog, dict) else catalog
    if config.object_id not in lookup:
        raise NotFoundError(f"object id {config.object_id!r} not in catalog")
    spec = lookup[config.object_id]

    traj = make_trajectory(config.level, derive_seed(config.seed, 11))
    scene = reset_episode(config, lookup, traj)
    robot = initial_robot(scene.terrain)
    candidates = generate_candidates(spec, sim_cfg.candidate_count,
                                     derive_seed(config.seed, 23),
                                     aperture=sim_cfg.gripper_aperture)
    bank = build_memory(candidates, sim_cfg.bank_size, object_id=spec.id)
    weights = gfm_weights if gfm_weights is not None else alignment_gfm_weights()
    criteria = teacher_cfg.criteria()
    status = initial_status()

    cam_w = wrist_camera(np.deg2rad(sim_cfg.hfov_deg))
    cam_b = base_camera(np.deg2rad(sim_cfg.hfov_deg))
    lat_w, lat_b = LatencyBuffer(), LatencyBuffer()
    hist_w, hist_b = ObsHistory(), ObsHistory()

    steps, close_events, observations = [], [], []
    prev_action = np.zeros(8)
    q_prev = robot.joint_proxy
    q_dot_prev = np.zeros(12)
    last_attempt = -10**9

    for step in range(config.timeout_steps):
        if observe:
            noise_seed = derive_seed(config.seed, 31, step)
            f_w = render_frame(scene, robot, cam_w, sim_cfg.mask_flip_prob, noise_seed)
            f_b = render_frame(scene, robot, cam_b, sim_cfg.mask_flip_prob,
                               noise_seed + 1)
            proprio = build_proprio(robot, scene.terrain)
            hist_w.push(lat_w.push_and_fetch(f_w), proprio)
            hist_b.push(lat_b.push_and_fetch(f_b), proprio)
            stacked = stack_observation(hist_w, hist_b)
        action = teacher_step(scene, robot, bank, weights, teacher_cfg)
        action_vec = action.as_vector()
        if collect_observations:
            observations.append((stacked, hist_w.proprio, action_vec.copy(),
                                 1 if action.gripper_close else 0, step))

        close_event = False
        close_ok = False
        if (action.gripper_close and robot.gripper == "open"
                and step - last_attempt >= CLOSE_COOLDOWN_STEPS):
            scene, close_ok = apply_gripper_close(scene, robot, bank, criteria)
            close_event = True
            last_attempt = step
            close_events.append([step, bool(close_ok)])
            if close_ok:
                robot = replace(robot, gripper="closed")

        u = accumulate_command(robot, action)
        robot_before = robot
        for i in range(config.substeps):
            robot = execute_command(robot, u, scene.terrain, config.physics_dt)
            scene = step_scene(
                scene, traj, config.physics_dt,
                ee_pose=robot.ee_pose if scene.object_attached_to == "gripper" else None,
            )
            status = check_status(scene, robot, status, config, step,
                                  close_event=close_event and i == 0)
            if status.terminal:
                break

        q_now = robot.joint_proxy
        q_dot = (q_now - q_prev) / config.decision_dt
        just_completed = status.phase == "success" and status.success_step == step
        hl = high_level_reward(
            _high_level_input(scene, robot, status, action_vec, prev_action,
                              q_dot, q_dot_prev, action.v_lin, just_completed),
            weights=sim_cfg.reward_weights or None,
        )
        obs_sig = gait_observables(robot, robot_before, config.decision_dt, u,
                                   scene.terrain)
        ll = low_level_reward(
            LowLevelState(
                q=obs_sig["q"], q_dot=obs_sig["q_dot"],
                q_ddot=(obs_sig["q_dot"] - q_dot_prev) / config.decision_dt,
                q_star=obs_sig["q_star"], tau=obs_sig["tau"],
                v_b=robot.base_twist.linear, omega_b=robot.base_twist.angular,
                v_x_star=u.v_lin, v_yaw_star=u.omega_yaw, n_collision=0,
                f_foot=obs_sig["f_foot"], v_z_foot=obs_sig["v_z_foot"],
                t_air=obs_sig["t_air"], h_b=obs_sig["h_b"],
                h_b_target=obs_sig["h_b_target"], q_default=DEFAULT_JOINTS,
                contact_cmd=obs_sig["contact_cmd"],
            ),
            sigma_track=sim_cfg.sigma_track, sigma_cf=sim_cfg.sigma_cf,
            sigma_cv=sim_cfg.sigma_cv,
        )
        steps.append({
            "step": step,
            "phase": status.phase,
            "action": [float(x) for x in action_vec],
            "gripper_close": bool(action.gripper_close),
            "object_pos": [float(x) for x in scene.object_pose.position],
            "object_vel": [float(x) for x in scene.object_twist.linear],
            "base_pos": [float(x) for x in robot.base_pose.position],
            "base_yaw": float(robot.base_pose.orientation[2]),
            "ee_pos": [float(x) for x in robot.ee_pose.position],
            "reward_total": hl.total,
            "low_reward_total": ll.total,
        })
        prev_action = action_vec
        q_prev = q_now
        q_dot_prev = q_dot
        if status.terminal:
            break

    if not status.terminal:
        status = check_status(scene, robot, status, config, config.timeout_steps)

    log = EpisodeLog(
        level=config.level,
        object_id=config.object_id,
        category=spec.category,
        seed=config.seed,
        physics_dt=config.physics_dt,
        decision_dt=config.decision_dt,
        timeout_steps=config.timeout_steps,
        steps=steps,
        close_events=close_events,
        outcome=status.phase,
        attempt_count=status.attempt_count,
        success_step=status.success_step,
    )
    if collect_observations:
        return log, observations
    return log
