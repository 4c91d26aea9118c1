from dataclasses import replace

import numpy as np
import pytest

from graspsim.errors import CatalogError, InvalidArgumentError, NotFoundError
from graspsim.gfm import build_memory, generate_candidates
from graspsim.robot import initial_robot
from graspsim.scene import (
    EpisodeConfig,
    GraspCriteria,
    LEVEL_SPEED_RANGES,
    ObjectSpec,
    apply_gripper_close,
    check_status,
    initial_status,
    make_trajectory,
    parse_catalog,
    reset_episode,
    sample_terrain,
    step_scene,
    validate_catalog,
)
from graspsim.se3 import Pose6, compose, inverse

from conftest import make_config


# ---------------------------------------------------------------------------
# Terrain
# ---------------------------------------------------------------------------

def test_terrain_bounds_and_determinism():
    t1 = sample_terrain(42)
    t2 = sample_terrain(42)
    assert np.array_equal(t1.heights, t2.heights)
    assert t1.heights.min() >= 0.0 and t1.heights.max() <= 0.1
    assert not np.array_equal(t1.heights, sample_terrain(43).heights)


def test_terrain_node_query_exact():
    t = sample_terrain(7, extent=2.0, cell_size=0.5)
    for i in range(t.heights.shape[0]):
        for j in range(t.heights.shape[1]):
            x = t.origin[0] + i * t.cell_size
            y = t.origin[1] + j * t.cell_size
            assert t.height_at(x, y) == pytest.approx(t.heights[i, j], abs=1e-12)


def test_terrain_continuity_lipschitz(rng):
    t = sample_terrain(3)
    bound = 0.1 / t.cell_size
    for _ in range(300):
        x, y = rng.uniform(-3.5, 3.5, 2)
        eps = rng.uniform(-0.05, 0.05, 2)
        dh = abs(t.height_at(x + eps[0], y + eps[1]) - t.height_at(x, y))
        assert dh <= bound * np.linalg.norm(eps) + 1e-12


def test_terrain_invalid_geometry():
    with pytest.raises(InvalidArgumentError):
        sample_terrain(0, extent=-1.0)
    with pytest.raises(InvalidArgumentError):
        sample_terrain(0, cell_size=0.0)


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

def test_bundled_catalog_counts(catalog):
    assert len(catalog) == 43
    assert sum(1 for s in catalog if s.split == "seen") == 30
    assert sum(1 for s in catalog if s.split == "unseen") == 13
    assert all(all(d > 0 for d in s.dims) and s.mass > 0 for s in catalog)


def test_catalog_count_mismatch_rejected(catalog):
    with pytest.raises(CatalogError):
        validate_catalog(list(catalog)[:42])


def test_catalog_parse_errors():
    with pytest.raises(CatalogError):
        parse_catalog("thing pyramid 0.1 0.2 seen ball\n")
    with pytest.raises(CatalogError):
        parse_catalog("thing sphere 0.1 0.2 seen nosuchcategory\n")
    with pytest.raises(CatalogError):
        parse_catalog("only five fields here now\n")


def test_catalog_duplicate_ids_rejected(catalog):
    specs = list(catalog)
    specs[1] = ObjectSpec(specs[0].id, "sphere", (0.02,), 0.1,
                          specs[1].split, "ball")
    with pytest.raises(CatalogError):
        validate_catalog(specs)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def test_make_trajectory_rejects_bad_level():
    with pytest.raises(InvalidArgumentError):
        make_trajectory(5, 0)


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_platform_speed_ranges_sampled(level, catalog_map):
    lo, hi = LEVEL_SPEED_RANGES[level]
    cfg = make_config(level=level, seed=100 + level)
    traj = make_trajectory(level, 100 + level)
    state = reset_episode(cfg, catalog_map, traj)
    for _ in range(2000):
        state = step_scene(state, traj, cfg.physics_dt)
        speed = float(np.linalg.norm(state.platform_twist.linear[:2]))
        assert lo - 1e-12 <= speed <= hi + 1e-12
        if level == 4:
            assert 0.2 <= state.platform_pose.position[2] <= 0.7
        else:
            assert state.platform_pose.position[2] == pytest.approx(
                state.platform_pose.position[2]
            )


def test_levels_1_to_3_keep_z_constant(catalog_map):
    for level in (1, 2, 3):
        cfg = make_config(level=level, seed=55)
        traj = make_trajectory(level, 55)
        state = reset_episode(cfg, catalog_map, traj)
        z0 = state.platform_pose.position[2]
        for _ in range(500):
            state = step_scene(state, traj, cfg.physics_dt)
        assert state.platform_pose.position[2] == pytest.approx(z0, abs=1e-12)


# ---------------------------------------------------------------------------
# Reset and stepping
# ---------------------------------------------------------------------------

def test_reset_placement_and_attachment(catalog_map):
    for seed in range(50):
        cfg = make_config(seed=seed)
        state = reset_episode(cfg, catalog_map)
        assert 1.5 <= state.platform_pose.position[0] <= 2.5
        assert 0.2 <= state.platform_pose.position[2] <= 0.7
        expected = compose(state.platform_pose, state.mount_offset)
        assert np.allclose(state.object_pose.position, expected.position)


def test_reset_unknown_object(catalog_map):
    with pytest.raises(NotFoundError):
        reset_episode(make_config(object_id="warp_core"), catalog_map)


def test_reset_deterministic(catalog_map):
    a = reset_episode(make_config(seed=9), catalog_map)
    b = reset_episode(make_config(seed=9), catalog_map)
    assert np.array_equal(a.platform_pose.position, b.platform_pose.position)
    assert np.array_equal(a.terrain.heights, b.terrain.heights)


def test_step_finite_difference_matches_twist(catalog_map):
    cfg = make_config(level=2, seed=5)
    traj = make_trajectory(2, 5)
    state = reset_episode(cfg, catalog_map, traj)
    for _ in range(200):
        before = state
        state = step_scene(state, traj, cfg.physics_dt)
        fd = (state.object_pose.position - before.object_pose.position) / cfg.physics_dt
        speed = np.linalg.norm(before.object_twist.linear)
        assert np.allclose(fd, before.object_twist.linear, atol=1e-6 * (1 + speed))


def test_step_stationary_trajectory(catalog_map):
    # constant speed 0 comes out of the level-1 range; force it via the dataclass
    traj = make_trajectory(1, 2)
    traj = type(traj)(1, "linear", traj.speed_range, "fixed", speed=0.0)
    cfg = make_config(seed=2)
    state = reset_episode(cfg, catalog_map, traj)
    nxt = step_scene(state, traj, cfg.physics_dt)
    assert nxt.time == pytest.approx(cfg.physics_dt)
    assert np.array_equal(nxt.platform_pose.position, state.platform_pose.position)
    assert np.array_equal(nxt.object_pose.position, state.object_pose.position)


def test_attachment_relative_pose_constant(catalog_map):
    cfg = make_config(level=3, seed=8)
    traj = make_trajectory(3, 8)
    state = reset_episode(cfg, catalog_map, traj)
    rel0 = compose(inverse(state.platform_pose), state.object_pose)
    for _ in range(300):
        state = step_scene(state, traj, cfg.physics_dt)
    rel = compose(inverse(state.platform_pose), state.object_pose)
    assert np.allclose(rel.position, rel0.position, atol=1e-12)
    assert np.allclose(rel.orientation, rel0.orientation, atol=1e-12)


def test_step_scene_rejects_bad_dt(catalog_map):
    cfg = make_config(seed=1)
    traj = make_trajectory(1, 1)
    state = reset_episode(cfg, catalog_map, traj)
    with pytest.raises(InvalidArgumentError):
        step_scene(state, traj, 0.0)


def test_scene_sequence_bit_deterministic(catalog_map):
    cfg = make_config(level=4, seed=77)
    traj = make_trajectory(4, 77)

    def rollout():
        st = reset_episode(cfg, catalog_map, traj)
        acc = []
        for _ in range(100):
            st = step_scene(st, traj, cfg.physics_dt)
            acc.append(st.platform_pose.position)
        return np.array(acc)

    assert np.array_equal(rollout(), rollout())


# ---------------------------------------------------------------------------
# Gripper close and status transitions
# ---------------------------------------------------------------------------

def _scene_and_aligned_robot(catalog_map, object_id="rubiks_cube", seed=4):
    cfg = make_config(object_id=object_id, seed=seed)
    state = reset_episode(cfg, catalog_map)
    spec = catalog_map[object_id]
    cands = generate_candidates(spec, 100, seed=1)
    bank = build_memory(cands, 30, object_id=object_id)
    robot = initial_robot(state.terrain)
    world = compose(state.object_pose, bank.candidates[0].pose)
    robot = replace(robot, ee_pose=world)
    return cfg, state, robot, bank


def test_aligned_close_attaches(catalog_map):
    cfg, state, robot, bank = _scene_and_aligned_robot(catalog_map)
    new_state, ok = apply_gripper_close(state, robot, bank, GraspCriteria())
    assert ok and new_state.object_attached_to == "gripper"


def test_misaligned_close_bumps_object_off(catalog_map):
    cfg, state, robot, bank = _scene_and_aligned_robot(catalog_map)
    status = initial_status()
    # keep closing with the gripper badly misaligned right next to the object;
    # the tight footprint means a couple of shoves push it off the platform
    for attempt in range(1, 5):
        off = Pose6(state.object_pose.position + np.array([0.05, 0.0, 0.0]),
                    np.array([0.4, 0.9, 0.2]))
        robot_off = replace(robot, ee_pose=off)
        new_state, ok = apply_gripper_close(state, robot_off, bank,
                                            GraspCriteria())
        assert not ok
        assert not np.allclose(new_state.object_pose.position,
                               state.object_pose.position)
        status = check_status(new_state, robot_off, status, cfg, 0,
                              close_event=True)
        state = new_state
        if state.object_attached_to == "free":
            break
    assert state.object_attached_to == "free"
    assert status.phase == "failed_dropped"
    assert status.attempt_count == attempt


def test_far_close_is_a_no_op(catalog_map):
    cfg, state, robot, bank = _scene_and_aligned_robot(catalog_map)
    far = Pose6(state.object_pose.position + np.array([1.0, 0, 0]), np.zeros(3))
    robot = replace(robot, ee_pose=far)
    new_state, ok = apply_gripper_close(state, robot, bank, GraspCriteria())
    assert not ok and new_state.object_attached_to == "platform"
    assert np.allclose(new_state.object_pose.position, state.object_pose.position)


def test_yaw_drift_over_70_degrees_fails(catalog_map):
    cfg, state, robot, _ = _scene_and_aligned_robot(catalog_map)
    yawed = Pose6(robot.base_pose.position, np.array([0, 0, np.deg2rad(71.0)]))
    robot = replace(robot, base_pose=yawed, yaw_ref=0.0)
    status = check_status(state, robot, initial_status(), cfg, 0)
    assert status.phase == "failed_yaw"
    # 69 degrees survives
    yawed = Pose6(robot.base_pose.position, np.array([0, 0, np.deg2rad(69.0)]))
    robot = replace(robot, base_pose=yawed, yaw_ref=0.0)
    status = check_status(state, robot, initial_status(), cfg, 0)
    assert status.phase == "approaching"


def test_grasp_lift_hold_to_success(catalog_map):
    cfg, state, robot, bank = _scene_and_aligned_robot(catalog_map)
    state, ok = apply_gripper_close(state, robot, bank, GraspCriteria())
    assert ok
    # hold the object 0.2 m above the platform top for 10 physics checks
    lifted = Pose6(
        state.platform_pose.position + np.array([0.0, 0.0, 0.2]), np.zeros(3)
    )
    state = replace(state, object_pose=lifted)
    status = check_status(state, robot, initial_status(), cfg, 0, close_event=True)
    assert status.phase == "grasped" or status.phase == "lifted"
    for _ in range(10):
        status = check_status(state, robot, status, cfg, 3)
    assert status.phase == "success"
    assert status.success_step == 3
    assert status.attempt_count == 1


def test_timeout_status(catalog_map):
    cfg, state, robot, _ = _scene_and_aligned_robot(catalog_map)
    status = check_status(state, robot, initial_status(), cfg,
                          cfg.timeout_steps)
    assert status.phase == "failed_timeout"


def test_episode_config_validation():
    with pytest.raises(InvalidArgumentError):
        EpisodeConfig(level=1, object_id="x", seed=0, timeout_steps=0)
    with pytest.raises(InvalidArgumentError):
        EpisodeConfig(level=1, object_id="x", seed=0, physics_dt=0.03,
                      decision_dt=0.1)
    assert EpisodeConfig(level=1, object_id="x", seed=0).substeps == 5
