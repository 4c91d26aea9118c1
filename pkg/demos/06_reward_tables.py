"""The two reward tables as pure functions with per-term breakdowns."""

import numpy as np

from graspsim.rewards import (
    HighLevelRewardInput,
    LowLevelState,
    high_level_reward,
    low_level_reward,
    yaw_penalty,
)

inp = HighLevelRewardInput(
    phase="approaching", dist_ee_obj=0.45, lift_height=0.0, completed=False,
    q_dot_prev=np.zeros(12), q_dot=np.full(12, 0.1),
    a_prev=np.zeros(8), a=np.full(8, 0.05), v_x_star=0.4,
    d_obj=np.array([1.0, 0, 0]), d_ee=np.array([1.0, 0, 0]),
    d_base=np.array([np.cos(0.2), np.sin(0.2), 0.0]),
    x_obj=0.8, x_base=0.0, h_current=0.52, h_target=0.55,
    psi_c=0.9, psi_0=0.0,
)
bd = high_level_reward(inp)
print("high-level breakdown (raw x weight = contribution):")
for name, (raw, weight, weighted) in bd.terms.items():
    print(f"  {name:14s} {raw:+8.4f} x {weight:+7.3f} = {weighted:+9.5f}")
print(f"  total {bd.total:+.5f}")

# The yaw penalty stays silent until the drift passes 60 degrees.
for deg in (30, 59, 61, 90, 180):
    print(f"yaw drift {deg:3d} deg -> {yaw_penalty(np.deg2rad(deg), 0.0):+.4f}")

state = LowLevelState(
    q=np.full(12, 0.2), q_dot=np.full(12, 0.5), q_ddot=np.zeros(12),
    q_star=np.full(12, 0.1), tau=np.full(12, 1.5),
    v_b=np.array([0.35, 0.02, 0.05]), omega_b=np.array([0.02, 0.03, 0.1]),
    v_x_star=0.4, v_yaw_star=0.1, n_collision=0,
    f_foot=np.array([30.0, 0.0, 28.0, 0.0]),
    v_z_foot=np.array([0.0, 0.12, 0.0, 0.1]),
    t_air=np.array([0.0, 0.55, 0.0, 0.52]), h_b=0.54, h_b_target=0.55,
    q_default=np.full(12, 0.2), contact_cmd=np.array([1.0, 0.0, 1.0, 0.0]),
)
lbd = low_level_reward(state)
print("\nlow-level breakdown:")
for name, (raw, weight, weighted) in lbd.terms.items():
    print(f"  {name:22s} {raw:+9.4f} x {weight:+8.5f} = {weighted:+9.5f}")
print(f"  total {lbd.total:+.5f}")
