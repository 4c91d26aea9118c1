"""Pose algebra walkthrough: composing frames and re-projecting grasps.

Everything downstream (platform, object, gripper, grasp candidates) speaks
6-DoF poses: position plus intrinsic-XYZ Euler angles, normalized to
(-pi, pi].
"""

import numpy as np

from graspsim import Pose6, compose, grasp_to_world, inverse, vec6_encode

np.set_printoptions(precision=4, suppress=True)

# A robot base two meters out, turned 30 degrees left.
base = Pose6(np.array([2.0, 0.5, 0.55]), np.array([0.0, 0.0, np.deg2rad(30)]))
print("base pose:", vec6_encode(base))

# The gripper sits 0.4 m ahead of the base, pitched down slightly.
ee_in_base = Pose6(np.array([0.4, 0.0, 0.1]), np.array([0.0, 0.15, 0.0]))
ee_world = compose(base, ee_in_base)
print("ee in world:", vec6_encode(ee_world))

# Going back: express the world ee pose in the base frame again.
roundtrip = compose(inverse(base), ee_world)
print("roundtrip error:", np.abs(vec6_encode(roundtrip) - vec6_encode(ee_in_base)).max())

# Grasp candidates are stored object-locally; one composition yields the
# world-frame grasp wherever the object currently is.
grasp_local = Pose6(np.array([0.0, 0.0, 0.02]), np.array([0.0, np.pi / 2, 0.0]))
for t in (0.0, 0.5, 1.0):
    object_pose = Pose6(np.array([2.0 + 0.3 * t, 0.0, 0.45]), np.zeros(3))
    world = grasp_to_world(grasp_local, object_pose)
    print(f"t={t:.1f}s  world grasp: {vec6_encode(world)}")

# Angles always come back normalized; 3*pi is the same orientation as pi.
spun = Pose6(np.zeros(3), np.array([3 * np.pi, 0.0, 0.0]))
print("3*pi wraps to:", spun.orientation[0])
