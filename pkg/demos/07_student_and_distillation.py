"""Student network forward pass and the imitation-dataset round trip.

The student maps the stacked dual-view tensor plus proprioception to the
same 8 action numbers the teacher emits; training it is out of scope here,
but the supervision pairs it would learn from are recorded to disk.
"""

import os
import time

import numpy as np

from graspsim import EpisodeConfig, run_episode
from graspsim.distill import read_dataset, record_distillation
from graspsim.nn import (
    init_student_weights,
    kd_loss,
    student_forward,
    WeightStore,
)

w = init_student_weights(seed=0)
print(f"student parameters: {w.param_count():,}")

# Round-trip the weights through the on-disk format.
w.save("student.weights")
w2 = WeightStore.load("student.weights")
same = all(np.array_equal(w.get(n), w2.get(n)) for n, _ in w.manifest)
print("weight file round trip bit-exact:", same)
os.remove("student.weights")

# Record one episode of teacher supervision, then read it back.
log, obs = run_episode(
    EpisodeConfig(level=1, object_id="tomato_soup_can", seed=3),
    collect_observations=True,
)
n = record_distillation(log, obs, "supervision.bin")
records = read_dataset("supervision.bin")
print(f"\nrecorded {n} pairs from a '{log.outcome}' episode")

# Run the (untrained) student on the recorded observations and score it
# against the teacher labels with the distillation loss.
t0 = time.perf_counter()
student_actions = np.stack([
    student_forward(r.observation, r.proprio, w) for r in records
])
per_forward = (time.perf_counter() - t0) / len(records)
teacher_actions = np.stack([r.action for r in records])
print(f"student forward: {per_forward * 1e3:.1f} ms per step")
print(f"kd loss, untrained student vs teacher: "
      f"{kd_loss(student_actions, teacher_actions):.4f}")
print(f"kd loss, teacher vs itself: {kd_loss(teacher_actions, teacher_actions)}")
os.remove("supervision.bin")
