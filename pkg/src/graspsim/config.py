"""Runtime configuration: documented defaults plus key=value file overrides.

The config file is plain text, one `key = value` per line, `#` comments.
Keys use dotted namespaces matching the field names below.  The environment
variable GRASPSIM_CONFIG points at a default file for the CLI.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import InvalidArgumentError

ENV_CONFIG_VAR = "GRASPSIM_CONFIG"


@dataclass
class SimConfig:
    # clocks
    physics_dt: float = 0.02
    decision_dt: float = 0.1
    timeout_steps: int = 300
    # grasp generation / fusion
    gripper_aperture: float = 0.085
    bank_size: int = 30
    candidate_count: int = 200
    # perception
    hfov_deg: float = 87.0
    mask_flip_prob: float = 0.0
    # teacher controller
    teacher_standoff: float = 0.6
    teacher_align_pos_tol: float = 0.025
    teacher_align_ori_tol: float = 0.26
    teacher_max_rel_speed: float = 0.2
    teacher_intercept_horizon: float = 0.5
    # reward kernels
    sigma_track: float = 0.25
    sigma_cf: float = 100.0
    sigma_cv: float = 0.05
    # high-level reward weight overrides (empty = table defaults)
    reward_weights: dict = None

    def __post_init__(self):
        if self.reward_weights is None:
            self.reward_weights = {}


def _coerce(current, text: str):
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    return text


def load_config(path=None) -> SimConfig:
    """Build a SimConfig from defaults plus an optional override file."""
    cfg = SimConfig()
    if path is None:
        path = os.environ.get(ENV_CONFIG_VAR)
    if not path:
        return cfg
    names = {f.name for f in fields(SimConfig)}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgumentError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key.startswith("rewards."):
                cfg.reward_weights[key[len("rewards."):]] = float(value)
                continue
            if key not in names:
                raise InvalidArgumentError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                setattr(cfg, key, _coerce(getattr(cfg, key), value))
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}:{lineno}: {exc}") from exc
    return cfg
