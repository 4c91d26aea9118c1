"""Command-line interface.

Subcommands: bench, episode, render, gfm-inspect, distill-record, nn-selftest.
Exit code 0 on success; failures print one machine-parsable line to stderr:
``error: <kind>: <message>``.  The --config option (or GRASPSIM_CONFIG)
points at a key=value file overriding the documented defaults.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .camera import base_camera, dump_frame, render_frame, wrist_camera
from .config import load_config
from .distill import record_distillation
from .episode import derive_seed, run_episode
from .errors import GraspSimError
from .gfm import (alignment_gfm_weights, build_memory, generate_candidates,
                  gfm_forward, save_bank)
from .metrics import run_benchmark, summaries_to_jsonl
from .nn import selftest
from .robot import initial_robot
from .scene import (
    EpisodeConfig,
    catalog_by_id,
    load_catalog,
    make_trajectory,
    reset_episode,
    step_scene,
)
from .se3 import vec6_encode
from .teacher import TeacherConfig, cached_object_feature


def _teacher_config(cfg, use_gfm: bool = True) -> TeacherConfig:
    return TeacherConfig(
        standoff=cfg.teacher_standoff,
        align_pos_tol=cfg.teacher_align_pos_tol,
        align_ori_tol=cfg.teacher_align_ori_tol,
        max_rel_speed_at_close=cfg.teacher_max_rel_speed,
        intercept_horizon=cfg.teacher_intercept_horizon,
        use_gfm=use_gfm,
    )


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    levels = [int(x) for x in args.levels.split(",") if x]
    report, csv_text, summaries = run_benchmark(
        levels,
        episodes_per_level=args.episodes,
        step_budget=args.steps,
        split=args.split,
        seed=args.seed,
        workers=args.workers,
        use_gfm=not args.no_gfm,
        timeout_steps=cfg.timeout_steps,
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    log_path = os.path.join(args.out, "episodes.jsonl")
    with open(csv_path, "w", encoding="ascii", newline="") as fh:
        fh.write(csv_text)
    with open(log_path, "w", encoding="ascii", newline="") as fh:
        fh.write(summaries_to_jsonl(summaries))
    for row in report.rows:
        if row.category == "all":
            tsc = "-" if row.tsc is None else f"{row.tsc:.2f}"
            print(f"level {row.level}: n={row.n_episodes} "
                  f"GSR={row.gsr:.1f}% OSSR={row.ossr:.1f}% TSC={tsc}")
    print(f"wrote {csv_path} and {log_path}")
    return 0


def _cmd_episode(args) -> int:
    cfg = load_config(args.config)
    config = EpisodeConfig(level=args.level, object_id=args.object, seed=args.seed,
                           physics_dt=cfg.physics_dt, decision_dt=cfg.decision_dt,
                           timeout_steps=cfg.timeout_steps)
    log = run_episode(config, teacher_cfg=_teacher_config(cfg), sim_cfg=cfg)
    print(f"outcome={log.outcome} steps={log.n_steps} "
          f"attempts={log.attempt_count} success_step={log.success_step}")
    if args.dump_log:
        with open(args.dump_log, "w", encoding="ascii", newline="") as fh:
            fh.write(log.to_json() + "\n")
        print(f"wrote {args.dump_log}")
    return 0


def _cmd_render(args) -> int:
    cfg = load_config(args.config)
    catalog = load_catalog()
    object_id = args.object or catalog[0].id
    config = EpisodeConfig(level=args.level, object_id=object_id, seed=args.seed,
                           physics_dt=cfg.physics_dt, decision_dt=cfg.decision_dt,
                           timeout_steps=max(cfg.timeout_steps, args.step + 1))
    traj = make_trajectory(config.level, derive_seed(config.seed, 11))
    scene = reset_episode(config, catalog_by_id(catalog), traj)
    robot = initial_robot(scene.terrain)
    for _ in range(args.step * config.substeps):
        scene = step_scene(scene, traj, config.physics_dt)
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for cam, name in ((wrist_camera(np.deg2rad(cfg.hfov_deg)), "wrist"),
                      (base_camera(np.deg2rad(cfg.hfov_deg)), "base")):
        frame = render_frame(scene, robot, cam)
        written += dump_frame(frame, os.path.join(args.out_dir,
                                                  f"step{args.step:04d}_{name}"))
    print("wrote " + " ".join(written))
    return 0


def _cmd_gfm_inspect(args) -> int:
    cfg = load_config(args.config)
    catalog = catalog_by_id(load_catalog())
    if args.object not in catalog:
        from .errors import NotFoundError
        raise NotFoundError(f"object id {args.object!r} not in catalog")
    spec = catalog[args.object]
    candidates = generate_candidates(spec, cfg.candidate_count,
                                     derive_seed(args.seed, 23),
                                     aperture=cfg.gripper_aperture)
    bank = build_memory(candidates, cfg.bank_size, object_id=spec.id)
    config = EpisodeConfig(level=1, object_id=args.object, seed=args.seed)
    scene = reset_episode(config, catalog)
    feat = cached_object_feature(spec)
    fused, alphas = gfm_forward(feat, scene.object_pose, bank,
                                alignment_gfm_weights())
    print(f"object {spec.id} ({spec.shape}, dims {spec.dims}); "
          f"bank size {len(bank)} of K={bank.k}")
    for i, (cand, a) in enumerate(zip(bank.candidates, alphas)):
        v = vec6_encode(cand.pose)
        vec = " ".join(f"{x:+.4f}" for x in v)
        print(f"  [{i:02d}] score={cand.score:.3f} alpha={a:.4f}  {vec}")
    fused_v = " ".join(f"{x:+.4f}" for x in vec6_encode(fused))
    print(f"fused world grasp: {fused_v}")
    if args.save:
        save_bank(bank, args.save)
        print(f"wrote {args.save}")
    return 0


def _cmd_distill_record(args) -> int:
    cfg = load_config(args.config)
    catalog = load_catalog()
    objects = [s for s in catalog if s.split == "seen"]
    total = 0
    os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".", exist_ok=True)
    for i in range(args.episodes):
        obj = objects[i % len(objects)]
        config = EpisodeConfig(level=args.level, object_id=obj.id,
                               seed=derive_seed(args.seed, args.level, i),
                               physics_dt=cfg.physics_dt,
                               decision_dt=cfg.decision_dt,
                               timeout_steps=cfg.timeout_steps)
        log, obs = run_episode(config, teacher_cfg=_teacher_config(cfg),
                               sim_cfg=cfg, collect_observations=True)
        path = args.out if args.episodes == 1 else f"{args.out}.ep{i:03d}"
        n = record_distillation(log, obs, path)
        total += n
        print(f"episode {i}: {obj.id} outcome={log.outcome} records={n} -> {path}")
    print(f"total records: {total}")
    return 0


def _cmd_nn_selftest(_args) -> int:
    failures = 0
    for name, err in selftest():
        ok = err <= 1e-5
        failures += 0 if ok else 1
        print(f"{name}: max|err| = {err:.2e} {'ok' if ok else 'FAIL'}")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graspsim",
                                description="desk-scale dynamic grasping benchmark")
    p.add_argument("--config", default=None,
                   help="key=value config file (or set GRASPSIM_CONFIG)")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run the seeded benchmark sweep")
    b.add_argument("--levels", default="1,2,3,4")
    group = b.add_mutually_exclusive_group()
    group.add_argument("--episodes", type=int, default=None,
                       help="episodes per level")
    group.add_argument("--steps", type=int, default=None,
                       help="decision-step budget per level (default 5000)")
    b.add_argument("--split", choices=("seen", "unseen", "both"), default="seen")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default="bench_out")
    b.add_argument("--workers", type=int, default=0)
    b.add_argument("--no-gfm", action="store_true",
                   help="ablation: aim at the object centroid")
    b.set_defaults(func=_cmd_bench)

    e = sub.add_parser("episode", help="run one episode")
    e.add_argument("--level", type=int, required=True)
    e.add_argument("--object", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--dump-log", default=None)
    e.set_defaults(func=_cmd_episode)

    r = sub.add_parser("render", help="dump mask/depth frames as PGM")
    r.add_argument("--level", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--step", type=int, default=0)
    r.add_argument("--object", default=None)
    r.add_argument("--out-dir", default="frames")
    r.set_defaults(func=_cmd_render)

    g = sub.add_parser("gfm-inspect", help="print a grasp bank and its alphas")
    g.add_argument("--object", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--save", default=None, help="also export the bank file")
    g.set_defaults(func=_cmd_gfm_inspect)

    d = sub.add_parser("distill-record", help="record teacher supervision pairs")
    d.add_argument("--episodes", type=int, default=1)
    d.add_argument("--level", type=int, default=1)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default="distill.bin")
    d.set_defaults(func=_cmd_distill_record)

    n = sub.add_parser("nn-selftest", help="run the tensor-op oracle checks")
    n.set_defaults(func=_cmd_nn_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GraspSimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
