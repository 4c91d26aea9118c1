"""Benchmark metrics (GSR / OSSR / TSC) and the multi-episode sweep driver.

OSSR uses all episodes as the denominator, which keeps OSSR <= GSR by
construction; the alternate successes-only reading is reported as an extra
CSV column (ossr_alt).  TSC is a mean over successful episodes only and is
left blank when there are none.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .episode import EpisodeSummary, derive_seed, run_episode, summarize
from .errors import InvalidArgumentError
from .scene import EpisodeConfig, load_catalog
from .teacher import TeacherConfig

DEFAULT_STEP_BUDGET = 5000
CSV_HEADER = "level,split,category,n_episodes,gsr,ossr,ossr_alt,tsc,seed"


@dataclass(frozen=True)
class MetricsRow:
    level: int
    split: str
    category: str
    n_episodes: int
    n_successes: int
    gsr: float
    ossr: float
    ossr_alt: float
    tsc: float | None


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple

    def row(self, level: int, category: str = "all") -> MetricsRow:
        for r in self.rows:
            if r.level == level and r.category == category:
                return r
        raise KeyError(f"no metrics row for level {level}, category {category!r}")


def _tally(summaries) -> MetricsRow:
    n = len(summaries)
    successes = [s for s in summaries if s.outcome == "success"]
    one_shot = [s for s in successes if s.first_close_success]
    tsc = (float(np.mean([s.success_step for s in successes]))
           if successes else None)
    return MetricsRow(
        level=summaries[0].level,
        split="",
        category="all",
        n_episodes=n,
        n_successes=len(successes),
        gsr=100.0 * len(successes) / n,
        ossr=100.0 * len(one_shot) / n,
        ossr_alt=(100.0 * len(one_shot) / len(successes)) if successes else 0.0,
        tsc=tsc,
    )


def compute_metrics(logs) -> MetricsReport:
    """Aggregate per level; accepts EpisodeLog or EpisodeSummary objects."""
    if not logs:
        raise InvalidArgumentError("compute_metrics needs at least one episode")
    summaries = [s if isinstance(s, EpisodeSummary) else summarize(s) for s in logs]
    rows = []
    for level in sorted({s.level for s in summaries}):
        rows.append(_tally([s for s in summaries if s.level == level]))
    return MetricsReport(tuple(rows))


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def report_to_csv(report: MetricsReport, seed: int) -> str:
    lines = [CSV_HEADER]
    for r in report.rows:
        lines.append(
            f"{r.level},{r.split},{r.category},{r.n_episodes},"
            f"{_fmt(r.gsr)},{_fmt(r.ossr)},{_fmt(r.ossr_alt)},{_fmt(r.tsc)},{seed}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Benchmark sweep
# ---------------------------------------------------------------------------

def _episode_task(args) -> EpisodeSummary:
    level, object_id, seed, use_gfm, timeout = args
    cfg = EpisodeConfig(level=level, object_id=object_id, seed=seed,
                        timeout_steps=timeout)
    log = run_episode(cfg, teacher_cfg=TeacherConfig(use_gfm=use_gfm))
    return summarize(log)


def _episode_stream(levels, split, seed, use_gfm, timeout, catalog):
    objs = [s for s in catalog if split == "both" or s.split == split]
    for level in levels:
        def gen(level=level):
            i = 0
            while True:
                obj = objs[i % len(objs)]
                yield (level, obj.id, derive_seed(seed, level, i), use_gfm, timeout)
                i += 1
        yield level, gen()


def run_benchmark(levels, episodes_per_level: int | None = None,
                  step_budget: int | None = None, split: str = "seen",
                  seed: int = 0, workers: int = 0, use_gfm: bool = True,
                  timeout_steps: int = 300, catalog=None):
    """Seeded multi-episode sweep; returns (MetricsReport, csv_text, summaries).

    Episodes run per level either a fixed count or until the decision-step
    budget (default 5,000 per level) is consumed; the final episode may
    overshoot the budget by at most its own length.  A worker pool only
    parallelizes independent episodes and results are consumed in submission
    order, so output bytes never depend on scheduling.
    """
    levels = sorted(set(levels))
    if not levels:
        raise InvalidArgumentError("need at least one level")
    if split not in ("seen", "unseen", "both"):
        raise InvalidArgumentError(f"split must be seen/unseen/both, got {split!r}")
    if episodes_per_level is None and step_budget is None:
        step_budget = DEFAULT_STEP_BUDGET
    catalog = catalog if catalog is not None else load_catalog()

    all_summaries: list[EpisodeSummary] = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    try:
        for level, stream in _episode_stream(levels, split, seed, use_gfm,
                                             timeout_steps, catalog):
            got: list[EpisodeSummary] = []
            steps_used = 0

            def done() -> bool:
                if episodes_per_level is not None:
                    return len(got) >= episodes_per_level
                return steps_used >= step_budget

            if pool is None:
                while not done():
                    got.append(_episode_task(next(stream)))
                    steps_used += got[-1].n_steps
            else:
                pending = [pool.submit(_episode_task, next(stream))
                           for _ in range(workers)]
                while not done():
                    fut = pending.pop(0)
                    got.append(fut.result())
                    steps_used += got[-1].n_steps
                    if not done():
                        pending.append(pool.submit(_episode_task, next(stream)))
                for fut in pending:
                    fut.cancel()
            all_summaries.extend(got)
    finally:
        if pool is not None:
            pool.shutdown(wait=True, cancel_futures=True)

    all_summaries.sort(key=lambda s: (s.level, s.seed))
    rows = []
    for level in levels:
        level_sums = [s for s in all_summaries if s.level == level]
        base = _tally(level_sums)
        rows.append(MetricsRow(level, split, "all", base.n_episodes,
                               base.n_successes, base.gsr, base.ossr,
                               base.ossr_alt, base.tsc))
        for category in sorted({s.category for s in level_sums}):
            sub = _tally([s for s in level_sums if s.category == category])
            rows.append(MetricsRow(level, split, category, sub.n_episodes,
                                   sub.n_successes, sub.gsr, sub.ossr,
                                   sub.ossr_alt, sub.tsc))
    report = MetricsReport(tuple(rows))
    return report, report_to_csv(report, seed), all_summaries


def summaries_to_jsonl(summaries) -> str:
    lines = []
    for s in summaries:
        lines.append(json.dumps({
            "level": s.level, "object_id": s.object_id, "category": s.category,
            "seed": s.seed, "outcome": s.outcome, "success_step": s.success_step,
            "attempt_count": s.attempt_count,
            "first_close_success": s.first_close_success, "n_steps": s.n_steps,
        }, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"
