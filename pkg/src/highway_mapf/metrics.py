"""Per-iteration records and the aggregate numbers reported for each run."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from statistics import fmean
from typing import Iterable, Sequence

CSV_COLUMNS = (
    "seed", "mode", "c", "w", "h", "map", "agents", "throughput", "mean_runtime_s",
    "mean_generated_nodes", "idle_mean", "moving_mean", "avoidance_rate",
    "rerouting_rate", "deadlock_iterations", "fail",
)
TIMING_COLUMNS = ("mean_runtime_s",)

# metrics averaged across episodes and compared against the baseline
SUMMARY_METRICS = (
    "throughput", "mean_runtime_s", "mean_generated_nodes", "idle_mean", "moving_mean",
    "avoidance_rate", "rerouting_rate", "deadlock_iterations",
)


@dataclass
class IterationRecord:
    runtime_s: float
    generated_nodes: int
    rerouting_agent_fraction: float
    against_highway_moves: int
    total_moves: int
    deadlock_flag: bool
    agents: int = 0
    rerouting_agents: int = 0
    # rerouting agents whose executed moves all followed the highway
    highway_rerouting_agents: int = 0
    # flagged deadlock members that did move inside the window
    deadlock_moving_members: int = 0
    infeasible: bool = False
    timeout: bool = False
    table_build_s: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rerouting_agent_fraction <= 1.0:
            raise ValueError("rerouting fraction must lie in [0, 1]")
        if min(self.generated_nodes, self.against_highway_moves, self.total_moves) < 0:
            raise ValueError("counts must be non-negative")
        if self.against_highway_moves > self.total_moves:
            raise ValueError("against-highway moves exceed total moves")


@dataclass
class EpisodeSummary:
    throughput: float | None
    mean_runtime_s: float | None
    mean_generated_nodes: float | None
    idle_mean: float | None
    moving_mean: float | None
    avoidance_rate: float | None
    rerouting_rate: float | None
    deadlock_iterations: int | None
    fail: bool = False
    tasks_finished: int = 0
    timesteps: int = 0

    @classmethod
    def failed(cls, timesteps: int = 0) -> "EpisodeSummary":
        return cls(None, None, None, None, None, None, None, None, fail=True, timesteps=timesteps)


@dataclass
class BatchSummary:
    episodes: int
    fail_count: int
    means: dict[str, float] | None
    runtime_load_sensitive: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def throughput(tasks_finished: int, timesteps: int) -> float:
    if timesteps <= 0:
        raise ValueError("throughput needs a positive number of timesteps")
    return tasks_finished / timesteps


def avoidance_rate(against_moves: int, total_moves: int) -> float:
    """Share of executed moves that went against the highway (waits excluded)."""
    if against_moves > total_moves:
        raise ValueError("against-highway moves exceed total moves")
    return against_moves / total_moves if total_moves else 0.0


def task_timestep_split(trace: Sequence[int]) -> tuple[int, int]:
    """(idle, moving) step counts of one task's location trace."""
    idle = moving = 0
    for a, b in zip(trace, trace[1:]):
        if a == b:
            idle += 1
        else:
            moving += 1
    return idle, moving


def summarize_episode(
    records: Sequence[IterationRecord],
    tasks_finished: int,
    timesteps: int,
    completed_tasks: Sequence[tuple[int, int]],
    fail: bool = False,
) -> EpisodeSummary:
    if fail:
        return EpisodeSummary.failed(timesteps)
    if not records:
        raise ValueError("an episode needs at least one iteration")
    against = sum(r.against_highway_moves for r in records)
    moves = sum(r.total_moves for r in records)
    return EpisodeSummary(
        throughput=throughput(tasks_finished, timesteps),
        mean_runtime_s=fmean(r.runtime_s for r in records),
        mean_generated_nodes=fmean(r.generated_nodes for r in records),
        idle_mean=fmean(i for i, _ in completed_tasks) if completed_tasks else math.nan,
        moving_mean=fmean(m for _, m in completed_tasks) if completed_tasks else math.nan,
        avoidance_rate=avoidance_rate(against, moves),
        rerouting_rate=fmean(r.rerouting_agent_fraction for r in records),
        deadlock_iterations=sum(1 for r in records if r.deadlock_flag),
        tasks_finished=tasks_finished,
        timesteps=timesteps,
    )


def summarize(summaries: Iterable[EpisodeSummary]) -> BatchSummary:
    """Average over episodes, leaving failed ones out of every mean."""
    summaries = list(summaries)
    ok = [s for s in summaries if not s.fail]
    fails = len(summaries) - len(ok)
    if not ok:
        return BatchSummary(len(summaries), fails, None)
    means = {}
    for name in SUMMARY_METRICS:
        vals = [getattr(s, name) for s in ok]
        vals = [v for v in vals if v is not None and not math.isnan(v)]
        means[name] = fmean(vals) if vals else math.nan
    return BatchSummary(len(summaries), fails, means)


def relative_ratios(means: dict[str, float], baseline: dict[str, float]) -> dict[str, float]:
    """value / baseline value per metric; NaN where the baseline is zero."""
    out = {}
    for name in SUMMARY_METRICS:
        a, b = means.get(name), baseline.get(name)
        if a is None or b is None:
            continue
        out[name] = a / b if b else math.nan
    return out


def csv_row(summary: EpisodeSummary, **meta) -> dict:
    row = {k: meta.get(k, "") for k in CSV_COLUMNS}
    for f in fields(EpisodeSummary):
        if f.name in row:
            row[f.name] = getattr(summary, f.name)
    row["fail"] = int(summary.fail)
    for k, v in row.items():
        if v is None:
            row[k] = ""
        elif isinstance(v, float):
            row[k] = "inf" if v == math.inf else f"{v:.6g}"
    return row
