"""Batch runner: config files, per-episode seeds, parallel episodes, sweeps and reports."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

from .grid_map import Highway, assign_highway, format_highway, format_map, generate_warehouse, parse_highway, parse_map
from .heuristics import HeuristicMode, format_c
from .lifelong import EpisodeConfig, Planner, run_episode
from .metrics import CSV_COLUMNS, EpisodeSummary, csv_row, relative_ratios, summarize


class ConfigError(ValueError):
    pass


# keys a config file or an --axis flag may set
KEYS = {
    "map": str, "highway": str, "blocks": int, "mode": str, "c": str, "density": float,
    "agents": int, "w": int, "h": int, "iterations": int, "episodes": int,
    "time_limit": float, "seed": int, "partial_planning": bool, "escalate_deadlock": bool,
    "max_w": int, "out": str,
}
SWEEP_AXES = ("mode", "c", "blocks", "density", "w", "h")


def _to_bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class RunSpec:
    """Everything needed to run one batch of episodes."""

    map: str | None = None
    highway: str | None = None
    blocks: int | None = 3
    mode: str = "none"
    c: str = "1"
    density: float | None = 0.05
    agents: int | None = None
    w: int = 5
    h: int = 5
    iterations: int = 50
    episodes: int = 20
    time_limit: float = 60.0
    seed: int = 0
    partial_planning: bool = False
    escalate_deadlock: bool = False
    max_w: int = 40
    out: str = "results"
    base_dir: str = field(default=".", repr=False)

    def set(self, key: str, value: str) -> None:
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        kind = KEYS[key]
        try:
            if kind is bool:
                parsed = _to_bool(value)
            else:
                parsed = kind(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
        setattr(self, key, parsed)
        # a map path and a block count are alternatives; the last one set wins
        if key == "map":
            self.blocks = None
        elif key == "blocks":
            self.map = self.highway = None
        elif key == "agents":
            self.density = None
        elif key == "density":
            self.agents = None

    def heuristic_mode(self) -> HeuristicMode:
        try:
            c = math.inf if self.c.lower() in ("inf", "infinity") else float(self.c)
            if self.mode not in ("none", "soft", "strict"):
                raise ValueError(self.mode)
            return HeuristicMode.parse(self.mode, c)
        except ValueError as exc:
            raise ConfigError(f"bad mode/c combination: mode={self.mode} c={self.c}") from exc

    def map_label(self) -> str:
        if self.map is not None:
            return Path(self.map).stem
        return f"warehouse{self.blocks}"

    def echo(self) -> dict:
        return {k: getattr(self, k) for k in KEYS}

    def _resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def load_world(self):
        """(grid, highway) for this spec; the highway is None only for mode=none without one."""
        if self.map is not None:
            try:
                grid = parse_map(Path(self._resolve(self.map)).read_text())
                if self.highway is not None:
                    hw = parse_highway(Path(self._resolve(self.highway)).read_text(), grid)
                else:
                    hw = assign_highway(grid)
            except OSError as exc:
                raise ConfigError(str(exc)) from exc
            except ValueError as exc:
                raise ConfigError(f"map/overlay problem: {exc}") from exc
            return grid, hw
        if self.blocks is None:
            raise ConfigError("config needs either map or blocks")
        try:
            grid = generate_warehouse(self.blocks)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return grid, assign_highway(grid)

    def episode_config(self, grid, hw, seed: int) -> EpisodeConfig:
        try:
            return EpisodeConfig(
                grid, hw, self.heuristic_mode(), agents=self.agents, density=self.density,
                w=self.w, h=self.h, iterations=self.iterations, time_limit=self.time_limit,
                seed=seed, partial_planning=self.partial_planning,
                escalate_deadlock=self.escalate_deadlock, max_w=self.max_w,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self) -> None:
        if self.episodes < 1 or self.iterations < 1:
            raise ConfigError("episodes and iterations must be positive")
        grid, hw = self.load_world()
        cfg = self.episode_config(grid, hw, 0)
        if cfg.agent_count() < 1 or cfg.agent_count() > len(grid.free_cells()):
            raise ConfigError(f"{cfg.agent_count()} agents do not fit the map")


def parse_config(text: str, spec: RunSpec | None = None) -> RunSpec:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    spec = spec or RunSpec()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        spec.set(key, value)
    return spec


def load_config(path: str) -> RunSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    spec = parse_config(text)
    spec.base_dir = str(Path(path).resolve().parent)
    return spec


def episode_seed(batch_seed: int, index: int) -> int:
    """Seed for episode ``index`` of a batch: first 8 bytes of blake2b("batch:index")."""
    digest = hashlib.blake2b(f"{batch_seed}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@lru_cache(maxsize=8)
def _world(spec_key: tuple):
    spec = RunSpec(**dict(spec_key))
    grid, hw = spec.load_world()
    return grid, hw, Planner(grid, hw, spec.heuristic_mode())


def _spec_key(spec: RunSpec) -> tuple:
    keep = ("map", "highway", "blocks", "mode", "c", "base_dir")
    return tuple((k, getattr(spec, k)) for k in keep)


def run_one(spec: RunSpec, index: int) -> tuple[int, EpisodeSummary]:
    """Run episode ``index`` of the batch; tables are shared within a process."""
    grid, hw, planner = _world(_spec_key(spec))
    seed = episode_seed(spec.seed, index)
    _, summary = run_episode(spec.episode_config(grid, hw, seed), planner)
    return seed, summary


def _run_args(args):
    return run_one(*args)


def run_batch(spec: RunSpec, jobs: int = 1) -> list[tuple[int, EpisodeSummary]]:
    """All episodes of a batch in index order, optionally over ``jobs`` processes."""
    spec.validate()
    work = [(spec, i) for i in range(spec.episodes)]
    if jobs <= 1:
        return [run_one(s, i) for s, i in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_args, work))


def rows_for(spec: RunSpec, results) -> list[dict]:
    grid, hw, _ = _world(_spec_key(spec))
    agents = spec.episode_config(grid, hw, 0).agent_count()
    meta = dict(
        mode=spec.mode, c=format_c(spec.heuristic_mode().c), w=spec.w, h=spec.h,
        map=spec.map_label(), agents=agents,
    )
    return [csv_row(summary, seed=seed, **meta) for seed, summary in results]


def write_csv(path: str | Path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _clean(obj):
    """JSON-safe copy: inf/nan become strings."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: str | Path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def batch_report(spec: RunSpec, results) -> dict:
    batch = summarize(s for _, s in results)
    return {
        "config": spec.echo(),
        "episodes": batch.episodes,
        "fail_count": batch.fail_count,
        "means": batch.means,
        "runtime_load_sensitive": True,
    }


# sweeps

@dataclass
class SweepSpec:
    base: RunSpec
    axes: dict[str, list[str]]

    def cells(self) -> list[dict[str, str]]:
        """Cross product of the axes, first axis varying slowest."""
        keys = list(self.axes)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.axes[k] for k in keys))]

    def cell_spec(self, cell: dict[str, str]) -> RunSpec:
        spec = replace(self.base)
        for k, v in cell.items():
            spec.set(k, v)
        return spec


def parse_axis(text: str) -> tuple[str, list[str]]:
    if "=" not in text:
        raise ConfigError(f"axis must look like key=v1,v2,...; got {text!r}")
    key, values = text.split("=", 1)
    key = key.strip()
    if key not in SWEEP_AXES:
        raise ConfigError(f"cannot sweep {key!r}; choose from {', '.join(SWEEP_AXES)}")
    vals = [v.strip() for v in values.split(",") if v.strip()]
    if not vals:
        raise ConfigError(f"axis {key} has no values")
    return key, vals


def cell_name(cell: dict[str, str]) -> str:
    return "_".join(f"{k}-{v}" for k, v in cell.items()) or "base"


def _is_baseline(spec: RunSpec) -> bool:
    mode = spec.heuristic_mode()
    return mode.kind == "none" or (mode.kind == "soft" and mode.c == 1.0)


def baseline_index(sweep: SweepSpec) -> dict[int, int] | None:
    """Map each cell to its baseline cell (mode=none or c=1 with the other axes equal).

    Returns None when the sweep varies neither mode nor c; raises when it does
    but some cell has no matching baseline.
    """
    if "mode" not in sweep.axes and "c" not in sweep.axes:
        return None
    cells = sweep.cells()
    specs = [sweep.cell_spec(c) for c in cells]
    others = [k for k in sweep.axes if k not in ("mode", "c")]
    out = {}
    for i, cell in enumerate(cells):
        match = [
            j for j, other in enumerate(cells)
            if _is_baseline(specs[j]) and all(other[k] == cell[k] for k in others)
        ]
        if not match:
            raise ConfigError(f"no baseline (mode=none or c=1) cell for {cell_name(cell)}")
        out[i] = match[0]
    return out


def run_sweep(sweep: SweepSpec, out_dir: str | Path, jobs: int = 1) -> dict:
    """Run every cell, write one CSV per cell and a combined JSON report."""
    out_dir = Path(out_dir)
    cells = sweep.cells()
    specs = [sweep.cell_spec(c) for c in cells]
    for s in specs:
        s.validate()
    base_of = baseline_index(sweep)
    reports = []
    for cell, spec in zip(cells, specs):
        results = run_batch(spec, jobs)
        write_csv(out_dir / f"{cell_name(cell)}.csv", rows_for(spec, results))
        rep = batch_report(spec, results)
        rep["cell"] = cell
        reports.append(rep)
    if base_of is not None:
        for i, rep in enumerate(reports):
            base = reports[base_of[i]]["means"]
            if rep["means"] is not None and base is not None:
                rep["ratios"] = relative_ratios(rep["means"], base)
            else:
                rep["ratios"] = None
    summary = {"axes": sweep.axes, "cells": reports, "runtime_load_sensitive": True}
    write_json(out_dir / "sweep_summary.json", summary)
    return summary


def write_world(blocks: int, out: str | Path) -> tuple[Path, Path]:
    """Write warehouse(blocks) and its alternating overlay; returns both paths."""
    grid = generate_warehouse(blocks)
    hw: Highway = assign_highway(grid)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    overlay = out.with_name(out.name + ".highway")
    out.write_text(format_map(grid))
    overlay.write_text(format_highway(grid, hw))
    return out, overlay
