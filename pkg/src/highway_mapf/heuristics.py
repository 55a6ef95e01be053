"""Per-goal distance tables for the no-highway, soft-limit and strict-limit settings."""

from __future__ import annotations

import heapq
import math
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .grid_map import Edge, GridMap, Highway

UNREACHABLE = math.inf


@dataclass(frozen=True)
class HeuristicMode:
    kind: str = "none"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "soft", "strict"):
            raise ValueError(f"unknown heuristic mode {self.kind!r}")
        if self.kind == "soft" and not self.c >= 1:
            raise ValueError(f"penalty factor must be >= 1, got {self.c}")

    @classmethod
    def none(cls) -> "HeuristicMode":
        return cls("none", 1.0)

    @classmethod
    def soft(cls, c: float) -> "HeuristicMode":
        return cls("soft", float(c))

    @classmethod
    def strict(cls) -> "HeuristicMode":
        return cls("strict", math.inf)

    @classmethod
    def parse(cls, kind: str, c: float | str | None = None) -> "HeuristicMode":
        if kind == "soft":
            return cls.soft(math.inf if str(c).lower() in ("inf", "infinity") else float(c))
        return cls.strict() if kind == "strict" else cls.none()

    @property
    def penalty(self) -> float:
        """Cost of one against-direction step in the sweep."""
        if self.kind == "none":
            return 1.0
        return self.c

    @property
    def drops_against_edges(self) -> bool:
        return self.penalty == math.inf

    @property
    def key(self) -> tuple[str, float]:
        return (self.kind, self.c)

    def label(self) -> str:
        if self.kind == "soft":
            return f"soft(c={format_c(self.c)})"
        return self.kind


def format_c(c: float) -> str:
    if c == math.inf:
        return "inf"
    return str(int(c)) if float(c).is_integer() else str(c)


def edge_cost(hw: Highway | None, mode: HeuristicMode, edge: Edge) -> float:
    """Sweep cost of one directed move under ``mode``."""
    if hw is None or edge not in hw.against_edges:
        return 1.0
    if mode.kind == "strict":
        raise ValueError(f"edge {edge} runs against the highway and is absent in strict mode")
    return mode.penalty


@dataclass(frozen=True)
class HeuristicTable:
    goal: int
    mode: HeuristicMode
    dist: tuple[float, ...]
    against: frozenset[Edge] = field(default=frozenset(), repr=False, compare=False)
    # first downhill neighbor per cell (-1 at the goal or where unreachable)
    succ: tuple[int, ...] = field(default=(), repr=False, compare=False)
    _tails: dict = field(default_factory=dict, repr=False, compare=False)

    def __getitem__(self, loc: int) -> float:
        return self.dist[loc]

    def step_cost(self, u: int, v: int) -> float:
        return self.mode.penalty if (u, v) in self.against else 1.0

    def tail(self, loc: int) -> tuple[int, ...] | None:
        """Downhill route from ``loc`` to the goal along ``succ``; None if it breaks off."""
        route = self._tails.get(loc)
        if route is None and self.succ:
            cells = [loc]
            while cells[-1] != self.goal:
                nxt = self.succ[cells[-1]]
                if nxt < 0 or len(cells) > len(self.dist):
                    return None
                cells.append(nxt)
            route = self._tails[loc] = tuple(cells)
        return route

    def reachable(self) -> set[int]:
        return {i for i, d in enumerate(self.dist) if d != UNREACHABLE}


def build_table(grid: GridMap, hw: Highway | None, mode: HeuristicMode, goal: int) -> HeuristicTable:
    """Backward shortest-path sweep from ``goal`` over the mode's weighted graph."""
    if not grid.is_free(goal):
        raise ValueError(f"goal {grid.xy(goal) if 0 <= goal < grid.size else goal} is not a free cell")
    against = hw.against_edges if (hw is not None and mode.kind != "none") else frozenset()
    penalty = mode.penalty
    dist = [UNREACHABLE] * grid.size
    dist[goal] = 0.0
    if not against or penalty == 1.0 or penalty == math.inf:
        # unit costs: breadth-first search is enough
        skip = against if penalty == math.inf else frozenset()
        queue = deque([goal])
        while queue:
            v = queue.popleft()
            dv = dist[v] + 1.0
            for u in grid.predecessors(v):
                if dist[u] == UNREACHABLE and (u, v) not in skip:
                    dist[u] = dv
                    queue.append(u)
    else:
        heap = [(0.0, goal)]
        while heap:
            d, v = heapq.heappop(heap)
            if d > dist[v]:
                continue
            for u in grid.predecessors(v):
                nd = d + (penalty if (u, v) in against else 1.0)
                if nd < dist[u]:
                    dist[u] = nd
                    heapq.heappush(heap, (nd, u))
    return HeuristicTable(goal, mode, tuple(dist), against, _successors(grid, dist, against, penalty, goal))


def _successors(grid: GridMap, dist, against, penalty, goal) -> tuple[int, ...]:
    succ = [-1] * grid.size
    for u in grid.free_cells():
        if u == goal or dist[u] == UNREACHABLE:
            continue
        best = None
        for v in grid.neighbors(u):
            if dist[v] == UNREACHABLE:
                continue
            via = (penalty if (u, v) in against else 1.0) + dist[v]
            if best is None or via < best[0]:
                best = (via, v)
        if best is not None and best[0] <= dist[u] + 1e-9:
            succ[u] = best[1]
    return tuple(succ)


class TableCache:
    """Lazily built tables keyed by (goal, mode); safe to share between threads."""

    def __init__(self, grid: GridMap, hw: Highway | None, mode: HeuristicMode):
        self.grid = grid
        self.hw = hw
        self.mode = mode
        self._tables: dict[tuple, HeuristicTable] = {}
        self._lock = threading.Lock()
        self.builds = 0

    def __getitem__(self, goal: int) -> HeuristicTable:
        key = (goal, self.mode.key)
        table = self._tables.get(key)
        if table is None:
            table = build_table(self.grid, self.hw, self.mode, goal)
            with self._lock:
                if key not in self._tables:
                    self._tables[key] = table
                    self.builds += 1
                table = self._tables[key]
        return table

    def __len__(self):
        return len(self._tables)


def build_all_tables(
    grid: GridMap, hw: Highway | None, mode: HeuristicMode, goals: Iterable[int],
    cache: TableCache | None = None,
) -> dict[int, HeuristicTable]:
    cache = cache or TableCache(grid, hw, mode)
    return {g: cache[g] for g in goals}
