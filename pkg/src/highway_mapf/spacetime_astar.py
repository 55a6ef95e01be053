"""Windowed space-time A* for a single agent."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .grid_map import GridMap
from .heuristics import UNREACHABLE, HeuristicTable


class NoPathError(RuntimeError):
    """No reservation-free path exists inside the window."""


@dataclass(frozen=True)
class PlannerConfig:
    w: int = 5
    h: int = 5
    partial_planning: bool = False

    def __post_init__(self):
        if not 1 <= self.h <= self.w:
            raise ValueError(f"need 1 <= h <= w, got h={self.h}, w={self.w}")


@dataclass
class ReservationTable:
    """Cells and moves claimed by higher-priority agents inside the window.

    A vertex reservation ``(loc, t)`` covers ``0 <= t <= horizon``; an edge
    reservation ``(a, b, t)`` forbids moving ``a -> b`` between ``t`` and
    ``t + 1`` and only exists for ``t < horizon``.
    """

    horizon: int
    vertex: set[tuple[int, int]] = field(default_factory=set)
    edge: set[tuple[int, int, int]] = field(default_factory=set)

    def reserve_vertex(self, loc: int, t: int) -> None:
        if not 0 <= t <= self.horizon:
            raise ValueError(f"timestep {t} outside window 0..{self.horizon}")
        self.vertex.add((loc, t))

    def reserve_edge(self, a: int, b: int, t: int) -> None:
        if not 0 <= t < self.horizon:
            raise ValueError(f"timestep {t} outside window 0..{self.horizon - 1}")
        self.edge.add((a, b, t))

    def add_path(self, locations: Sequence[int]) -> None:
        """Reserve an agent's padded path so others neither meet nor swap with it."""
        last = len(locations) - 1
        prev = locations[0]
        self.vertex.add((prev, 0))
        for t in range(1, self.horizon + 1):
            cur = locations[t] if t <= last else locations[last]
            self.vertex.add((cur, t))
            if cur != prev:
                self.edge.add((cur, prev, t - 1))
            prev = cur

    @classmethod
    def from_paths(cls, paths: Iterable[Sequence[int]], horizon: int) -> "ReservationTable":
        table = cls(horizon)
        for p in paths:
            table.add_path(p)
        return table

    def violations(self, locations: Sequence[int]) -> list[tuple]:
        """Reservations broken by a path, for replay checks."""
        bad = []
        padded = pad_path(locations, self.horizon)
        for t in range(1, self.horizon + 1):
            if (padded[t], t) in self.vertex:
                bad.append(("vertex", padded[t], t))
            if (padded[t - 1], padded[t], t - 1) in self.edge:
                bad.append(("edge", padded[t - 1], padded[t], t - 1))
        return bad


@dataclass(frozen=True)
class Path:
    locations: tuple[int, ...]
    cost: float

    def __len__(self):
        return len(self.locations)

    def __getitem__(self, t):
        return self.locations[t]

    def __iter__(self):
        return iter(self.locations)

    def at(self, t: int) -> int:
        """Location at timestep ``t``; agents stay put after their last step."""
        return self.locations[t] if t < len(self.locations) else self.locations[-1]


def pad_path(locations: Sequence[int], horizon: int) -> list[int]:
    """Extend with waits so the path has an entry for every timestep up to ``horizon``."""
    locations = list(locations)
    if not locations:
        raise ValueError("cannot pad an empty path")
    if len(locations) <= horizon:
        locations.extend([locations[-1]] * (horizon + 1 - len(locations)))
    return locations


def plan(
    grid: GridMap,
    table: HeuristicTable,
    start: int,
    reservations: ReservationTable | None = None,
    cfg: PlannerConfig = PlannerConfig(),
) -> Path:
    """Plan one agent from ``start`` to ``table.goal``.

    Reservations are honored for timesteps up to ``cfg.w``. Beyond the
    window the remaining route follows the table downhill. With
    ``cfg.partial_planning`` the path stops at depth ``w`` and its cost is
    ``w + dist[endpoint]``.
    """
    w = cfg.w
    dist = table.dist
    goal = table.goal
    if not grid.is_free(start):
        raise ValueError(f"start {start} is not a free cell")
    if dist[start] == UNREACHABLE:
        raise NoPathError(f"goal {goal} unreachable from {start}")
    vres = reservations.vertex if reservations is not None else set()
    eres = reservations.edge if reservations is not None else set()
    goal_blocked_after = -1
    for loc, t in vres:
        if loc == goal and t > goal_blocked_after:
            goal_blocked_after = t

    counter = itertools.count()
    open_list = [(dist[start], 0, next(counter), start, 0)]
    parent: dict[tuple[int, int], tuple[int, int] | None] = {(start, 0): None}
    closed = set()
    neighbors = grid.neighbors

    while open_list:
        f, neg_g, _, loc, t = heapq.heappop(open_list)
        if (loc, t) in closed:
            continue
        closed.add((loc, t))
        if loc == goal and t > goal_blocked_after:
            return Path(tuple(_backtrack(parent, loc, t)), float(t))
        if t == w:
            prefix = _backtrack(parent, loc, t)
            if cfg.partial_planning:
                return Path(tuple(prefix), t + dist[loc])
            full = prefix + descend(grid, table, loc)[1:]
            return Path(tuple(full), float(len(full) - 1))
        nt = t + 1
        for nxt in (*neighbors(loc), loc):
            if (nxt, nt) in closed or (nxt, nt) in vres or (loc, nxt, t) in eres:
                continue
            h = dist[nxt]
            if h == UNREACHABLE or (nxt, nt) in parent:
                continue
            parent[(nxt, nt)] = (loc, t)
            heapq.heappush(open_list, (nt + h, -nt, next(counter), nxt, nt))
    raise NoPathError(f"no reservation-free path from {start} within window {w}")


def _backtrack(parent, loc, t) -> list[int]:
    out = []
    node = (loc, t)
    while node is not None:
        out.append(node[0])
        node = parent[node]
    out.reverse()
    return out


def descend(grid: GridMap, table: HeuristicTable, start: int) -> list[int]:
    """Follow the table downhill to the goal, ignoring other agents."""
    # tables are built for the planning graph, so their cached tails are valid moves
    cached = table.tail(start)
    if cached is not None:
        return list(cached)
    route = [start]
    loc = start
    while loc != table.goal:
        loc = _downhill(grid, table, loc)
        route.append(loc)
        if len(route) > grid.size:
            raise NoPathError(f"table for goal {table.goal} loops at {start}")
    return route


def _downhill(grid: GridMap, table: HeuristicTable, loc: int) -> int:
    dist = table.dist
    best = None
    for nxt in grid.neighbors(loc):
        if dist[nxt] == UNREACHABLE:
            continue
        via = table.step_cost(loc, nxt) + dist[nxt]
        if best is None or via < best[0]:
            best = (via, nxt)
    if best is None or best[0] > dist[loc] + 1e-9:
        raise NoPathError(f"table for goal {table.goal} has no downhill step at {loc}")
    return best[1]
