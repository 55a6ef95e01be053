"""Priority-Based Search over a bounded conflict window."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .grid_map import GridMap
from .heuristics import HeuristicTable
from .spacetime_astar import NoPathError, Path, PlannerConfig, ReservationTable, plan

VERTEX = "vertex"
EDGE = "edge"


class PBSError(RuntimeError):
    pass


class PBSTimeout(PBSError):
    """The deadline passed before a conflict-free node was found."""


class PBSInfeasible(PBSError):
    """Every branch of the priority tree failed low-level planning."""


@dataclass(frozen=True)
class Conflict:
    agents: tuple[int, int]
    kind: str
    locations: tuple[int, ...]
    timestep: int


@dataclass
class PriorityNode:
    orderings: frozenset[tuple[int, int]]
    paths: list[Path]
    cost: float
    generated_index: int


@dataclass
class SolveReport:
    plan: list[Path]
    generated_nodes: int
    elapsed: float
    orderings: frozenset[tuple[int, int]] = field(default_factory=frozenset)


def _at(path: Sequence[int], t: int) -> int:
    return path[t] if t < len(path) else path[-1]


def find_first_conflict(paths: Sequence[Sequence[int]], w: int) -> Conflict | None:
    """Earliest conflict among the first ``w`` moves.

    Vertex conflicts are checked at timesteps ``0..w`` and swaps for the moves
    starting at ``0..w-1``; shorter paths are treated as waiting at their end.
    Ties go to the lowest agent pair, vertex before edge.
    """
    n = len(paths)
    grid = [[_at(p, t) for t in range(w + 1)] for p in paths]
    for t in range(w + 1):
        best = None
        where: dict[int, int] = {}
        for i in range(n):
            loc = grid[i][t]
            j = where.get(loc)
            if j is None:
                where[loc] = i
            elif best is None or ((j, i), 0) < best[:2]:
                best = ((j, i), 0, (loc,))
        if t < w:
            for i in range(n):
                a, b = grid[i][t], grid[i][t + 1]
                if a == b:
                    continue
                j = where.get(b)
                if j is not None and j != i and grid[j][t + 1] == a:
                    pair = (min(i, j), max(i, j))
                    locs = (a, b) if i == pair[0] else (b, a)
                    cand = (pair, 1, locs)
                    if best is None or cand < best:
                        best = cand
        if best is not None:
            pair, kind, locs = best
            return Conflict(pair, VERTEX if kind == 0 else EDGE, locs, t)
    return None


def paths_conflict(p: Sequence[int], q: Sequence[int], w: int) -> bool:
    for t in range(w + 1):
        if _at(p, t) == _at(q, t):
            return True
        if t < w and _at(p, t) == _at(q, t + 1) and _at(p, t + 1) == _at(q, t) and _at(p, t) != _at(p, t + 1):
            return True
    return False


def _ancestors(orderings, agent) -> set[int]:
    above: dict[int, list[int]] = {}
    for hi, lo in orderings:
        above.setdefault(lo, []).append(hi)
    seen = set()
    stack = [agent]
    while stack:
        a = stack.pop()
        for hi in above.get(a, ()):
            if hi not in seen:
                seen.add(hi)
                stack.append(hi)
    return seen


def _descendants(orderings, agent) -> set[int]:
    below: dict[int, list[int]] = {}
    for hi, lo in orderings:
        below.setdefault(hi, []).append(lo)
    seen = set()
    stack = [agent]
    while stack:
        a = stack.pop()
        for lo in below.get(a, ()):
            if lo not in seen:
                seen.add(lo)
                stack.append(lo)
    return seen


def _topological(orderings, agents: set[int]) -> list[int]:
    indeg = {a: 0 for a in agents}
    for hi, lo in orderings:
        if hi in agents and lo in agents:
            indeg[lo] += 1
    order = []
    ready = sorted(a for a, d in indeg.items() if d == 0)
    while ready:
        a = ready.pop(0)
        order.append(a)
        for hi, lo in sorted(orderings):
            if hi == a and lo in agents:
                indeg[lo] -= 1
                if indeg[lo] == 0:
                    ready.append(lo)
                    ready.sort()
    return order


def solve(
    starts: Sequence[int],
    goals: Sequence[int],
    tables: Mapping[int, HeuristicTable] | Callable[[int], HeuristicTable],
    grid: GridMap,
    cfg: PlannerConfig,
    deadline: float | None = None,
) -> SolveReport:
    """Resolve all conflicts inside the window by branching on agent priorities.

    ``tables`` maps a goal cell to its heuristic table. ``deadline`` is a
    time budget in seconds for this call.
    """
    if len(set(starts)) != len(starts):
        raise ValueError("start locations must be pairwise distinct")
    lookup = tables if callable(tables) else tables.__getitem__
    agent_tables = [lookup(g) for g in goals]
    w = cfg.w
    t0 = time.perf_counter()
    stop_at = None if deadline is None else t0 + deadline

    def check_time():
        if stop_at is not None and time.perf_counter() > stop_at:
            raise PBSTimeout(f"PBS exceeded {deadline}s")

    def replan(agent, orderings, paths):
        above = _ancestors(orderings, agent)
        res = ReservationTable.from_paths((paths[a].locations for a in above), w)
        check_time()
        return plan(grid, agent_tables[agent], starts[agent], res, cfg)

    try:
        root_paths = [plan(grid, agent_tables[i], starts[i], None, cfg) for i in range(len(starts))]
    except NoPathError as exc:
        err = PBSInfeasible(str(exc))
        err.generated_nodes = 1
        raise err from exc
    check_time()
    generated = 1
    stack = [PriorityNode(frozenset(), root_paths, sum(p.cost for p in root_paths), 1)]

    while stack:
        check_time()
        node = stack.pop()
        conflict = find_first_conflict([p.locations for p in node.paths], w)
        if conflict is None:
            return SolveReport(node.paths, generated, time.perf_counter() - t0, node.orderings)
        i, j = conflict.agents
        children = []
        # (i above j) demotes the higher index and wins cost ties
        for rank, (hi, lo) in enumerate(((i, j), (j, i))):
            if hi in _descendants(node.orderings, lo):
                continue
            generated += 1
            child = _expand(node, hi, lo, w, replan)
            if child is not None:
                child.generated_index = generated
                children.append((child.cost, rank, child))
        children.sort(key=lambda c: (c[0], c[1]))
        for _, _, child in reversed(children):
            stack.append(child)
    err = PBSInfeasible("priority tree exhausted without a conflict-free node")
    err.generated_nodes = generated
    raise err


def _expand(node, hi, lo, w, replan) -> PriorityNode | None:
    orderings = node.orderings | {(hi, lo)}
    paths = list(node.paths)
    affected = {lo} | _descendants(orderings, lo)
    for agent in _topological(orderings, affected):
        if agent != lo:
            above = _ancestors(orderings, agent)
            if not any(paths_conflict(paths[agent].locations, paths[a].locations, w) for a in above):
                continue
        try:
            paths[agent] = replan(agent, orderings, paths)
        except NoPathError:
            return None
    return PriorityNode(orderings, paths, sum(p.cost for p in paths), 0)
