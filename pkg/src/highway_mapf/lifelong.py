"""Rolling-horizon lifelong loop: assign tasks, plan a window with PBS, execute h steps."""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Sequence

from .grid_map import GridMap, Highway, strict_subgraph
from .heuristics import HeuristicMode, HeuristicTable, TableCache
from .metrics import EpisodeSummary, IterationRecord, summarize_episode
from .pbs import PBSInfeasible, PBSTimeout, solve
from .spacetime_astar import PlannerConfig, pad_path


@dataclass
class EpisodeConfig:
    grid: GridMap
    highway: Highway | None = None
    mode: HeuristicMode = field(default_factory=HeuristicMode.none)
    agents: int | None = None
    density: float | None = None
    w: int = 5
    h: int = 5
    iterations: int = 50
    time_limit: float = 60.0
    seed: int = 0
    partial_planning: bool = False
    escalate_deadlock: bool = False
    max_w: int = 40

    def __post_init__(self):
        if self.mode.kind != "none" and self.highway is None:
            raise ValueError(f"mode {self.mode.label()} needs a highway")
        if self.agents is None and self.density is None:
            raise ValueError("give either an agent count or a density")
        if self.density is not None and not 0 < self.density <= 1:
            raise ValueError(f"density must lie in (0, 1], got {self.density}")
        if self.partial_planning and not (
            self.mode.kind in ("none", "strict") or self.mode.c in (1.0, math.inf)
        ):
            raise ValueError("partial planning needs an exact shortest-distance heuristic")
        PlannerConfig(self.w, self.h)

    def agent_count(self) -> int:
        if self.agents is not None:
            return self.agents
        return math.floor(self.density * sum(self.grid.free) + 1e-9)


class Planner:
    """Planning graph plus cached heuristic tables for one (map, highway, mode)."""

    def __init__(self, grid: GridMap, highway: Highway | None, mode: HeuristicMode):
        self.grid = grid
        self.highway = highway
        self.mode = mode
        if mode.kind == "strict":
            self.graph = strict_subgraph(grid, highway)
        else:
            self.graph = grid
        self.tables = TableCache(grid, highway, mode)
        # rerouting and deadlocks are judged with the planning heuristic itself
        self.measure = self.tables
        self.against = highway.against_edges if highway is not None else frozenset()
        self.with_edges = highway.with_edges if highway is not None else frozenset()

    @classmethod
    def for_config(cls, cfg: EpisodeConfig) -> "Planner":
        return cls(cfg.grid, cfg.highway, cfg.mode)


@dataclass
class AgentState:
    id: int
    location: int
    goal: int
    task_start: int = 0
    idle_steps: int = 0
    moving_steps: int = 0


@dataclass
class SimulationState:
    timestep: int
    agents: list[AgentState]
    rng: random.Random
    free_cells: list[int]
    tasks_finished: int = 0
    fail: bool = False
    w: int = 5
    records: list[IterationRecord] = field(default_factory=list)
    completed_tasks: list[tuple[int, int]] = field(default_factory=list)
    history: list[list[int]] = field(default_factory=list)

    def locations(self) -> list[int]:
        return [a.location for a in self.agents]


def init_episode(
    cfg: EpisodeConfig,
    starts: Sequence[int] | None = None,
    goals: Sequence[int] | None = None,
) -> SimulationState:
    """Random distinct starts and goals, unless explicit ones are given."""
    rng = random.Random(cfg.seed)
    free = cfg.grid.free_cells()
    if starts is not None:
        starts = list(starts)
        if goals is None or len(goals) != len(starts):
            raise ValueError("explicit starts need one goal each")
        cells = set(free)
        if len(set(starts)) != len(starts) or len(set(goals)) != len(goals):
            raise ValueError("starts and goals must be pairwise distinct")
        if not cells.issuperset(starts) or not cells.issuperset(goals):
            raise ValueError("starts and goals must be free cells")
        agents = [AgentState(i, s, g) for i, (s, g) in enumerate(zip(starts, goals))]
        return SimulationState(0, agents, rng, free, w=cfg.w, history=[[s] for s in starts])
    k = cfg.agent_count()
    if k < 1:
        raise ValueError("no agents to simulate")
    if k > len(free):
        raise ValueError(f"{k} agents do not fit on {len(free)} free cells")
    starts = rng.sample(free, k)
    taken: set[int] = set()
    agents = []
    for i, s in enumerate(starts):
        eligible = [c for c in free if c != s and c not in taken]
        if not eligible:
            raise ValueError("not enough free cells for distinct goals")
        g = rng.choice(eligible)
        taken.add(g)
        agents.append(AgentState(i, s, g))
    return SimulationState(0, agents, rng, free, w=cfg.w, history=[[s] for s in starts])


def assign_task(state: SimulationState, agent: AgentState) -> int | None:
    """Close the agent's finished task and draw a new goal; None if nothing is eligible."""
    others = {a.goal for a in state.agents if a.id != agent.id}
    eligible = [c for c in state.free_cells if c not in others and c != agent.location]
    if not eligible:
        return None
    state.tasks_finished += 1
    state.completed_tasks.append((agent.idle_steps, agent.moving_steps))
    agent.goal = state.rng.choice(eligible)
    agent.task_start = state.timestep
    agent.idle_steps = agent.moving_steps = 0
    return agent.goal


def unique_window_locations(path: Sequence[int], w: int) -> int:
    return len(set(pad_path(path, w)[: w + 1]))


def detect_deadlock(
    starts: Sequence[int],
    plans: Sequence[Sequence[int]],
    tables: Sequence[HeuristicTable],
    w: int,
    couplings: Sequence[tuple[int, int]] = (),
    strict: bool = False,
) -> list[frozenset[int]]:
    """Agent groups whose planned window makes no net progress towards their goals.

    Groups are connected components of the priority pairs PBS needed
    (``couplings``); a group is flagged when the sum of start distances is
    <= the sum of distances at the window end. Agents already at their goal
    are ignored. With ``strict`` only all-wait agents can be flagged.
    """
    n = len(starts)
    h0 = [tables[i][starts[i]] for i in range(n)]
    hn = [tables[i][pad_path(plans[i], w)[w]] for i in range(n)]
    active = {i for i in range(n) if h0[i] > 0}
    if strict:
        active = {i for i in active if unique_window_locations(plans[i], w) == 1}
    parent = {i: i for i in active}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in couplings:
        if a in active and b in active:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, set[int]] = {}
    for i in sorted(active):
        groups.setdefault(find(i), set()).add(i)
    flagged = []
    for members in groups.values():
        if sum(h0[i] for i in members) <= sum(hn[i] for i in members):
            flagged.append(frozenset(members))
    return flagged


def detect_rerouting(h_current: float, h_next: float) -> bool:
    """True when the agent ends the period farther from its goal than it started."""
    return h_current < h_next


def step_episode(state: SimulationState, cfg: EpisodeConfig, planner: Planner) -> SimulationState:
    if state.fail:
        raise RuntimeError("cannot step a failed episode")
    for agent in state.agents:
        if agent.location == agent.goal:
            assign_task(state, agent)

    w, h = state.w, cfg.h
    pcfg = PlannerConfig(w, h, cfg.partial_planning)
    starts = state.locations()
    goals = [a.goal for a in state.agents]
    infeasible = False
    couplings: frozenset = frozenset()
    # table builds are precomputation and are kept out of the solve timing
    tb = time.perf_counter()
    tables = {g: planner.tables[g] for g in goals}
    build_s = time.perf_counter() - tb
    t0 = time.perf_counter()
    try:
        report = solve(starts, goals, tables, planner.graph, pcfg, deadline=cfg.time_limit)
        plans = [list(p.locations) for p in report.plan]
        nodes = report.generated_nodes
        couplings = report.orderings
    except PBSTimeout:
        elapsed = time.perf_counter() - t0
        state.fail = True
        state.records.append(IterationRecord(
            elapsed, 0, 0.0, 0, 0, False, len(starts), timeout=True, table_build_s=build_s
        ))
        return state
    except PBSInfeasible as exc:
        infeasible = True
        plans = [[s] for s in starts]
        nodes = getattr(exc, "generated_nodes", 1)
    runtime = time.perf_counter() - t0

    strict = cfg.mode.kind == "strict"
    measure = [planner.measure[g] for g in goals]
    flagged = detect_deadlock(starts, plans, measure, w, sorted(couplings), strict)
    flagged_agents = set().union(*flagged) if flagged else set()
    moving_members = sum(1 for i in flagged_agents if unique_window_locations(plans[i], w) > 1)

    padded = [pad_path(p, max(w, h)) for p in plans]
    against = total = 0
    off_highway = [False] * len(starts)
    for step in range(1, h + 1):
        for i, agent in enumerate(state.agents):
            cur, nxt = padded[i][step - 1], padded[i][step]
            if cur == nxt:
                agent.idle_steps += 1
            else:
                agent.moving_steps += 1
                total += 1
                if (cur, nxt) in planner.against:
                    against += 1
                if (cur, nxt) not in planner.with_edges:
                    off_highway[i] = True
            agent.location = nxt
            state.history[i].append(nxt)
    state.timestep += h

    rerouting = highway_rerouting = 0
    for i, agent in enumerate(state.agents):
        if detect_rerouting(measure[i][starts[i]], measure[i][agent.location]):
            rerouting += 1
            if planner.highway is not None and not off_highway[i]:
                highway_rerouting += 1

    deadlock = infeasible or bool(flagged)
    state.records.append(IterationRecord(
        runtime_s=runtime,
        generated_nodes=nodes,
        rerouting_agent_fraction=rerouting / len(starts),
        against_highway_moves=against,
        total_moves=total,
        deadlock_flag=deadlock,
        agents=len(starts),
        rerouting_agents=rerouting,
        highway_rerouting_agents=highway_rerouting,
        deadlock_moving_members=moving_members,
        infeasible=infeasible,
        table_build_s=build_s,
    ))
    if cfg.escalate_deadlock:
        state.w = min(2 * state.w, cfg.max_w) if deadlock else cfg.w
    return state


def finish_episode(state: SimulationState) -> None:
    """Credit agents standing on their goal when the run stops."""
    for agent in state.agents:
        if agent.location == agent.goal:
            state.tasks_finished += 1
            state.completed_tasks.append((agent.idle_steps, agent.moving_steps))
            agent.task_start = state.timestep
            agent.idle_steps = agent.moving_steps = 0


def run_episode(cfg: EpisodeConfig, planner: Planner | None = None) -> tuple[SimulationState, EpisodeSummary]:
    planner = planner or Planner.for_config(cfg)
    state = init_episode(cfg)
    for _ in range(cfg.iterations):
        step_episode(state, cfg, planner)
        if state.fail:
            break
    if not state.fail:
        finish_episode(state)
    summary = summarize_episode(
        state.records, state.tasks_finished, state.timestep, state.completed_tasks, state.fail
    )
    return state, summary


def trace_conflicts(history: Sequence[Sequence[int]]) -> list[tuple[str, int, int, int]]:
    """Replay executed trajectories and list every vertex or swap collision."""
    bad = []
    horizon = max(len(p) for p in history)
    for t in range(horizon):
        seen: dict[int, int] = {}
        for i, p in enumerate(history):
            loc = p[min(t, len(p) - 1)]
            if loc in seen:
                bad.append(("vertex", seen[loc], i, t))
            seen[loc] = i
        if t + 1 < horizon:
            moves = {}
            for i, p in enumerate(history):
                a, b = p[min(t, len(p) - 1)], p[min(t + 1, len(p) - 1)]
                if a != b:
                    moves[(a, b)] = i
            for (a, b), i in moves.items():
                j = moves.get((b, a))
                if j is not None and i < j:
                    bad.append(("edge", i, j, t))
    return bad
