import math
import random

from hypothesis import given, settings, strategies as st

from highway_mapf.grid_map import assign_highway, extract_corridors
from highway_mapf.heuristics import HeuristicMode, TableCache, build_table
from highway_mapf.metrics import EpisodeSummary, summarize, task_timestep_split
from highway_mapf.pbs import PBSInfeasible, solve
from highway_mapf.spacetime_astar import PlannerConfig, plan
from oracles import bfs_dist, random_map, replay_conflicts

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def world(seed):
    rng = random.Random(seed)
    g = random_map(rng, rng.randint(3, 7), rng.randint(3, 7), 0.25)
    hw = assign_highway(g, [rng.random() < 0.5 for _ in extract_corridors(g)])
    return rng, g, hw


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([1.0, 1.5, 3.0, math.inf]))
def test_soft_table_brackets_plain_distance(seed, c):
    rng, g, hw = world(seed)
    goal = rng.choice(g.free_cells())
    plain = bfs_dist(g, goal)
    soft = build_table(g, hw, HeuristicMode.soft(c), goal).dist
    strict = bfs_dist(g, goal, skip=hw.against_edges)
    for u in g.free_cells():
        assert plain[u] <= soft[u] <= strict[u]


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_unconstrained_plan_follows_table(seed):
    rng, g, hw = world(seed)
    start, goal = rng.sample(g.free_cells(), 2)
    t = build_table(g, hw, HeuristicMode.soft(2), goal)
    p = plan(g, t, start, None, PlannerConfig(3, 3))
    # steps inside the window count 1 each, so the cost sits between plain and weighted distance
    assert bfs_dist(g, goal)[start] <= p.cost <= t[start]
    assert p.locations[0] == start and p.locations[-1] == goal


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=4), st.sampled_from([2, 3, 5]))
def test_pbs_plans_have_no_window_conflicts(seed, k, w):
    rng, g, hw = world(seed)
    k = min(k, len(g.free_cells()) // 2)
    cells = rng.sample(g.free_cells(), 2 * k)
    try:
        rep = solve(cells[:k], cells[k:], TableCache(g, hw, HeuristicMode.soft(2)), g, PlannerConfig(w, w))
    except PBSInfeasible:
        return
    assert not replay_conflicts([p.locations for p in rep.plan], upto=w)
    assert rep.generated_nodes >= 1


@given(st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=30))
def test_task_split_sums_to_duration(trace):
    idle, moving = task_timestep_split(trace)
    assert idle + moving == len(trace) - 1


@given(st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=8), st.randoms())
def test_batch_means_ignore_order(values, rnd):
    eps = [EpisodeSummary(v, v, v, v, v, v, v, 0) for v in values]
    shuffled = eps[:]
    rnd.shuffle(shuffled)
    a, b = summarize(eps).means, summarize(shuffled).means
    assert all(math.isclose(a[k], b[k], abs_tol=1e-12) for k in a)
