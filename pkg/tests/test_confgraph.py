import itertools
import statistics

import numpy as np
import pytest

from eosched._greedy import gwmin_arrays
from eosched.confgraph import (ConflictGraph, GraphTooLarge, Vertex, build_conflict_graph, conflicts,
                               dump_graph, enumerate_vertices, exact_mwis, graph_from_vertices, greedy_mwis,
                               read_graph_dump, schedule_from_set)
from eosched.evaluation import objective, validate_schedule
from eosched.power import InfeasibleError
from eosched.scenario import Eos, Globals, Scenario, SlotGrid, Task, Ttw

from builders import REF_GLOBALS, random_feasible_powers, small_scenario


def graph_from_edges(weights, edges):
    n = len(weights)
    nb = [set() for _ in range(n)]
    for u, v in edges:
        nb[u].add(v)
        nb[v].add(u)
    verts = tuple(Vertex(i, 0, 0, float(w), 1, None, None) for i, w in enumerate(weights))
    return ConflictGraph(verts, tuple(tuple(sorted(s)) for s in nb))


def random_graph(rng, n, p=0.3, wlo=0.05, whi=1.0):
    edges = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < p]
    return graph_from_edges(rng.uniform(wlo, whi, n), edges)


def brute_force_mwis_weight(graph):
    """Enumerate every subset with numpy bitmasks; return the best independent-set weight."""
    n = len(graph)
    masks = np.arange(1 << n, dtype=np.int64)
    bad = np.zeros(1 << n, dtype=bool)
    for u, v in graph.edges():
        bad |= ((masks >> u) & (masks >> v) & 1).astype(bool)
    total = np.zeros(1 << n)
    for i, vx in enumerate(graph.vertices):
        total += ((masks >> i) & 1) * vx.weight
    total[bad] = -np.inf
    return float(total.max())


def V(task, start, n=1, ant="h", eos="s", w=1.0, ttw="k"):
    return Vertex(task, ttw, start, w, n, ant, eos)


def test_conflicts_examples():
    assert conflicts(V("a", 0, ttw="k0"), V("a", 9, ttw="k1"))
    assert conflicts(V("a", 3, 2), V("b", 4, 2, eos="s1"))
    assert not conflicts(V("a", 3, 2, "h0", "s0"), V("b", 3, 2, "h1", "s1"))
    assert conflicts(V("a", 3, 2, "h0", "s0"), V("b", 4, 1, "h1", "s0"))
    assert not conflicts(V("a", 3, 2), V("b", 5, 2))


def two_task_scenario():
    return Scenario(SlotGrid(10, 10.0), (Eos("s", 100.0, 36.0),), ("h",),
                    (Ttw("k", "s", "h", 2, 5, 0.0, 36.0, 2.5e8),),
                    (Task("a", "s", 1e9, 2.0, 0, 9), Task("b", "s", 1e9, 3.0, 0, 9)),
                    Globals(lam=0.3, **REF_GLOBALS))


def test_build_two_tasks_shared_window():
    sc = two_task_scenario()
    g = build_conflict_graph(sc, {"a": 1.0, "b": 1.0})
    assert len(g) == 8
    # 2 x C(4,2) same-task edges + 4 same-slot cross-task edges
    assert len(g.edges()) == 16
    for u, v in itertools.combinations(range(8), 2):
        a, b = g.vertices[u], g.vertices[v]
        expect = a.task == b.task or a.start_slot == b.start_slot
        assert (v in g.neighbors[u]) == expect
    chosen = exact_mwis(g)
    sched = schedule_from_set(g, chosen, {"a": 1.0, "b": 1.0}, sc)
    assert {a.task for a in sched.assignments} == {"a", "b"}
    assert len({a.start_slot for a in sched.assignments}) == 2
    assert validate_schedule(sched, sc) == []
    assert sorted(greedy_mwis(g)) == sorted(chosen) or g.weight_of(greedy_mwis(g)) == g.weight_of(chosen)


def test_build_trivial_cases():
    sc = two_task_scenario()
    empty = Scenario(sc.grid, sc.eoses, sc.antennas, sc.ttws, (), sc.globals)
    assert len(build_conflict_graph(empty, {})) == 0
    one = Scenario(sc.grid, sc.eoses, sc.antennas, (Ttw("k", "s", "h", 4, 4, 0.0, 36.0, 2.5e8),),
                   sc.tasks[:1], sc.globals)
    g = build_conflict_graph(one, {"a": 1.0})
    assert len(g) == 1 and g.edges() == []


def test_build_rejects_rate_violation():
    sc = two_task_scenario()
    with pytest.raises(InfeasibleError, match="'a'.*'k'"):
        build_conflict_graph(sc, {"a": 1e-9, "b": 1.0})
    assert len(build_conflict_graph(sc, {"a": 1e-9, "b": 1.0}, skip_infeasible=True)) == 4


def test_vertex_weights_follow_objective_coefficients():
    sc = two_task_scenario()
    g = build_conflict_graph(sc, {"a": 50.0, "b": 1.0})
    for i, v in enumerate(g.vertices):
        s = schedule_from_set(g, [i], {"a": 50.0, "b": 1.0}, sc)
        assert v.weight == pytest.approx(s.objective_max_form, rel=1e-12)


def test_greedy_examples():
    g = graph_from_edges([1.0, 2.0, 3.0], [])
    assert greedy_mwis(g) == [0, 1, 2]
    tri = graph_from_edges([5.0, 1.0, 1.0], [(0, 1), (1, 2), (0, 2)])
    assert greedy_mwis(tri) == [0]
    neg = graph_from_edges([-1.0, -2.0, -0.5], [(0, 1)])
    assert greedy_mwis(neg) == []
    assert neg.weight_of(greedy_mwis(neg)) == 0


def test_greedy_skips_nonpositive_but_counts_their_degree():
    # vertex 0 is cheap but has a negative neighbour; ratio 1/2 vs 0.8/1
    g = graph_from_edges([1.0, 0.8, -5.0], [(0, 2), (0, 1)])
    assert greedy_mwis(g) == [1]


def test_exact_examples():
    tri = graph_from_edges([5.0, 1.0, 1.0], [(0, 1), (1, 2), (0, 2)])
    assert exact_mwis(tri) == [0]
    c4 = graph_from_edges([3.0, 2.0, 3.0, 2.0], [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert exact_mwis(c4) == [0, 2] and c4.weight_of([0, 2]) == 6.0
    assert exact_mwis(graph_from_edges([], [])) == []
    with pytest.raises(GraphTooLarge):
        exact_mwis(graph_from_edges([1.0] * 26, []))


@pytest.mark.parametrize("seed", range(30))
def test_exact_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(1, 15)), p=rng.uniform(0.1, 0.7), wlo=-0.5)
    chosen = exact_mwis(g)
    assert g.is_independent(chosen)
    assert g.weight_of(chosen) == pytest.approx(brute_force_mwis_weight(g), abs=1e-12)


def test_greedy_ratio_regression_bound():
    ratios = []
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        g = random_graph(rng, int(rng.integers(5, 21)), p=rng.uniform(0.1, 0.5))
        gr = greedy_mwis(g)
        assert g.is_independent(gr)
        ratios.append(g.weight_of(gr) / g.weight_of(exact_mwis(g)))
    assert statistics.median(ratios) >= 0.8


def test_schedule_from_set():
    sc = two_task_scenario()
    powers = {"a": 1.0, "b": 1.0}
    g = build_conflict_graph(sc, powers)
    s0 = schedule_from_set(g, [], powers, sc)
    assert s0.assignments == () and s0.objective_max_form == 0
    s1 = schedule_from_set(g, [0], powers, sc)
    assert len(s1.assignments) == 1
    with pytest.raises(ValueError):
        schedule_from_set(g, [0, 1], powers, sc)


@pytest.mark.parametrize("seed", range(40))
def test_edges_sound_and_complete_against_validator(seed):
    sc = small_scenario(seed)
    rng = np.random.default_rng(seed)
    powers = random_feasible_powers(sc, rng)
    g = build_conflict_graph(sc, powers, skip_infeasible=True)
    for u, v in itertools.combinations(range(len(g)), 2):
        s = schedule_from_set(g, [u], powers, sc)
        pair = type(s)(s.assignments + schedule_from_set(g, [v], powers, sc).assignments, powers)
        violated = bool(validate_schedule(pair, sc))
        assert violated == (v in g.neighbors[u]), (g.vertices[u], g.vertices[v])


@pytest.mark.parametrize("seed", range(40))
def test_set_weight_equals_schedule_objective(seed):
    sc = small_scenario(seed)
    rng = np.random.default_rng(seed)
    powers = random_feasible_powers(sc, rng)
    g = build_conflict_graph(sc, powers, skip_infeasible=True)
    chosen = greedy_mwis(g)
    s = schedule_from_set(g, chosen, powers, sc)
    assert validate_schedule(s, sc) == []
    assert objective(s, sc).max_form_value == pytest.approx(g.weight_of(chosen), rel=1e-12, abs=1e-15)


def _kernel_on(g, sc):
    ant = {h: i for i, h in enumerate(sc.antennas)}
    eos = {e.id: i for i, e in enumerate(sc.eoses)}
    task = {t.id: i for i, t in enumerate(sc.tasks)}
    vs = g.vertices
    return list(gwmin_arrays([task[v.task] for v in vs], [ant[v.antenna] for v in vs],
                             [eos[v.eos] for v in vs], [v.start_slot for v in vs],
                             [v.proc_slots for v in vs], [v.weight for v in vs],
                             sc.grid.num_slots, len(sc.antennas), len(sc.eoses)))


@pytest.mark.parametrize("seed", range(60))
def test_compiled_greedy_matches_reference(seed):
    sc = small_scenario(seed, max_tasks=8, max_ttws=4, num_slots=16, lam=float(seed % 10) / 10)
    rng = np.random.default_rng(seed)
    powers = random_feasible_powers(sc, rng)
    full = enumerate_vertices(sc, powers, skip_infeasible=True)
    # random induced subgraph, as in fitness evaluation
    keep = [v for v in full if rng.random() < 0.7]
    g = graph_from_vertices(keep)
    assert _kernel_on(g, sc) == greedy_mwis(g)


def test_compiled_greedy_empty():
    assert len(gwmin_arrays([], [], [], [], [], [], 10, 1, 1)) == 0


def test_dump_round_trip(tmp_path):
    sc = two_task_scenario()
    g = build_conflict_graph(sc, {"a": 1.0, "b": 2.0})
    dump_graph(g, tmp_path / "g.txt")
    weights, edges = read_graph_dump(tmp_path / "g.txt")
    assert weights == [v.weight for v in g.vertices]
    assert edges == g.edges()
    assert (tmp_path / "g.txt").read_text().startswith("n 8\n")
