import itertools

import pytest
from hypothesis import given, settings, strategies as st

from natap.coloring import (Coloring, ColoringError, ExperimentSchedule, InterferenceGraph, Status,
                            build_interference_graph, dsatur, exact_coloring, find_conflict,
                            greedy_randomized_coloring, heavy_hex_analytic_coloring, is_proper,
                            max_clique_heuristic, schedule_experiments, tabucol, verify_schedule)
from natap.hwgraph import HardwareGraph, arc_neighborhood, grid, heavy_hex, line


def _graph(n, edges):
    adj = [set() for _ in range(n)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    nodes = tuple((k, k + 1) for k in range(n))  # labels only
    return InterferenceGraph(nodes, tuple(frozenset(a) for a in adj), tuple(frozenset() for _ in range(n)))


def _chromatic_brute(G):
    n = len(G)
    for k in range(1, n + 1):
        for cols in itertools.product(range(k), repeat=n):
            if all(cols[u] != cols[v] for u in range(n) for v in G.adjacency[u]):
                return k
    return 0


def test_line4_interference_is_triangle():
    G = build_interference_graph(line(4))
    assert G.nodes == ((0, 1), (1, 2), (2, 3))
    assert all(len(a) == 2 for a in G.adjacency)


def test_disjoint_components_isolated():
    G = build_interference_graph(HardwareGraph(4, ((0, 1), (2, 3))))
    assert all(not a for a in G.adjacency)


def test_footprints_overlap_relation():
    H = heavy_hex(1, 2)
    G = build_interference_graph(H)
    for u, v in itertools.combinations(range(len(G)), 2):
        fu = set(G.nodes[u]) | arc_neighborhood(H, G.nodes[u])
        fv = set(G.nodes[v]) | arc_neighborhood(H, G.nodes[v])
        assert (v in G.adjacency[u]) == bool(fu & fv)


def test_heavy_hex_has_six_clique():
    G = build_interference_graph(heavy_hex(1, 2))
    K = max_clique_heuristic(G)
    assert len(K) >= 6
    assert all(b in G.adjacency[a] for a, b in itertools.combinations(K, 2))


def test_greedy_small_cases():
    assert greedy_randomized_coloring(_graph(4, []), 5, 0).num_colors == 1
    assert greedy_randomized_coloring(_graph(3, [(0, 1), (1, 2), (0, 2)]), 5, 0).num_colors == 3


def test_greedy_more_runs_never_worse():
    G = build_interference_graph(heavy_hex(2, 2))
    hist = []
    few = greedy_randomized_coloring(G, 20, 7, hist)
    many = greedy_randomized_coloring(G, 200, 7)
    assert many.num_colors <= few.num_colors
    assert len(hist) == 20 and min(hist) == few.num_colors


def test_exact_heavy_hex_pair():
    col, cert = exact_coloring(build_interference_graph(heavy_hex(1, 2)), 60)
    assert col.num_colors == 6 and cert.status is Status.OPTIMAL
    assert len(cert.clique) == 6


def test_exact_triangle():
    col, cert = exact_coloring(_graph(3, [(0, 1), (1, 2), (0, 2)]), 5)
    assert col.num_colors == 3 and cert.status is Status.OPTIMAL


@st.composite
def small_graphs(draw):
    n = draw(st.integers(1, 7))
    pairs = list(itertools.combinations(range(n), 2))
    edges = [p for p in pairs if draw(st.booleans())]
    return _graph(n, edges)


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_exact_matches_brute_force(G):
    col, cert = exact_coloring(G, 10)
    assert is_proper(G, col)
    assert col.num_colors == _chromatic_brute(G)
    assert cert.status is Status.OPTIMAL
    assert col.num_colors >= len(cert.clique)


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_every_method_proper(G):
    assert is_proper(G, dsatur(G))
    assert is_proper(G, greedy_randomized_coloring(G, 3, 1))


def test_tabucol_finds_six_on_heavy_hex():
    G = build_interference_graph(heavy_hex(3, 3))
    col = tabucol(G, 6, seed=1)
    assert col is not None and is_proper(G, col) and col.num_colors <= 6


@pytest.mark.parametrize("rc", [(1, 1), (1, 2), (2, 2), (3, 4)])
def test_analytic_coloring_proper(rc):
    H = heavy_hex(*rc)
    col = heavy_hex_analytic_coloring(H)
    assert is_proper(build_interference_graph(H), col)
    assert col.num_colors <= 6
    if rc != (1, 1):
        assert col.num_colors == 6


def test_analytic_rejects_other_families():
    with pytest.raises(ColoringError):
        heavy_hex_analytic_coloring(grid(3, 3))


def test_find_conflict_reports_pair():
    G = build_interference_graph(line(4))
    assert find_conflict(G, Coloring((0, 0, 1))) == (0, 1)


def test_schedule_heavy_hex():
    H = heavy_hex(2, 2)
    sched = schedule_experiments(H, heavy_hex_analytic_coloring(H))
    assert len(sched.batches) == 6
    assert verify_schedule(H, sched) == []
    assert sorted(s.cr_edge for b in sched.batches for s in b) == list(H.edges)


def test_schedule_line_and_single_edge():
    H = line(4)
    col, _ = exact_coloring(build_interference_graph(H), 5)
    sched = schedule_experiments(H, col)
    assert [len(b) for b in sched.batches] == [1, 1, 1]
    one = schedule_experiments(line(2), Coloring((0,)))
    assert len(one.batches) == 1 and len(one.batches[0]) == 1


def test_schedule_rejects_improper():
    with pytest.raises(ColoringError, match="share color"):
        schedule_experiments(line(4), Coloring((0, 0, 1)))


def test_schedule_json_round_trip():
    H = heavy_hex(1, 2)
    sched = schedule_experiments(H, heavy_hex_analytic_coloring(H))
    assert ExperimentSchedule.from_json(sched.to_json()) == sched


def test_coloring_json_round_trip():
    G = build_interference_graph(line(5))
    col = dsatur(G)
    assert Coloring.from_json(col.to_json(G), G) == col
