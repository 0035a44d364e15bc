import json

import pytest
from hypothesis import given, settings, strategies as st

from natap.hwgraph import (Family, GraphError, HardwareGraph, all_pairs_distances, arc_neighborhood,
                           generate_hardware, grid, heavy_hex, heavy_hex_vertex_count, line, subgraph)

from oracles import bfs_distances


def test_line_counts():
    H = generate_hardware("line", (14, 1))
    assert H.num_vertices == 14
    assert len(H.arcs) == 26


def test_single_heavy_hex_cell():
    H = generate_hardware("heavy_hex", (1, 1))
    assert H.num_vertices == 12
    assert len(H.arcs) == 24


def test_grid_counts():
    H = generate_hardware("grid", (5, 5))
    assert H.num_vertices == 25
    assert len(H.arcs) == 80


@pytest.mark.parametrize("dims", [(0, 3), (2, 0)])
def test_zero_dims_rejected(dims):
    with pytest.raises(GraphError):
        generate_hardware("grid", dims)


# hand counts: a cell has 6 corners + 6 midpoints; neighbouring cells share an edge
# (2 corners + 1 midpoint); a 2x2 patch has 16 corners and 19 edges
@pytest.mark.parametrize("rc,count", [((1, 1), 12), ((1, 2), 21), ((2, 2), 35)])
def test_heavy_hex_vertex_count_hand_values(rc, count):
    H = heavy_hex(*rc)
    assert H.num_vertices == heavy_hex_vertex_count(*rc)
    assert H.num_vertices == count


def test_heavy_hex_degrees_at_most_three():
    H = heavy_hex(3, 3)
    assert max(len(a) for a in H.adjacency) == 3
    assert H.is_connected()


def test_deterministic_serialization():
    a = json.dumps(heavy_hex(2, 3).to_json())
    b = json.dumps(heavy_hex(2, 3).to_json())
    assert a == b


def test_json_round_trip(tmp_path):
    H = heavy_hex(2, 2)
    p = tmp_path / "hw.json"
    H.save(p)
    G = HardwareGraph.load(p)
    assert G.edges == H.edges and G.num_vertices == H.num_vertices


def test_json_edges_symmetrized():
    H = HardwareGraph.from_json({"num_vertices": 3, "edges": [[1, 0], [2, 1]], "family": "custom"})
    assert H.edges == ((0, 1), (1, 2))
    assert H.has_arc(1, 0) and H.has_arc(0, 1)


@pytest.mark.parametrize("edges", [[[0, 0]], [[0, 5]]])
def test_bad_edges(edges):
    with pytest.raises(GraphError):
        HardwareGraph(3, tuple(map(tuple, edges)))


def test_distances_small():
    D = all_pairs_distances(line(3))
    assert D[0, 2] == 2
    assert (D.diagonal() == 0).all()
    assert all_pairs_distances(grid(2, 2))[0, 3] == 2


def test_distances_disconnected_names_pair():
    H = HardwareGraph(4, ((0, 1), (2, 3)))
    with pytest.raises(GraphError, match="unreachable"):
        all_pairs_distances(H)


def test_arc_neighborhood_examples():
    assert arc_neighborhood(line(4), (1, 2)) == {0, 3}
    assert arc_neighborhood(line(2), (0, 1)) == frozenset()
    star = HardwareGraph(4, ((0, 1), (0, 2), (0, 3)))
    assert arc_neighborhood(star, (0, 1)) == {2, 3}
    with pytest.raises(GraphError):
        arc_neighborhood(line(3), (0, 2))


def test_subgraph_relabels():
    G, keep = subgraph(line(5), [1, 2, 3])
    assert G.edges == ((0, 1), (1, 2))
    assert keep == [1, 2, 3]


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 9))
    edges = {(draw(st.integers(0, k - 1)), k) for k in range(1, n)}  # random tree
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=10))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return HardwareGraph(n, tuple(edges))


@settings(max_examples=60, deadline=None)
@given(connected_graphs())
def test_distances_match_bfs_oracle(H):
    D, _ = bfs_distances(H.num_vertices, H.edges)
    assert (all_pairs_distances(H) == D).all()


@settings(max_examples=60, deadline=None)
@given(connected_graphs())
def test_neighborhood_symmetric(H):
    for i, j in H.arcs:
        assert arc_neighborhood(H, (i, j)) == arc_neighborhood(H, (j, i))
        assert i not in arc_neighborhood(H, (i, j))
