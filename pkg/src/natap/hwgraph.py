"""Hardware coupling graphs.

Vertex numbering for ``heavy_hex(rows, cols)``: hexagon cells are visited
row-major (bottom row first, left to right). Within a cell the twelve
vertices are listed clockwise starting at the lower-left corner; a vertex
already numbered by an earlier cell keeps its index. The underlying
honeycomb is laid out as a brick wall, so a ``rows x cols`` patch has
``(rows + 1) * (2 * cols + 2) - 2`` corner vertices and
``3 * rows * cols + 2 * rows + 2 * cols - 1`` honeycomb edges. Each edge gets
one extra vertex, so the heavy-hex vertex count is the sum of the two
(12 for 1x1, 21 for 1x2, 164 for 5x5).

``grid(rows, cols)`` numbers vertex ``(r, c)`` as ``r * cols + c``;
``line(n)`` is the path ``0 - 1 - ... - n-1``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class Family(str, Enum):
    HEAVY_HEX = "heavy_hex"
    GRID = "grid"
    LINE = "line"
    CUSTOM = "custom"


class GraphError(ValueError):
    pass


def heavy_hex_vertex_count(rows: int, cols: int) -> int:
    corners = (rows + 1) * (2 * cols + 2) - 2
    edges = 3 * rows * cols + 2 * rows + 2 * cols - 1
    return corners + edges


@dataclass(frozen=True)
class HardwareGraph:
    """Symmetric directed coupling graph ``H = (V, A)``.

    ``edges`` holds each undirected coupling once as ``(i, j)`` with
    ``i < j``; ``arcs`` holds both directions.
    """

    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    family: Family = Family.CUSTOM
    coords: tuple[tuple[int, int], ...] | None = None
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    arcs: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)
    _arc_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.num_vertices
        if n < 1:
            raise GraphError("graph needs at least one vertex")
        canon = set()
        for i, j in self.edges:
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i},{j}) out of range for {n} vertices")
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            canon.add((min(i, j), max(i, j)))
        edges = tuple(sorted(canon))
        adj: list[list[int]] = [[] for _ in range(n)]
        for i, j in edges:
            adj[i].append(j)
            adj[j].append(i)
        arcs = tuple(sorted([(i, j) for i, j in edges] + [(j, i) for i, j in edges]))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "_arc_index", {a: k for k, a in enumerate(arcs)})
        if self.coords is not None and len(self.coords) != n:
            raise GraphError("coords must list one coordinate per vertex")

    @property
    def vertices(self) -> range:
        return range(self.num_vertices)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def has_arc(self, i: int, j: int) -> bool:
        return (i, j) in self._arc_index

    def arc_index(self, i: int, j: int) -> int:
        return self._arc_index[(i, j)]

    def is_connected(self) -> bool:
        seen = _bfs(self, 0)
        return all(d >= 0 for d in seen)

    def to_json(self) -> dict:
        out = {
            "num_vertices": self.num_vertices,
            "edges": [list(e) for e in self.edges],
            "family": self.family.value,
        }
        if self.coords is not None:
            out["coords"] = [list(c) for c in self.coords]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "HardwareGraph":
        try:
            n = int(data["num_vertices"])
            edges = [tuple(int(v) for v in e) for e in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed hwgraph document: {exc}") from exc
        if any(len(e) != 2 for e in edges):
            raise GraphError("every edge must have exactly two endpoints")
        family = Family(data.get("family", "custom"))
        coords = data.get("coords")
        if coords is not None:
            coords = tuple(tuple(int(v) for v in c) for c in coords)
        return cls(n, tuple(edges), family, coords)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "HardwareGraph":
        return cls.from_json(json.loads(Path(path).read_text()))


def _bfs(H: HardwareGraph, source: int) -> list[int]:
    dist = [-1] * H.num_vertices
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in H.adjacency[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def all_pairs_distances(H: HardwareGraph) -> np.ndarray:
    """Hop-count distance matrix; raises if ``H`` is disconnected."""
    n = H.num_vertices
    dist = np.zeros((n, n), dtype=np.int64)
    for s in range(n):
        row = _bfs(H, s)
        for t, d in enumerate(row):
            if d < 0:
                raise GraphError(f"graph is disconnected: vertex {t} unreachable from {s}")
        dist[s] = row
    return dist


def arc_neighborhood(H: HardwareGraph, arc: tuple[int, int]) -> frozenset[int]:
    """``N((i, j)) = (N(i) - {j}) | (N(j) - {i})``."""
    i, j = arc
    if not H.has_arc(i, j):
        raise GraphError(f"({i},{j}) is not an arc of the graph")
    return frozenset(H.adjacency[i]).difference({j}) | frozenset(H.adjacency[j]).difference({i})


def line(n: int) -> HardwareGraph:
    return HardwareGraph(n, tuple((i, i + 1) for i in range(n - 1)), Family.LINE)


def grid(rows: int, cols: int) -> HardwareGraph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return HardwareGraph(rows * cols, tuple(edges), Family.GRID)


def hex_cell_cycle(y: int, k: int) -> list[tuple[int, int]]:
    """Heavy-hex coordinates of cell ``(y, k)``, clockwise from lower-left."""
    a = 2 * k + (y % 2)
    X, Y = 2 * a, 2 * y
    return [
        (X, Y), (X, Y + 1), (X, Y + 2),
        (X + 1, Y + 2), (X + 2, Y + 2), (X + 3, Y + 2), (X + 4, Y + 2),
        (X + 4, Y + 1), (X + 4, Y),
        (X + 3, Y), (X + 2, Y), (X + 1, Y),
    ]


def heavy_hex(rows: int, cols: int) -> HardwareGraph:
    index: dict[tuple[int, int], int] = {}
    edges = []
    for y in range(rows):
        for k in range(cols):
            cyc = hex_cell_cycle(y, k)
            for p in cyc:
                if p not in index:
                    index[p] = len(index)
            for s in range(12):
                edges.append((index[cyc[s]], index[cyc[(s + 1) % 12]]))
    coords = [None] * len(index)
    for p, v in index.items():
        coords[v] = p
    return HardwareGraph(len(index), tuple(edges), Family.HEAVY_HEX, tuple(coords))


def generate_hardware(family: str | Family, dims: tuple[int, int]) -> HardwareGraph:
    family = Family(family)
    a, b = dims
    if a < 1 or b < 1:
        raise GraphError(f"dims must be positive, got {dims}")
    if family is Family.LINE:
        return line(a)
    if family is Family.GRID:
        return grid(a, b)
    if family is Family.HEAVY_HEX:
        return heavy_hex(a, b)
    raise GraphError("custom graphs are loaded from JSON, not generated")


def subgraph(H: HardwareGraph, keep: list[int]) -> tuple[HardwareGraph, list[int]]:
    """Induced subgraph on ``keep`` (relabelled ``0..len(keep)-1``) plus the label map."""
    pos = {v: k for k, v in enumerate(keep)}
    edges = [(pos[i], pos[j]) for i, j in H.edges if i in pos and j in pos]
    return HardwareGraph(len(keep), tuple(edges), Family.CUSTOM), list(keep)
