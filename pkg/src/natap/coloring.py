"""Experiment scheduling for CX/spectator crosstalk benchmarks via graph coloring.

Every undirected hardware edge is one benchmark: a stretched CR drive on the
edge while randomized benchmarking runs on all of its spectator qubits. Two
benchmarks can share a batch only if their footprints (edge endpoints plus
spectators) are disjoint, which is the adjacency of the interference graph.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .hwgraph import Family, GraphError, HardwareGraph, arc_neighborhood


class ColoringError(ValueError):
    pass


Edge = tuple[int, int]


@dataclass(frozen=True)
class InterferenceGraph:
    nodes: tuple[Edge, ...]
    adjacency: tuple[frozenset[int], ...]
    footprints: tuple[frozenset[int], ...]

    def __len__(self) -> int:
        return len(self.nodes)

    def index(self, edge: Edge) -> int:
        return self.nodes.index((min(edge), max(edge)))

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])


@dataclass(frozen=True)
class Coloring:
    color_of: tuple[int, ...]

    @property
    def num_colors(self) -> int:
        return max(self.color_of) + 1 if self.color_of else 0

    def classes(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_colors)]
        for v, c in enumerate(self.color_of):
            out[c].append(v)
        return out

    def to_json(self, G: InterferenceGraph) -> dict:
        return {"colors": {f"{i}-{j}": c for (i, j), c in zip(G.nodes, self.color_of)}}

    @classmethod
    def from_json(cls, data: dict, G: InterferenceGraph) -> "Coloring":
        colors = data["colors"]
        out = []
        for i, j in G.nodes:
            key = f"{i}-{j}"
            if key not in colors:
                raise ColoringError(f"coloring has no entry for edge {key}")
            out.append(int(colors[key]))
        return cls(tuple(out))


class Status(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE_ONLY = "feasible_only"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class OptimalityCertificate:
    clique: tuple[int, ...]
    status: Status
    nodes_explored: int = 0


@dataclass(frozen=True)
class CxrbSpec:
    cr_edge: Edge
    rb_qubits: tuple[int, ...]

    @property
    def footprint(self) -> frozenset[int]:
        return frozenset(self.cr_edge) | frozenset(self.rb_qubits)


@dataclass(frozen=True)
class ExperimentSchedule:
    batches: tuple[tuple[CxrbSpec, ...], ...]

    def to_json(self) -> dict:
        return {
            "batches": [
                [{"cr_edge": list(s.cr_edge), "rb_qubits": list(s.rb_qubits)} for s in batch]
                for batch in self.batches
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentSchedule":
        return cls(tuple(
            tuple(CxrbSpec(tuple(s["cr_edge"]), tuple(s["rb_qubits"])) for s in batch)
            for batch in data["batches"]
        ))


def build_interference_graph(H: HardwareGraph) -> InterferenceGraph:
    nodes = H.edges
    footprints = tuple(frozenset(e) | arc_neighborhood(H, e) for e in nodes)
    owners: dict[int, list[int]] = {}
    for k, fp in enumerate(footprints):
        for v in fp:
            owners.setdefault(v, []).append(k)
    adj: list[set[int]] = [set() for _ in nodes]
    for members in owners.values():
        for a in members:
            adj[a].update(members)
    for k in range(len(nodes)):
        adj[k].discard(k)
    return InterferenceGraph(nodes, tuple(frozenset(a) for a in adj), footprints)


def find_conflict(G: InterferenceGraph, coloring: Coloring) -> tuple[int, int] | None:
    if len(coloring.color_of) != len(G):
        raise ColoringError("coloring size does not match the interference graph")
    for u in range(len(G)):
        for v in G.adjacency[u]:
            if u < v and coloring.color_of[u] == coloring.color_of[v]:
                return (u, v)
    return None


def is_proper(G: InterferenceGraph, coloring: Coloring) -> bool:
    return find_conflict(G, coloring) is None


def _first_fit(G: InterferenceGraph, order) -> list[int]:
    color = [-1] * len(G)
    for v in order:
        used = {color[u] for u in G.adjacency[v]}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return color


def greedy_randomized_coloring(G: InterferenceGraph, runs: int, seed: int,
                               history: list[int] | None = None) -> Coloring:
    """Best first-fit coloring over ``runs`` random vertex orders.

    When ``history`` is given, the color count of every run is appended to it.
    """
    if runs < 1:
        raise ColoringError("runs must be at least 1")
    if len(G) == 0:
        return Coloring(())
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(runs):
        color = _first_fit(G, rng.permutation(len(G)))
        k = max(color) + 1
        if history is not None:
            history.append(k)
        if best is None or k < max(best) + 1:
            best = color
    return Coloring(tuple(best))


def _pick_dsatur(G, color, sat, uncolored):
    best_v, best_key = -1, None
    for v in uncolored:
        deg = sum(1 for u in G.adjacency[v] if color[u] < 0)
        key = (len(sat[v]), deg, -v)
        if best_key is None or key > best_key:
            best_v, best_key = v, key
    return best_v


def dsatur(G: InterferenceGraph) -> Coloring:
    """DSATUR: saturation, then uncolored degree, then lowest index."""
    n = len(G)
    color = [-1] * n
    sat: list[set[int]] = [set() for _ in range(n)]
    uncolored = set(range(n))
    while uncolored:
        v = _pick_dsatur(G, color, sat, uncolored)
        c = 0
        while c in sat[v]:
            c += 1
        color[v] = c
        uncolored.discard(v)
        for u in G.adjacency[v]:
            sat[u].add(c)
    return Coloring(tuple(color))


def _compact(color) -> Coloring:
    relabel: dict[int, int] = {}
    return Coloring(tuple(relabel.setdefault(int(c), len(relabel)) for c in color))


_BIG = 1 << 40


def tabucol(G: InterferenceGraph, k: int, seed: int = 0, max_iters: int = 200_000,
            deadline: float | None = None) -> Coloring | None:
    """Tabu search for a proper ``k``-coloring (Hertz and de Werra); ``None`` if not found."""
    n = len(G)
    if n == 0:
        return Coloring(())
    rng = np.random.default_rng(seed)
    adj = [np.fromiter(a, dtype=np.int64) for a in G.adjacency]
    color = rng.integers(0, k, size=n)
    # gamma[v, c]: neighbours of v holding color c
    gamma = np.zeros((n, k), dtype=np.int64)
    for v in range(n):
        np.add.at(gamma[v], color[adj[v]], 1)
    conflicts = int(sum(gamma[v, color[v]] for v in range(n))) // 2
    tabu = np.zeros((n, k), dtype=np.int64)
    best = conflicts
    for it in range(max_iters):
        if conflicts == 0:
            return _compact(color)
        if deadline is not None and it % 512 == 0 and time.monotonic() > deadline:
            return None
        own = gamma[np.arange(n), color]
        bad = np.nonzero(own > 0)[0]
        delta = gamma[bad] - own[bad, None]
        delta[np.arange(len(bad)), color[bad]] = _BIG
        allowed = (tabu[bad] <= it) | (conflicts + delta < best)
        delta = np.where(allowed, delta, _BIG)
        m = delta.min()
        if m == _BIG:
            continue
        rows, cols = np.nonzero(delta == m)
        pick = rng.integers(len(rows))
        v, c = int(bad[rows[pick]]), int(cols[pick])
        old = int(color[v])
        tabu[v, old] = it + int(0.6 * len(bad)) + int(rng.integers(10)) + 1
        color[v] = c
        gamma[adj[v], old] -= 1
        gamma[adj[v], c] += 1
        conflicts += int(m)
        best = min(best, conflicts)
    return None


def max_clique_heuristic(G: InterferenceGraph, passes: int = 3) -> tuple[int, ...]:
    """Greedy clique growth from every start vertex, followed by (1,2)-swap local search."""
    n = len(G)
    if n == 0:
        return ()
    adj = G.adjacency

    def grow(clique: list[int]) -> list[int]:
        cand = set(range(n)) if not clique else set.intersection(*(set(adj[v]) for v in clique))
        cand.difference_update(clique)
        while cand:
            v = max(cand, key=lambda u: (len(adj[u] & cand), -u))
            clique.append(v)
            cand &= adj[v]
        return clique

    best: list[int] = []
    order = sorted(range(n), key=lambda v: (-len(adj[v]), v))
    for start in order:
        if len(adj[start]) + 1 <= len(best):
            continue
        clique = grow([start])
        for _ in range(passes):
            improved = False
            for drop in list(clique):
                rest = [v for v in clique if v != drop]
                trial = grow(list(rest))
                if len(trial) > len(clique):
                    clique, improved = trial, True
                    break
            if not improved:
                break
        if len(clique) > len(best):
            best = clique
    return tuple(sorted(best))


def exact_coloring(G: InterferenceGraph, time_limit: float = 60.0) -> tuple[Coloring, OptimalityCertificate]:
    """Minimum coloring by DSATUR branch-and-bound seeded with a clique.

    The clique is both the lower bound and a symmetry breaker (its vertices
    are precolored ``0..|K|-1``).
    """
    if time_limit <= 0:
        raise ColoringError("time_limit must be positive")
    n = len(G)
    if n == 0:
        return Coloring(()), OptimalityCertificate((), Status.OPTIMAL)
    deadline = time.monotonic() + time_limit
    clique = max_clique_heuristic(G)
    best = dsatur(G)
    lb = len(clique)
    # tighten the DSATUR bound with tabu search before branching
    k = best.num_colors - 1
    while k >= lb and time.monotonic() < deadline:
        found = tabucol(G, k, seed=k, deadline=deadline)
        if found is None:
            break
        best = found
        k = best.num_colors - 1
    if best.num_colors == lb:
        return best, OptimalityCertificate(clique, Status.OPTIMAL)

    adj = [tuple(a) for a in G.adjacency]
    color = [-1] * n
    # sat_count[v][c]: number of neighbours of v holding color c
    sat_count = [dict() for _ in range(n)]
    uncolored = set(range(n))
    state = {"ub": best.num_colors, "best": list(best.color_of), "nodes": 0, "timeout": False}

    def assign(v, c):
        color[v] = c
        uncolored.discard(v)
        for u in adj[v]:
            d = sat_count[u]
            d[c] = d.get(c, 0) + 1

    def unassign(v, c):
        color[v] = -1
        uncolored.add(v)
        for u in adj[v]:
            d = sat_count[u]
            if d[c] == 1:
                del d[c]
            else:
                d[c] -= 1

    for k, v in enumerate(clique):
        assign(v, k)

    def pick():
        best_v, best_key = -1, None
        for v in uncolored:
            deg = 0
            for u in adj[v]:
                if color[u] < 0:
                    deg += 1
            key = (len(sat_count[v]), deg, -v)
            if best_key is None or key > best_key:
                best_v, best_key = v, key
        return best_v

    def search(used: int):
        state["nodes"] += 1
        if state["nodes"] % 256 == 0 and time.monotonic() > deadline:
            state["timeout"] = True
        if state["timeout"]:
            return
        if not uncolored:
            state["ub"] = used
            state["best"] = list(color)
            return
        v = pick()
        # only colorings with at most ub - 1 colors are worth finding
        for c in range(min(used + 1, state["ub"] - 1)):
            if c in sat_count[v]:
                continue
            assign(v, c)
            search(max(used, c + 1))
            unassign(v, c)
            if state["ub"] == lb or state["timeout"]:
                return

    search(lb)
    result = Coloring(tuple(state["best"]))
    if state["ub"] == lb:
        status = Status.OPTIMAL
    elif state["timeout"]:
        status = Status.TIMEOUT
    else:
        # search exhausted: the incumbent is optimal even though the clique bound is weaker
        status = Status.OPTIMAL
    return result, OptimalityCertificate(clique, status, state["nodes"])


def _cell_position(p: tuple[int, int], q: tuple[int, int]) -> int:
    """Position (0..5) of a heavy-hex edge among the first six edges of its claiming cell.

    Vertical honeycomb edges are the left side of exactly one cell and
    horizontal ones the top side of exactly one cell, so each heavy edge is
    claimed once; cells outside a finite patch are virtual.
    """
    (x1, y1), (x2, y2) = sorted([p, q])
    if x1 == x2:
        if x1 % 2:
            raise GraphError(f"({p}, {q}) is not a heavy-hex edge")
        return 0 if min(y1, y2) % 2 == 0 else 1
    if y1 != y2 or y1 % 2:
        raise GraphError(f"({p}, {q}) is not a heavy-hex edge")
    X = min(x1, x2)
    cell_row = y1 // 2 - 1
    offset = (X // 2 - cell_row % 2) % 2
    return 2 + 2 * offset + X % 2


def heavy_hex_analytic_coloring(H: HardwareGraph) -> Coloring:
    """Six-coloring that labels each edge by its slot among its cell's first six edges."""
    if H.family is not Family.HEAVY_HEX or H.coords is None:
        raise ColoringError("analytic coloring needs a generated heavy-hex graph")
    return Coloring(tuple(_cell_position(H.coords[i], H.coords[j]) for i, j in H.edges))


def schedule_experiments(H: HardwareGraph, coloring: Coloring) -> ExperimentSchedule:
    G = build_interference_graph(H)
    bad = find_conflict(G, coloring)
    if bad is not None:
        u, v = bad
        raise ColoringError(f"improper coloring: edges {G.nodes[u]} and {G.nodes[v]} share color "
                            f"{coloring.color_of[u]}")
    batches = []
    for members in coloring.classes():
        if not members:
            continue
        batches.append(tuple(
            CxrbSpec(G.nodes[k], tuple(sorted(arc_neighborhood(H, G.nodes[k])))) for k in members
        ))
    return ExperimentSchedule(tuple(batches))


def verify_schedule(H: HardwareGraph, schedule: ExperimentSchedule) -> list[str]:
    """Problems found in a schedule; empty when every invariant holds."""
    problems = []
    seen: dict[Edge, int] = {}
    for b, batch in enumerate(schedule.batches):
        used: set[int] = set()
        for spec in batch:
            e = (min(spec.cr_edge), max(spec.cr_edge))
            if e not in H.edges:
                problems.append(f"batch {b}: {e} is not a hardware edge")
                continue
            if e in seen:
                problems.append(f"edge {e} appears in batches {seen[e]} and {b}")
            seen[e] = b
            if set(spec.rb_qubits) != set(arc_neighborhood(H, e)):
                problems.append(f"batch {b}: rb_qubits of {e} differ from its spectators")
            fp = spec.footprint
            if used & fp:
                problems.append(f"batch {b}: footprint of {e} overlaps another experiment")
            used |= fp
    for e in H.edges:
        if e not in seen:
            problems.append(f"edge {e} is not scheduled")
    return problems
