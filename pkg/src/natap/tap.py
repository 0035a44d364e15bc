"""Token allocation problem: binary program, decoding, direct cost evaluation.

Variables, per layer ``t`` (0-based here):

* ``w[t, q, i]``  circuit qubit ``q`` sits on vertex ``i``;
* ``x[t, q, i, j]`` qubit ``q`` moves from ``i`` to ``j`` between ``t`` and ``t+1``;
* ``z[t, g, (i, j)]`` gate ``g`` of layer ``t`` runs on arc ``(i, j)``
  (first gate qubit on ``i``);
* ``y[t, q, k, g, (i, j)]`` = ``w[t, q, k] * z[t, g, (i, j)]`` for crosstalk
  triplets with a positive cost.

The objective is ``(1 - lam) * c_swap + lam * c_noise``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from .circuit import LayerSequence
from .hwgraph import HardwareGraph, all_pairs_distances, arc_neighborhood
from .ip import IpResult, IpStatus, Model
from .rbfit import NoiseModel


class TapError(ValueError):
    pass


class LinearizationMode(str, Enum):
    MCCORMICK = "mccormick"
    STRENGTHENED = "strengthened"


@dataclass(frozen=True)
class TapInstance:
    circuit_qubits: int
    layers: LayerSequence
    hardware: HardwareGraph
    distances: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.circuit_qubits > self.hardware.num_vertices:
            raise TapError(f"{self.circuit_qubits} circuit qubits do not fit on "
                           f"{self.hardware.num_vertices} hardware qubits")
        for t, layer in enumerate(self.layers.layers):
            used = [q for g in layer for q in g]
            if len(set(used)) != len(used):
                raise TapError(f"layer {t} has gates sharing a qubit")
            if any(not 0 <= q < self.circuit_qubits for q in used):
                raise TapError(f"layer {t} references a qubit outside the circuit")
        if self.distances is None:
            object.__setattr__(self, "distances", all_pairs_distances(self.hardware))

    @property
    def gate_layers(self) -> tuple:
        # a circuit without two-qubit gates still gets one (empty) layer
        return self.layers.layers or ((),)

    @property
    def num_layers(self) -> int:
        return len(self.gate_layers)


@dataclass
class VarMap:
    w: np.ndarray                       # (N, Q, V) -> var index
    x: dict = field(default_factory=dict)   # (t, q, i, j) -> var
    z: dict = field(default_factory=dict)   # (t, g, (i, j)) -> var
    y: dict = field(default_factory=dict)   # (t, q, k, g, (i, j)) -> var
    z_rows: int = 0
    num_vars: int = 0


@dataclass(frozen=True)
class AllocationSequence:
    layers: tuple[tuple[int, ...], ...]  # layers[t][q] = hardware vertex

    @property
    def occupied(self) -> frozenset:
        return frozenset(self.layers[0]) if self.layers else frozenset()

    def to_json(self) -> list:
        return [list(a) for a in self.layers]


@dataclass(frozen=True)
class CostBreakdown:
    c_swap: float
    c_noise: float
    qubit_term: float = 0.0
    arc_term: float = 0.0
    crosstalk_term: float = 0.0

    def objective(self, lam: float) -> float:
        return (1 - lam) * self.c_swap + lam * self.c_noise


def _xt_terms(H: HardwareGraph, noise: NoiseModel | None):
    """Positive crosstalk costs per arc: arc -> [(k, E)]."""
    out: dict = {}
    if noise is None:
        return out
    for (e, k), cost in noise.crosstalk_cost.items():
        if cost <= 0:
            continue
        i, j = e
        for arc in ((i, j), (j, i)):
            if H.has_arc(*arc) and k in arc_neighborhood(H, arc):
                out.setdefault(arc, []).append((k, cost))
    return out


def build_tap_model(inst: TapInstance, mode: LinearizationMode | str = LinearizationMode.STRENGTHENED,
                    noise: NoiseModel | None = None, lam: float = 0.0,
                    move_radius: int | None = None,
                    initial_layout: dict | None = None) -> tuple[Model, VarMap]:
    mode = LinearizationMode(mode)
    if not 0.0 <= lam <= 1.0:
        raise TapError(f"lambda must lie in [0, 1], got {lam}")
    if lam > 0 and noise is None:
        raise TapError("a noise model is required when lambda > 0")
    H, D = inst.hardware, inst.distances
    V, Q, N = H.num_vertices, inst.circuit_qubits, inst.num_layers
    layers = inst.gate_layers
    M = Model()
    use_noise = lam > 0 and noise is not None

    w = np.empty((N, Q, V), dtype=np.int64)
    for t in range(N):
        for q in range(Q):
            for i in range(V):
                cost = lam * noise.E_qubit(i) if use_noise else 0.0
                w[t, q, i] = M.add_var(cost, f"w_{t}_{q}_{i}")
    vm = VarMap(w)

    pairs = [(i, j) for i in range(V) for j in range(V)
             if move_radius is None or D[i, j] <= move_radius]
    for t in range(N - 1):
        for q in range(Q):
            for i, j in pairs:
                vm.x[t, q, i, j] = M.add_var((1 - lam) * float(D[i, j]), f"x_{t}_{q}_{i}_{j}")

    for t, layer in enumerate(layers):
        for g in range(len(layer)):
            for arc in H.arcs:
                cost = lam * noise.E_arc(*arc) if use_noise else 0.0
                vm.z[t, g, arc] = M.add_var(cost, f"z_{t}_{g}_{arc[0]}_{arc[1]}")

    out_of: dict = {}
    into: dict = {}
    for i, j in pairs:
        out_of.setdefault(i, []).append(j)
        into.setdefault(j, []).append(i)
    for t in range(N - 1):
        for q in range(Q):
            for i in range(V):
                cols = [w[t, q, i]] + [vm.x[t, q, i, j] for j in out_of.get(i, ())]
                M.add_constraint(cols, [1.0] + [-1.0] * (len(cols) - 1), "=", 0.0, f"flowout_{t}_{q}_{i}")
                cols = [w[t + 1, q, i]] + [vm.x[t, q, j, i] for j in into.get(i, ())]
                M.add_constraint(cols, [1.0] + [-1.0] * (len(cols) - 1), "=", 0.0, f"flowin_{t + 1}_{q}_{i}")
    for t in range(N):
        for q in range(Q):
            M.add_constraint(w[t, q, :], np.ones(V), "=", 1.0, f"assign_{t}_{q}")
        for i in range(V):
            M.add_constraint(w[t, :, i], np.ones(Q), "<=", 1.0, f"hold_{t}_{i}")
    for t, layer in enumerate(layers):
        for g, (p, q) in enumerate(layer):
            zs = [vm.z[t, g, a] for a in H.arcs]
            M.add_constraint(zs, np.ones(len(zs)), "=", 1.0, f"gate_{t}_{g}")
            before = M.num_rows
            if mode is LinearizationMode.MCCORMICK:
                for i, j in H.arcs:
                    zv = vm.z[t, g, (i, j)]
                    M.add_constraint([zv, w[t, p, i]], [1.0, -1.0], "<=", 0.0)
                    M.add_constraint([zv, w[t, q, j]], [1.0, -1.0], "<=", 0.0)
                    M.add_constraint([zv, w[t, p, i], w[t, q, j]], [1.0, -1.0, -1.0], ">=", -1.0)
            else:
                for i in range(V):
                    cols = [vm.z[t, g, (i, j)] for j in H.adjacency[i]] + [w[t, p, i]]
                    M.add_constraint(cols, [1.0] * (len(cols) - 1) + [-1.0], "=", 0.0, f"zout_{t}_{g}_{i}")
                for j in range(V):
                    cols = [vm.z[t, g, (i, j)] for i in H.adjacency[j]] + [w[t, q, j]]
                    M.add_constraint(cols, [1.0] * (len(cols) - 1) + [-1.0], "=", 0.0, f"zin_{t}_{g}_{j}")
            vm.z_rows += M.num_rows - before
    for t in range(1, N):
        for i in range(V):
            cols = list(w[t, :, i]) + list(w[0, :, i])
            M.add_constraint(cols, [1.0] * Q + [-1.0] * Q, "=", 0.0, f"subgraph_{t}_{i}")

    if use_noise:
        xt = _xt_terms(H, noise)
        for t, layer in enumerate(layers):
            for g in range(len(layer)):
                for arc, terms in sorted(xt.items()):
                    zv = vm.z[t, g, arc]
                    for k, cost in terms:
                        for q in range(Q):
                            yv = M.add_var(lam * cost, f"y_{t}_{q}_{k}_{g}_{arc[0]}_{arc[1]}")
                            vm.y[t, q, k, g, arc] = yv
                            wv = w[t, q, k]
                            M.add_constraint([yv, wv], [1.0, -1.0], "<=", 0.0)
                            M.add_constraint([yv, zv], [1.0, -1.0], "<=", 0.0)
                            M.add_constraint([yv, wv, zv], [1.0, -1.0, -1.0], ">=", -1.0)

    if initial_layout is not None:
        for q, i in initial_layout.items():
            M.add_constraint([w[0, q, i]], [1.0], "=", 1.0, f"layout_{q}")

    vm.num_vars = M.num_vars
    return M, vm


def _check_allocations(inst: TapInstance, layers: tuple) -> None:
    H, Q = inst.hardware, inst.circuit_qubits
    if len(layers) != inst.num_layers:
        raise TapError(f"expected {inst.num_layers} layers, got {len(layers)}")
    occupied = None
    for t, alloc in enumerate(layers):
        if len(alloc) != Q:
            raise TapError(f"layer {t} allocates {len(alloc)} of {Q} qubits")
        if len(set(alloc)) != Q:
            raise TapError(f"layer {t}: two circuit qubits share a hardware qubit")
        if occupied is None:
            occupied = set(alloc)
        elif set(alloc) != occupied:
            raise TapError(f"layer {t}: occupied hardware subgraph changed")
        for p, q in inst.gate_layers[t]:
            if not H.has_arc(alloc[p], alloc[q]):
                raise TapError(f"layer {t}: gate ({p},{q}) placed on non-arc "
                               f"({alloc[p]},{alloc[q]})")


def make_allocations(inst: TapInstance, layers) -> AllocationSequence:
    layers = tuple(tuple(int(v) for v in a) for a in layers)
    _check_allocations(inst, layers)
    return AllocationSequence(layers)


def extract_allocations(inst: TapInstance, vm: VarMap, solution: IpResult) -> AllocationSequence:
    if solution.status not in (IpStatus.OPTIMAL, IpStatus.FEASIBLE) or solution.incumbent is None:
        raise TapError(f"no solution to decode (status {solution.status.value})")
    xsol = np.asarray(solution.incumbent)
    W = xsol[vm.w]  # (N, Q, V)
    layers = []
    for t in range(W.shape[0]):
        row = []
        for q in range(W.shape[1]):
            hits = np.flatnonzero(W[t, q] > 0.5)
            if len(hits) != 1:
                raise TapError(f"qubit {q} in layer {t} is assigned to {len(hits)} vertices")
            row.append(int(hits[0]))
        layers.append(tuple(row))
    return make_allocations(inst, layers)


def evaluate_costs(allocs: AllocationSequence, inst: TapInstance,
                   noise: NoiseModel | None = None) -> CostBreakdown:
    """Swap and noise cost recomputed from the allocation alone."""
    D, H = inst.distances, inst.hardware
    L = allocs.layers
    c_swap = float(sum(D[a, b] for t in range(len(L) - 1) for a, b in zip(L[t], L[t + 1])))
    if noise is None:
        return CostBreakdown(c_swap, 0.0)
    xt = _xt_terms(H, noise)
    qubit_term = arc_term = xt_term = 0.0
    for t, alloc in enumerate(L):
        occ = set(alloc)
        qubit_term += sum(noise.E_qubit(i) for i in alloc)
        for p, q in inst.gate_layers[t]:
            arc = (alloc[p], alloc[q])
            arc_term += noise.E_arc(*arc)
            xt_term += sum(cost for k, cost in xt.get(arc, ()) if k in occ)
    return CostBreakdown(c_swap, qubit_term + arc_term + xt_term, qubit_term, arc_term, xt_term)


def encode_allocations(inst: TapInstance, vm: VarMap, allocs: AllocationSequence) -> np.ndarray:
    """Binary model point matching ``allocs`` (raises if a move exceeds the move radius)."""
    xsol = np.zeros(vm.num_vars)
    L = allocs.layers
    for t, alloc in enumerate(L):
        for q, i in enumerate(alloc):
            xsol[vm.w[t, q, i]] = 1
        for g, (p, q) in enumerate(inst.gate_layers[t]):
            xsol[vm.z[t, g, (alloc[p], alloc[q])]] = 1
    for t in range(len(L) - 1):
        for q, (i, j) in enumerate(zip(L[t], L[t + 1])):
            key = (t, q, i, j)
            if key not in vm.x:
                raise TapError(f"move {i}->{j} of qubit {q} exceeds the move radius")
            xsol[vm.x[key]] = 1
    for (t, q, k, g, arc), yv in vm.y.items():
        p, r = inst.gate_layers[t][g]
        if L[t][q] == k and (L[t][p], L[t][r]) == arc:
            xsol[yv] = 1
    return xsol


# -- primal heuristic -------------------------------------------------------

def _place(qubits, gates, candidates, H, unit_cost, gate_cost, node_limit):
    """Cheapest injective placement of ``qubits`` on ``candidates`` with every gate on an arc.

    ``unit_cost(q, v)`` and ``gate_cost(p, q, i, j)`` are additive; qubits
    without gates are matched optimally at the leaves. Returns
    ``(cost, {q: v})`` or ``None``.
    """
    cand = sorted(candidates)
    partners: dict = {q: [] for q in qubits}
    for p, q in gates:
        partners[p].append(q)
        partners[q].append(p)
    gated = [q for q in qubits if partners[q]]
    free = [q for q in qubits if not partners[q]]
    # order: BFS over the interaction graph, highest degree first inside a component
    order, seen = [], set()
    for root in sorted(gated, key=lambda q: (-len(partners[q]), q)):
        if root in seen:
            continue
        queue = [root]
        seen.add(root)
        while queue:
            u = queue.pop(0)
            order.append(u)
            for v in sorted(partners[u], key=lambda q: (-len(partners[q]), q)):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    min_unit = {q: min(unit_cost(q, v) for v in cand) for q in qubits}
    cand_set = set(cand)
    best = [math.inf, None]
    nodes = [0]
    placed: dict = {}
    used: set = set()

    def finish(cost):
        rest = [v for v in cand if v not in used]
        if free:
            if len(rest) < len(free):
                return
            C = np.array([[unit_cost(q, v) for v in rest] for q in free])
            r, c = linear_sum_assignment(C)
            cost += float(C[r, c].sum())
            if cost < best[0] - 1e-12:
                sol = dict(placed)
                for a, b in zip(r, c):
                    sol[free[a]] = rest[b]
                best[0], best[1] = cost, sol
        elif cost < best[0] - 1e-12:
            best[0], best[1] = cost, dict(placed)

    def rec(k, cost):
        nodes[0] += 1
        if nodes[0] > node_limit:
            return
        if k == len(order):
            finish(cost)
            return
        q = order[k]
        lb = cost + sum(min_unit[u] for u in order[k:]) + sum(min_unit[u] for u in free)
        if lb >= best[0] - 1e-12:
            return
        placed_partners = [p for p in partners[q] if p in placed]
        if placed_partners:
            pool = set(H.adjacency[placed[placed_partners[0]]]) & cand_set
            for p in placed_partners[1:]:
                pool &= set(H.adjacency[placed[p]])
        else:
            pool = cand_set
        options = []
        for v in pool:
            if v in used:
                continue
            c = unit_cost(q, v)
            for p in placed_partners:
                c += gate_cost(p, q, placed[p], v) if (p, q) in gates else gate_cost(q, p, v, placed[p])
            options.append((c, v))
        options.sort()
        for c, v in options:
            placed[q] = v
            used.add(v)
            rec(k + 1, cost + c)
            used.discard(v)
            del placed[q]

    gates = set(gates)
    rec(0, 0.0)
    if best[1] is None:
        return None
    return best[0], best[1]


EXACT_SET_QUBITS = 6  # up to this many circuit qubits a fixed occupied set is solved exactly


class TapHeuristic:
    """LP-guided construction of feasible allocation sequences.

    Candidate occupied sets are grown from every vertex (scored by LP
    occupancy, compactness and noise) and then improved by exchanging one
    vertex at a time. For a fixed set the sequence is optimal for small
    circuits (dynamic programming over layer placements); otherwise it comes
    from per-layer placements refined by forward/backward sweeps, or from one
    static placement when the whole circuit embeds without movement.
    """

    def __init__(self, inst: TapInstance, vm: VarMap, noise: NoiseModel | None, lam: float,
                 move_radius: int | None = None, initial_layout: dict | None = None,
                 node_limit: int = 20000, static_node_limit: int = 200000,
                 time_budget: float = 10.0, call_budget: float = 1.0):
        self.inst, self.vm, self.noise, self.lam = inst, vm, noise, lam
        self.move_radius = move_radius
        self.initial_layout = initial_layout
        self.node_limit = node_limit
        self.static_node_limit = static_node_limit
        self.time_budget = time_budget      # first call: full search
        self.call_budget = call_budget      # later calls: LP-guided only
        self.xt = _xt_terms(inst.hardware, noise) if lam > 0 else {}
        self._cache: dict = {}
        self._searched = False
        self.best: tuple[float, AllocationSequence] | None = None
        H = inst.hardware
        if lam > 0:
            bad = np.array([noise.E_qubit(v) for v in H.vertices], dtype=float)
            for (i, j), c in noise.arc_cost.items():
                bad[i] += c / 2
                bad[j] += c / 2
            for ((i, j), k), c in noise.crosstalk_cost.items():
                bad[[i, j, k]] += c / 3
            self._vertex_noise = bad
        else:
            self._vertex_noise = np.zeros(H.num_vertices)

    def objective(self, allocs: AllocationSequence) -> float:
        return evaluate_costs(allocs, self.inst, self.noise if self.lam > 0 else None).objective(self.lam)

    def _gate_cost(self, occupied):
        noise, lam = self.noise, self.lam

        def cost(p, q, i, j):
            if lam == 0:
                return 0.0
            c = noise.E_arc(i, j)
            c += sum(e for k, e in self.xt.get((i, j), ()) if k in occupied)
            return lam * c
        return cost

    def _allowed(self, q, v, t):
        if self.initial_layout is not None and t == 0 and q in self.initial_layout:
            return self.initial_layout[q] == v
        return True

    def static(self, S=None, pessimistic: bool = False) -> AllocationSequence | None:
        """One placement for every layer (no movement), restricted to ``S`` if given.

        Without ``S`` the occupied set is unknown: crosstalk is either
        ignored or, with ``pessimistic``, charged for every spectator.
        """
        inst, lam, noise = self.inst, self.lam, self.noise
        H, N = inst.hardware, inst.num_layers
        counts: dict = {}
        for layer in inst.gate_layers:
            for p, q in layer:
                counts[(p, q)] = counts.get((p, q), 0) + 1
        # the same pair may occur in several layers and in either order; place it once
        uniq, seen = [], set()
        for p, q in sorted(counts):
            if (q, p) not in seen:
                seen.add((p, q))
                uniq.append((p, q))
        if S is not None:
            occupied = set(S)
        else:
            occupied = set(H.vertices) if pessimistic else set()
        gc = self._gate_cost(occupied)

        def unit(q, v):
            if not all(self._allowed(q, v, t) for t in range(N)):
                return 1e9
            return lam * noise.E_qubit(v) * N if lam > 0 else 0.0

        def gate(p, q, i, j):
            return counts.get((p, q), 0) * gc(p, q, i, j) + counts.get((q, p), 0) * gc(q, p, j, i)

        cand = range(H.num_vertices) if S is None else S
        res = _place(list(range(inst.circuit_qubits)), uniq, cand, H, unit, gate, self.static_node_limit)
        if res is None or res[0] >= 1e8:
            return None
        alloc = tuple(res[1][q] for q in range(inst.circuit_qubits))
        return AllocationSequence(tuple(alloc for _ in range(N)))

    def _occupancy(self, lp_point):
        if lp_point is None:
            return None, None
        W = lp_point[self.vm.w]  # (N, Q, V)
        return W.sum(axis=(0, 1)), W

    def _grow(self, seed_vertex, score):
        """Connected set of circuit-qubit size, greedily adding the best-linked frontier vertex."""
        H, Q = self.inst.hardware, self.inst.circuit_qubits
        S = {seed_vertex}
        while len(S) < Q:
            frontier = {v for u in S for v in H.adjacency[u]} - S
            if not frontier:
                return None
            S.add(max(frontier, key=lambda v: (sum(u in S for u in H.adjacency[v]), score[v], -v)))
        return S

    def sequence(self, S, W) -> AllocationSequence | None:
        inst, lam = self.inst, self.lam
        H, D, N, Q = inst.hardware, inst.distances, inst.num_layers, inst.circuit_qubits
        gate_cost = self._gate_cost(S)
        radius = self.move_radius
        layers: list = [None] * N

        def solve_layer(t, prev, nxt):
            def unit(q, v):
                if not self._allowed(q, v, t):
                    return 1e9
                c = lam * self.noise.E_qubit(v) if lam > 0 else 0.0
                for nb in (prev, nxt):
                    if nb is not None:
                        d = D[nb[q], v]
                        if radius is not None and d > radius:
                            return 1e9
                        c += (1 - lam) * d
                if prev is None and nxt is None and W is not None:
                    c -= 1e-3 * W[t, q, v]
                return c
            res = _place(list(range(Q)), list(inst.gate_layers[t]), S, H, unit, gate_cost, self.node_limit)
            if res is None or res[0] >= 1e8:
                return None
            return tuple(res[1][q] for q in range(Q))

        for t in range(N):
            layers[t] = solve_layer(t, layers[t - 1] if t else None, None)
            if layers[t] is None:
                return None
        current = self.objective(AllocationSequence(tuple(layers)))
        for _ in range(3):
            changed = False
            for t in list(range(N - 2, -1, -1)) + list(range(1, N)):
                prev = layers[t - 1] if t > 0 else None
                nxt = layers[t + 1] if t + 1 < N else None
                cand = solve_layer(t, prev, nxt)
                if cand is not None and cand != layers[t]:
                    trial = layers[:t] + [cand] + layers[t + 1:]
                    val = self.objective(AllocationSequence(tuple(trial)))
                    if val < current - 1e-12:
                        layers, current = trial, val
                        changed = True
            if not changed:
                break
        return AllocationSequence(tuple(layers))

    def exact_sequence(self, S) -> AllocationSequence | None:
        """Optimal sequence for a fixed occupied set: DP over every valid placement of each layer."""
        inst, lam = self.inst, self.lam
        H, D, Q = inst.hardware, inst.distances, inst.circuit_qubits
        S = sorted(S)
        gc = self._gate_cost(set(S))
        base = lam * sum(self.noise.E_qubit(v) for v in S) if lam > 0 else 0.0
        opts, costs = [], []
        for t, layer in enumerate(inst.gate_layers):
            A, c = [], []
            for perm in itertools.permutations(S):
                if all(H.has_arc(perm[p], perm[q]) for p, q in layer) and \
                        all(self._allowed(q, perm[q], t) for q in range(Q)):
                    A.append(perm)
                    c.append(base + sum(gc(p, q, perm[p], perm[q]) for p, q in layer))
            if not A:
                return None
            opts.append(np.array(A))
            costs.append(np.array(c))
        cost, back = costs[0], []
        for t in range(1, len(opts)):
            dist = D[opts[t - 1][:, None, :], opts[t][None, :, :]]
            total = cost[:, None] + (1 - lam) * dist.sum(axis=2)
            if self.move_radius is not None:
                total[(dist > self.move_radius).any(axis=2)] = math.inf
            arg = total.argmin(axis=0)
            back.append(arg)
            cost = total[arg, np.arange(len(opts[t]))] + costs[t]
        k = int(np.argmin(cost))
        if not math.isfinite(cost[k]):
            return None
        seq = [k]
        for arg in reversed(back):
            seq.append(int(arg[seq[-1]]))
        seq.reverse()
        return AllocationSequence(tuple(tuple(int(v) for v in opts[t][j]) for t, j in enumerate(seq)))

    def _valid(self, allocs) -> bool:
        if allocs is None:
            return False
        try:
            _check_allocations(self.inst, allocs.layers)
        except TapError:
            return False
        if self.move_radius is not None:
            D, L = self.inst.distances, allocs.layers
            if any(D[a, b] > self.move_radius for t in range(len(L) - 1) for a, b in zip(L[t], L[t + 1])):
                return False
        return True

    def _offer(self, allocs) -> float:
        if not self._valid(allocs):
            return math.inf
        val = self.objective(allocs)
        if self.best is None or val < self.best[0] - 1e-12:
            self.best = (val, allocs)
        return val

    def evaluate_set(self, S, W=None) -> float:
        """Best objective found for occupied set ``S`` (cached per set)."""
        key = frozenset(S)
        if key in self._cache:
            return self._cache[key]
        if self.initial_layout is not None and not set(self.initial_layout.values()) <= key:
            self._cache[key] = math.inf
            return math.inf
        if self.inst.circuit_qubits <= EXACT_SET_QUBITS:
            val = self._offer(self.exact_sequence(key))
        else:
            val = min(self._offer(self.sequence(set(S), W)), self._offer(self.static(key)))
        self._cache[key] = val
        return val

    def _connected(self, S) -> bool:
        H = self.inst.hardware
        S = set(S)
        start = next(iter(S))
        seen, stack = {start}, [start]
        while stack:
            u = stack.pop()
            for v in H.adjacency[u]:
                if v in S and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(S)

    def local_search(self, S, deadline, W=None):
        """First-improvement vertex exchange keeping the set connected."""
        H = self.inst.hardware
        S = set(S)
        val = self.evaluate_set(S, W)
        improved = True
        while improved and time.perf_counter() < deadline:
            improved = False
            frontier = sorted({v for u in S for v in H.adjacency[u]} - S)
            for u in sorted(S, key=lambda v: -self._vertex_noise[v]):
                for v in frontier:
                    if time.perf_counter() >= deadline:
                        return S, val
                    T = (S - {u}) | {v}
                    if not self._connected(T):
                        continue
                    tv = self.evaluate_set(T, W)
                    if tv < val - 1e-12:
                        S, val, improved = T, tv, True
                        break
                if improved:
                    break
        return S, val

    def isometric_images(self, S, limit: int = 500):
        """Maps of ``S`` into the hardware preserving every pairwise distance (identity excluded).

        A sequence moved through such a map keeps its gates on arcs and its
        swap cost; only the noise changes.
        """
        H, D = self.inst.hardware, self.inst.distances
        S = sorted(S)
        inside = set(S)
        # BFS order so each vertex after the first has an already-mapped neighbour
        order, seen = [S[0]], {S[0]}
        for u in order:
            for v in sorted(H.adjacency[u]):
                if v in inside and v not in seen:
                    seen.add(v)
                    order.append(v)
        if len(order) < len(S):
            return []  # disconnected sets are not relocated
        anchor = {u: next(w for w in order[:k] if w in H.adjacency[u]) for k, u in enumerate(order) if k}
        out, phi, used = [], {}, set()

        def rec(k):
            if len(out) >= limit:
                return
            if k == len(order):
                if any(phi[u] != u for u in order):
                    out.append(dict(phi))
                return
            u = order[k]
            pool = H.vertices if k == 0 else sorted(H.adjacency[phi[anchor[u]]])
            for v in pool:
                if v in used or any(D[v, phi[w]] != D[u, w] for w in order[:k]):
                    continue
                phi[u] = v
                used.add(v)
                rec(k + 1)
                used.discard(v)
                del phi[u]

        rec(0)
        return out

    def polish(self, allocs, deadline) -> None:
        """Offer every distance-preserving relocation of ``allocs``."""
        if allocs is None or self.lam == 0 or self.initial_layout is not None:
            return
        for phi in self.isometric_images(allocs.occupied):
            if time.perf_counter() >= deadline:
                return
            self._offer(AllocationSequence(tuple(tuple(phi[v] for v in a) for a in allocs.layers)))

    def run(self, lp_point=None, seed: int = 0, seeds: int = 3) -> AllocationSequence | None:
        t0 = time.perf_counter()
        H, Q = self.inst.hardware, self.inst.circuit_qubits
        occ, W = self._occupancy(lp_point)
        rng = np.random.default_rng(seed)
        jitter = 1e-6 * rng.random(H.num_vertices)
        if self.initial_layout is not None and len(self.initial_layout) == Q:
            self.evaluate_set(set(self.initial_layout.values()), W)
            return self.best[1] if self.best else None
        if occ is not None:
            score = occ + jitter
            for s in np.argsort(-score, kind="stable")[:seeds]:
                S = self._grow(int(s), score)
                if S is not None:
                    self.evaluate_set(S, W)
        if not self._searched:
            self._searched = True
            self._offer(self.static())
            if self.lam > 0:
                self._offer(self.static(pessimistic=True))
            deadline = t0 + self.time_budget
            score = -self._vertex_noise + jitter
            results = []
            for s in H.vertices:
                S = self._grow(s, score)
                if S is not None:
                    results.append((self.evaluate_set(S), sorted(S)))
                if time.perf_counter() >= deadline:
                    break
            base = None
            if self.lam > 0 and time.perf_counter() < deadline:
                # swap-only solutions are often near-optimal under the weighted objective too
                shadow = TapHeuristic(self.inst, self.vm, None, 0.0, self.move_radius, self.initial_layout,
                                      self.node_limit, self.static_node_limit,
                                      time_budget=max(0.0, deadline - time.perf_counter()) / 3)
                base = shadow.run(None, seed)
                if base is not None:
                    self._offer(base)
                    results.append((self.evaluate_set(base.occupied), sorted(base.occupied)))
            if self.best is not None:
                results.append((self.best[0], sorted(self.best[1].occupied)))
            results.sort()
            search_end = t0 + 0.8 * self.time_budget  # the rest is for relocation
            for _, S in results[:3]:
                if time.perf_counter() >= search_end:
                    break
                self.local_search(S, search_end)
            for allocs in (base if self.lam > 0 else None, self.best[1] if self.best else None):
                self.polish(allocs, max(deadline, time.perf_counter() + 1.0))
        elif self.best is not None and occ is not None:
            self.local_search(self.best[1].occupied, t0 + self.call_budget, W)
            self.polish(self.best[1], t0 + 2 * self.call_budget)
        return self.best[1] if self.best else None

    def __call__(self, lp_point, seed):
        allocs = self.run(lp_point, seed)
        if allocs is None:
            return None
        try:
            return encode_allocations(self.inst, self.vm, allocs)
        except TapError:
            return None
