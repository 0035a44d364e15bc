"""Allocation-then-swap routing pipeline, baselines and QAOA depth mirroring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import (Circuit, Gate, LayerSequence, cx_count, depth, group_layers, h, insert_dd,
                      lower_to_native, rx, rzz, swap, validate_routed)
from .hwgraph import HardwareGraph, all_pairs_distances, arc_neighborhood
from .ip import BnbParams, IpStatus, solve_bnb
from .qaoa import QaoaParams
from .rbfit import NoiseModel
from .tap import (AllocationSequence, LinearizationMode, TapHeuristic, TapInstance, build_tap_model,
                  evaluate_costs, extract_allocations)
from .tswap import TokenConfig, approx_token_swapping


class RoutingError(RuntimeError):
    pass


@dataclass
class RouterConfig:
    lam: float = 0.5
    mode: LinearizationMode = LinearizationMode.STRENGTHENED
    time_limit: float = 900.0
    dd_pulses: int = 0
    seed: int = 0
    engine: str = "auto"
    move_radius: int | None = None
    initial_layout: dict | None = None
    heuristic_every: int = 25
    gap_tol: float = 1e-6

    def __post_init__(self):
        self.mode = LinearizationMode(self.mode)
        if not 0.0 <= self.lam <= 1.0:
            raise RoutingError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.dd_pulses < 0 or self.dd_pulses % 2:
            raise RoutingError("dd_pulses must be an even, non-negative count")


@dataclass
class RoutingResult:
    routed: Circuit
    initial_layout: dict
    final_layout: dict
    swap_count: int
    cx_count: int
    depth: int
    c_swap: float
    c_noise: float
    c_noise_total: float
    solver_stats: dict
    allocations: list = field(default_factory=list)  # per layer, circuit qubit -> vertex
    swaps: list = field(default_factory=list)        # per layer transition
    method: str = ""
    repetitions: int = 1

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "swap_count": self.swap_count,
            "cx_count": self.cx_count,
            "depth": self.depth,
            "c_swap": self.c_swap,
            "c_noise": self.c_noise,
            "c_noise_total": self.c_noise_total,
            "repetitions": self.repetitions,
            "initial_layout": {str(k): v for k, v in sorted(self.initial_layout.items())},
            "final_layout": {str(k): v for k, v in sorted(self.final_layout.items())},
            "allocations": [list(a) for a in self.allocations],
            "swaps": [[list(s) for s in layer] for layer in self.swaps],
            "solver_stats": self.solver_stats,
        }


def _swap_noise(swaps, occupied: set, noise: NoiseModel | None, H: HardwareGraph) -> float:
    """Three CX per swap, each paying the arc cost and crosstalk on occupied spectators."""
    if noise is None:
        return 0.0
    total = 0.0
    for u, v in swaps:
        xt = sum(noise.E_crosstalk(u, v, k) for k in arc_neighborhood(H, (u, v)) if k in occupied)
        total += 3 * (noise.E_arc(u, v) + xt)
    return total


def stitch(circuit: Circuit, H: HardwareGraph, allocs: AllocationSequence, swapper=approx_token_swapping,
           layers: LayerSequence | None = None):
    """Place the circuit on hardware qubits following ``allocs``; swaps go between layers.

    Every single-qubit gate is emitted just before the next two-qubit layer
    of its qubit, at that layer's position; trailing ones follow the final
    allocation. ``layers`` overrides the default grouping (it must describe
    the same circuit).
    """
    seq = layers if layers is not None else group_layers(circuit)
    N = len(allocs.layers)
    pending: dict = {q: [] for q in range(circuit.num_qubits)}
    before: list = [[] for _ in range(N)]
    layer_gates: list = [[] for _ in range(N)]
    for g, t in zip(circuit.gates, seq.gate_layer):
        if t < 0:
            pending[g.qubits[0]].append(g)
        else:
            for q in g.qubits:
                before[t] += pending[q]
                pending[q] = []
            layer_gates[t].append(g)
    trailing = [g for q in range(circuit.num_qubits) for g in pending[q]]
    # trailing gates keep their original relative order
    order = {id(g): k for k, g in enumerate(circuit.gates)}
    trailing.sort(key=lambda g: order[id(g)])

    dist = None
    out: list[Gate] = []
    swaps_per_step = []

    def mapped(g: Gate, alloc) -> Gate:
        return Gate(g.kind, tuple(alloc[q] for q in g.qubits), g.angle)

    for t in range(N):
        alloc = allocs.layers[t]
        before[t].sort(key=lambda g: order[id(g)])
        out += [mapped(g, alloc) for g in before[t]]
        out += [mapped(g, alloc) for g in layer_gates[t]]
        if t + 1 < N:
            nxt = allocs.layers[t + 1]
            start = TokenConfig({q: v for q, v in enumerate(alloc)}, H)
            target = TokenConfig({q: v for q, v in enumerate(nxt)}, H)
            if dist is None:
                dist = all_pairs_distances(H)
            sw = swapper(H, start, target, dist) if swapper is approx_token_swapping else swapper(H, start, target)
            swaps_per_step.append(list(sw))
            out += [swap(u, v) for u, v in sw]
    final = allocs.layers[-1]
    out += [mapped(g, final) for g in trailing]
    return Circuit(H.num_vertices, tuple(out), dict(circuit.metadata)), swaps_per_step


def _with_lead_in(seq: LayerSequence) -> LayerSequence:
    """Prepend an empty layer, so a fixed start placement can be routed away from before any gate."""
    return LayerSequence(((),) + tuple(seq.layers), tuple(t + 1 if t >= 0 else t for t in seq.gate_layer))


def _finish(circuit_routed: Circuit, H, allocs, swaps, inst, noise, stats, method, dd_pulses,
            lead_in: bool = False) -> RoutingResult:
    if dd_pulses:
        circuit_routed = insert_dd(circuit_routed, dd_pulses)
    report = validate_routed(circuit_routed, H)
    if not report.compliant:
        raise RoutingError(f"routed circuit violates hardware connectivity: {report.violations[:3]}")
    costs = evaluate_costs(allocs, inst, noise)
    c_noise = costs.c_noise
    if lead_in and noise is not None:
        # the lead-in layer holds no gates; it is a placement, not an executed step
        c_noise -= sum(noise.E_qubit(v) for v in allocs.layers[0])
    occupied = set(allocs.occupied)
    swap_noise = sum(_swap_noise(s, occupied, noise, H) for s in swaps)
    stats = dict(stats, swap_noise=swap_noise)
    native = lower_to_native(circuit_routed)
    init = {q: v for q, v in enumerate(allocs.layers[0])}
    final = {q: v for q, v in enumerate(allocs.layers[-1])}
    return RoutingResult(
        routed=circuit_routed,
        initial_layout=init,
        final_layout=final,
        swap_count=sum(len(s) for s in swaps),
        cx_count=sum(1 for g in native.gates if g.kind == "cx"),
        depth=depth(native),
        c_swap=costs.c_swap,
        c_noise=c_noise,
        c_noise_total=c_noise,
        solver_stats=stats,
        allocations=[list(a) for a in allocs.layers],
        swaps=swaps,
        method=method,
    )


def route(circuit: Circuit, H: HardwareGraph, noise: NoiseModel | None = None,
          cfg: RouterConfig | None = None, method: str = "") -> RoutingResult:
    cfg = cfg or RouterConfig()
    if circuit.num_qubits > H.num_vertices:
        raise RoutingError(f"circuit has {circuit.num_qubits} qubits, hardware only {H.num_vertices}")
    if cfg.lam > 0 and noise is None:
        raise RoutingError("lambda > 0 needs a noise model")
    layers = group_layers(circuit)
    lead_in = cfg.initial_layout is not None
    if lead_in:
        layers = _with_lead_in(layers)
    inst = TapInstance(circuit.num_qubits, layers, H)
    model_noise = noise if cfg.lam > 0 else None
    M, vm = build_tap_model(inst, cfg.mode, model_noise, cfg.lam, cfg.move_radius, cfg.initial_layout)
    heur = TapHeuristic(inst, vm, model_noise, cfg.lam, cfg.move_radius, cfg.initial_layout)
    params = BnbParams(time_limit=cfg.time_limit, gap_tol=cfg.gap_tol, seed=cfg.seed, engine=cfg.engine,
                       heuristic=heur, heuristic_every=cfg.heuristic_every)
    res = solve_bnb(M, params)
    if res.status is IpStatus.INFEASIBLE:
        raise RoutingError("allocation model is infeasible; this indicates an internal error "
                           "(is the hardware graph connected?)")
    if res.status is IpStatus.TIMEOUT:
        raise RoutingError("no allocation found within the time limit; raise --time-limit")
    allocs = extract_allocations(inst, vm, res)
    stats = res.summary()
    stats.update(num_vars=M.num_vars, num_rows=M.num_rows, mode=cfg.mode.value, lam=cfg.lam)
    routed, swaps = stitch(circuit, H, allocs, layers=layers)
    return _finish(routed, H, allocs, swaps, inst, noise, stats,
                   method or ("natap" if cfg.lam > 0 else "tap"), cfg.dd_pulses, lead_in)


# -- best line baseline -------------------------------------------------------

def best_line_layout(H: HardwareGraph, noise: NoiseModel, length: int) -> list[int]:
    """Simple path of ``length`` vertices minimizing the product of CX errors.

    Depth-first enumeration in lexicographic order, so on ties the
    lexicographically smallest vertex sequence wins.
    """
    if length < 1:
        raise RoutingError("line length must be positive")
    errs = {e: noise.E_arc(*e) for e in H.edges}
    if length == 1:
        return [0]
    min_err = min(errs.values(), default=0.0)
    best = [math.inf, None]
    path: list[int] = []
    on_path = [False] * H.num_vertices

    def rec(prod):
        if len(path) == length:
            if prod < best[0]:
                best[0], best[1] = prod, list(path)
            return
        remaining = length - len(path)
        if prod * min_err ** remaining >= best[0]:
            return
        u = path[-1]
        for v in H.adjacency[u]:
            if not on_path[v]:
                on_path[v] = True
                path.append(v)
                rec(prod * errs[(min(u, v), max(u, v))])
                path.pop()
                on_path[v] = False

    for s in H.vertices:
        path.append(s)
        on_path[s] = True
        rec(1.0)
        path.pop()
        on_path[s] = False
    if best[1] is None:
        raise RoutingError(f"hardware graph has no simple path with {length} vertices")
    return best[1]


def route_best_line(circuit: Circuit, H: HardwareGraph, noise: NoiseModel,
                    cfg: RouterConfig | None = None) -> RoutingResult:
    """Layout on the best line, then swap-minimal routing from that fixed layout."""
    cfg = cfg or RouterConfig()
    path = best_line_layout(H, noise, circuit.num_qubits)
    fixed = RouterConfig(lam=0.0, mode=cfg.mode, time_limit=cfg.time_limit, dd_pulses=cfg.dd_pulses,
                         seed=cfg.seed, engine=cfg.engine, move_radius=cfg.move_radius,
                         initial_layout={q: v for q, v in enumerate(path)},
                         heuristic_every=cfg.heuristic_every, gap_tol=cfg.gap_tol)
    res = route(circuit, H, noise, fixed, method="bestline")
    res.solver_stats["line"] = path
    return res


# -- QAOA depth mirroring -----------------------------------------------------

def mirror_for_depth(routed_p1: RoutingResult, p: int, params: QaoaParams,
                     dd_pulses: int = 0) -> Circuit:
    """Depth-``p`` QAOA from a routed depth-1 circuit.

    The two-qubit core (rzz and swap gates) runs forward on odd
    repetitions and reversed on even ones; reversing the swaps walks the
    qubits back, so the rzz gates always meet on adjacent vertices. Each
    repetition is followed by its mixer on the qubits' current positions.
    """
    if p < 1:
        raise RoutingError(f"depth must be at least 1, got {p}")
    if params.p != p:
        raise RoutingError("parameter depth does not match p")
    src = routed_p1.routed
    if p == 1:
        out = []
        for g in src.gates:
            if g.kind == "rzz":
                g = rzz(*g.qubits, 2 * params.gammas[0])
            elif g.kind == "rx":
                g = rx(g.qubits[0], 2 * params.betas[0])
            out.append(g)
        return Circuit(src.num_qubits, tuple(out), dict(src.metadata))
    gates = [g for g in src.gates if g.kind != "x"]  # drop DD pulses
    core = [g for g in gates if g.kind in ("rzz", "swap")]
    tail = [g for g in gates if g.kind == "measure"]
    init, final = routed_p1.initial_layout, routed_p1.final_layout
    out = [h(init[q]) for q in sorted(init)]
    for k in range(p):
        gamma, beta = params.gammas[k], params.betas[k]
        seq = core if k % 2 == 0 else core[::-1]
        for g in seq:
            out.append(rzz(*g.qubits, 2 * gamma) if g.kind == "rzz" else g)
        where = final if k % 2 == 0 else init
        out += [rx(where[q], 2 * beta) for q in sorted(where)]
    layout = final if p % 2 else init
    remap = {final[q]: layout[q] for q in final}
    out += [Gate("measure", (remap[g.qubits[0]],)) for g in tail]
    meta = dict(src.metadata)
    meta.update(p=p, final_layout={str(q): v for q, v in sorted(layout.items())})
    circ = Circuit(src.num_qubits, tuple(out), meta)
    return insert_dd(circ, dd_pulses) if dd_pulses else circ


def mirrored_result(routed_p1: RoutingResult, p: int, params: QaoaParams,
                    dd_pulses: int = 0) -> RoutingResult:
    circ = mirror_for_depth(routed_p1, p, params, dd_pulses)
    native = lower_to_native(circ)
    final = routed_p1.final_layout if p % 2 else routed_p1.initial_layout
    return RoutingResult(
        routed=circ,
        initial_layout=dict(routed_p1.initial_layout),
        final_layout=dict(final),
        swap_count=p * routed_p1.swap_count,
        cx_count=cx_count(native),
        depth=depth(native),
        c_swap=p * routed_p1.c_swap,
        c_noise=p * routed_p1.c_noise,
        c_noise_total=p * routed_p1.c_noise_total,
        solver_stats=dict(routed_p1.solver_stats),
        allocations=routed_p1.allocations,
        swaps=routed_p1.swaps,
        method=routed_p1.method,
        repetitions=p,
    )


def undo_layout(psi_hw: np.ndarray, num_hw: int, layout: dict, num_logical: int) -> np.ndarray:
    """Logical statevector from a hardware statevector, assuming unused qubits are in ``|0>``."""
    idx = np.arange(2 ** num_logical)
    hw_index = np.zeros_like(idx)
    for q in range(num_logical):
        hw_index |= ((idx >> q) & 1) << layout[q]
    return psi_hw[hw_index]


def compact(circuit: Circuit) -> tuple[Circuit, list[int]]:
    """Restrict a hardware circuit to the qubits it touches (relabelled in ascending order)."""
    used = sorted({q for g in circuit.gates for q in g.qubits})
    pos = {v: k for k, v in enumerate(used)}
    gates = tuple(Gate(g.kind, tuple(pos[q] for q in g.qubits), g.angle) for g in circuit.gates)
    return Circuit(max(len(used), 1), gates, dict(circuit.metadata)), used
