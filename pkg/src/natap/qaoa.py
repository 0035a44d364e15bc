"""MaxCut QAOA: instances, circuits, statevector simulation, parameter search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize

from .circuit import Circuit, h, rx, rzz


class QaoaError(ValueError):
    pass


class InstanceKind(str, Enum):
    LINE = "line"
    THREE_REGULAR = "three_regular"
    COMPLETE = "complete"
    CUSTOM = "custom"


@dataclass(frozen=True)
class MaxCutInstance:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    kind: InstanceKind = InstanceKind.CUSTOM
    seed: int = 0

    def __post_init__(self):
        canon = []
        for i, j in self.edges:
            if i == j or not (0 <= i < self.num_vertices and 0 <= j < self.num_vertices):
                raise QaoaError(f"bad edge ({i},{j})")
            canon.append((min(i, j), max(i, j)))
        if len(set(canon)) != len(canon):
            raise QaoaError("duplicate edge")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def name(self) -> str:
        return {"line": "line", "three_regular": "3reg", "complete": "complete"}.get(
            self.kind.value, "custom") + str(self.num_vertices)


def generate_maxcut_instance(kind: str | InstanceKind, n: int, seed: int = 0) -> MaxCutInstance:
    kind = InstanceKind(kind)
    if kind is InstanceKind.LINE:
        if n < 2:
            raise QaoaError("a line needs at least 2 vertices")
        return MaxCutInstance(n, tuple((i, i + 1) for i in range(n - 1)), kind, seed)
    if kind is InstanceKind.COMPLETE:
        if n < 2:
            raise QaoaError("a complete graph needs at least 2 vertices")
        return MaxCutInstance(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)), kind, seed)
    if kind is InstanceKind.THREE_REGULAR:
        if n < 4 or n % 2:
            raise QaoaError(f"three-regular graphs need an even n >= 4, got {n}")
        rng = np.random.default_rng(seed)
        stubs = np.repeat(np.arange(n), 3)
        for _ in range(10_000):
            perm = rng.permutation(stubs)
            pairs = {(min(a, b), max(a, b)) for a, b in zip(perm[0::2], perm[1::2])}
            if len(pairs) == 3 * n // 2 and all(a != b for a, b in pairs):
                return MaxCutInstance(n, tuple(sorted((int(a), int(b)) for a, b in pairs)), kind, seed)
        raise QaoaError("configuration model kept producing multigraphs")
    raise QaoaError("custom instances are built directly")


def cut_values(inst: MaxCutInstance) -> np.ndarray:
    """Cut size of every computational basis state (bit ``q`` of the index = vertex ``q``)."""
    idx = np.arange(2 ** inst.num_vertices)
    cut = np.zeros(len(idx), dtype=np.int64)
    for i, j in inst.edges:
        cut += ((idx >> i) ^ (idx >> j)) & 1
    return cut


def maxcut_optimum(inst: MaxCutInstance, max_vertices: int = 24) -> int:
    n = inst.num_vertices
    if n > max_vertices:
        raise QaoaError(f"brute-force MaxCut limited to {max_vertices} vertices")
    if not inst.edges:
        return 0
    # vertex n-1 fixed on one side halves the search
    idx = np.arange(2 ** (n - 1), dtype=np.int64)
    cut = np.zeros(len(idx), dtype=np.int32)
    for i, j in inst.edges:
        cut += (((idx >> i) ^ (idx >> j)) & 1).astype(np.int32)
    return int(cut.max())


def uniform_ratio(inst: MaxCutInstance) -> float:
    return (len(inst.edges) / 2) / maxcut_optimum(inst)


@dataclass(frozen=True)
class QaoaParams:
    p: int
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.p < 1 or len(self.gammas) != self.p or len(self.betas) != self.p:
            raise QaoaError("need p >= 1 and exactly p gammas and p betas")

    def to_json(self) -> dict:
        return {"p": self.p, "gammas": list(self.gammas), "betas": list(self.betas)}


def matching_order(edges) -> list[tuple[int, int]]:
    """Edges regrouped into greedy maximal matchings, each in lexicographic order.

    The rzz gates commute, so this order is free; it lets the two-qubit
    layering pack each matching into one layer.
    """
    remaining = sorted(edges)
    out = []
    while remaining:
        used: set = set()
        rest = []
        for i, j in remaining:
            if i in used or j in used:
                rest.append((i, j))
            else:
                used.update((i, j))
                out.append((i, j))
        remaining = rest
    return out


def build_qaoa_circuit(inst: MaxCutInstance, params: QaoaParams) -> Circuit:
    n = inst.num_vertices
    gates = [h(q) for q in range(n)]
    order = matching_order(inst.edges)
    for g, b in zip(params.gammas, params.betas):
        gates += [rzz(i, j, 2 * g) for i, j in order]
        gates += [rx(q, 2 * b) for q in range(n)]
    return Circuit(n, tuple(gates), {"instance": inst.name, "p": params.p})


# -- statevector simulation --------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _rx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _apply_1q(psi, n, q, U):
    # index bit q is tensor axis n-1-q in C order
    psi = psi.reshape((2 ** (n - 1 - q), 2, 2 ** q))
    return np.einsum("ab,ibj->iaj", U, psi).reshape(-1)


def _bits(n, q):
    return (np.arange(2 ** n) >> q) & 1


def simulate(circuit: Circuit, check_norm: bool = False) -> np.ndarray:
    """Statevector of ``circuit`` applied to ``|0...0>``; bit ``q`` of the index is qubit ``q``."""
    n = circuit.num_qubits
    if n > 24:
        raise QaoaError(f"statevector simulation limited to 24 qubits, got {n}")
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    for g in circuit.gates:
        k = g.kind
        if k == "h":
            psi = _apply_1q(psi, n, g.qubits[0], _H)
        elif k == "x":
            psi = _apply_1q(psi, n, g.qubits[0], _X)
        elif k == "rx":
            psi = _apply_1q(psi, n, g.qubits[0], _rx(g.angle))
        elif k == "rz":
            z = 1 - 2 * _bits(n, g.qubits[0])
            psi = psi * np.exp(-0.5j * g.angle * z)
        elif k == "rzz":
            a, b = g.qubits
            zz = 1 - 2 * (_bits(n, a) ^ _bits(n, b))
            psi = psi * np.exp(-0.5j * g.angle * zz)
        elif k == "cx":
            c, t = g.qubits
            idx = np.arange(2 ** n)
            psi = np.where(_bits(n, c) == 1, psi[idx ^ (1 << t)], psi)
        elif k == "swap":
            a, b = g.qubits
            idx = np.arange(2 ** n)
            diff = _bits(n, a) ^ _bits(n, b)
            psi = psi[idx ^ (diff << a) ^ (diff << b)]
        # measure and delay leave the state alone
        if check_norm:
            norm = float(np.vdot(psi, psi).real)
            if abs(norm - 1.0) > 1e-10:
                raise QaoaError(f"state norm drifted to {norm} after {g}")
    return psi


def _qaoa_state(inst: MaxCutInstance, gammas, betas, cut=None) -> np.ndarray:
    n = inst.num_vertices
    if cut is None:
        cut = cut_values(inst)
    # sum of Z_i Z_j over edges = |E| - 2 * cut
    hp = len(inst.edges) - 2 * cut
    psi = np.full(2 ** n, 2 ** (-n / 2), dtype=complex)
    for g, b in zip(gammas, betas):
        psi = psi * np.exp(-1j * g * hp)
        U = _rx(2 * b)
        for q in range(n):
            psi = _apply_1q(psi, n, q, U)
    return psi


def expected_cut(psi: np.ndarray, inst: MaxCutInstance) -> float:
    return float(np.dot(np.abs(psi) ** 2, cut_values(inst)))


def qaoa_expectation(inst: MaxCutInstance, params: QaoaParams, max_vertices: int = 16) -> dict:
    if inst.num_vertices > max_vertices:
        raise QaoaError(f"QAOA simulation limited to {max_vertices} vertices")
    cut = cut_values(inst)
    psi = _qaoa_state(inst, params.gammas, params.betas, cut)
    value = float(np.dot(np.abs(psi) ** 2, cut))
    opt = maxcut_optimum(inst)
    return {"expected_cut": value, "ratio": value / opt if opt else 1.0}


def _wrap(theta, p):
    g = np.mod(theta[:p], math.pi)
    b = np.mod(theta[p:], math.pi / 2)
    return g, b


def optimize_parameters(inst: MaxCutInstance, p: int, seed: int = 0, restarts: int = 8,
                        warm_start: QaoaParams | None = None, max_vertices: int = 16) -> QaoaParams:
    """Nelder-Mead from ``restarts`` seeded random points, best result kept.

    ``warm_start`` (a depth ``p - 1`` optimum) adds one more start that
    extends it with a zero layer, so the result is never worse than the
    shallower circuit.
    """
    if inst.num_vertices > max_vertices:
        raise QaoaError(f"QAOA simulation limited to {max_vertices} vertices")
    if p < 1 or restarts < 1:
        raise QaoaError("need p >= 1 and at least one restart")
    cut = cut_values(inst)

    def neg(theta):
        psi = _qaoa_state(inst, theta[:p], theta[p:], cut)
        return -float(np.dot(np.abs(psi) ** 2, cut))

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([rng.uniform(0, math.pi, p), rng.uniform(0, math.pi / 2, p)])
              for _ in range(restarts)]
    if warm_start is not None:
        if warm_start.p != p - 1:
            raise QaoaError("warm start must have depth p - 1")
        starts.insert(0, np.array(list(warm_start.gammas) + [0.0] + list(warm_start.betas) + [0.0]))
    best_x, best_f = None, math.inf
    for x0 in starts:
        f0 = neg(x0)
        res = minimize(neg, x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000 * p, "maxfev": 8000 * p})
        x, f = (res.x, res.fun) if res.fun <= f0 else (x0, f0)
        if f < best_f - 1e-15:
            best_x, best_f = x, f
    g, b = _wrap(best_x, p)
    return QaoaParams(p, tuple(g), tuple(b))


def predict_noisy_ratio(result, noise, ideal_ratio: float, uniform_ratio: float) -> float:
    """``f * ideal + (1 - f) * uniform`` with ``f = exp(-c_noise_total)``.

    ``result`` is a :class:`~natap.router.RoutingResult` (or anything with
    a ``c_noise_total`` attribute); ``noise`` is accepted for signature
    symmetry with the router and is not re-read.
    """
    if not (0 <= uniform_ratio <= ideal_ratio <= 1 + 1e-12):
        raise QaoaError("need 0 <= uniform_ratio <= ideal_ratio <= 1")
    total = getattr(result, "c_noise_total", result)
    f = math.exp(-float(total))
    return f * ideal_ratio + (1 - f) * uniform_ratio
