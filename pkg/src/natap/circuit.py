"""Gate-list circuit IR, two-qubit layering, routed-circuit checks and DD insertion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .hwgraph import HardwareGraph

ONE_QUBIT = {"h", "rx", "rz", "x", "measure", "delay"}
TWO_QUBIT = {"rzz", "cx", "swap"}
PARAMETRIC = {"rx", "rz", "rzz"}
KINDS = ONE_QUBIT | TWO_QUBIT


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise CircuitError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise CircuitError(f"{self.kind} needs two distinct qubits, got {self.qubits}")
        if (self.angle is not None) != (self.kind in PARAMETRIC):
            raise CircuitError(f"angle must be given exactly for parametric gates ({self.kind})")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind in TWO_QUBIT

    def to_json(self) -> dict:
        out = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.angle is not None:
            out["angle"] = self.angle
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Gate":
        angle = data.get("angle")
        return cls(data["kind"], tuple(int(q) for q in data["qubits"]),
                   None if angle is None else float(angle))


def h(q): return Gate("h", (q,))
def x(q): return Gate("x", (q,))
def rx(q, theta): return Gate("rx", (q,), float(theta))
def rz(q, theta): return Gate("rz", (q,), float(theta))
def rzz(p, q, theta): return Gate("rzz", (p, q), float(theta))
def cx(p, q): return Gate("cx", (p, q))
def swap(p, q): return Gate("swap", (p, q))
def measure(q): return Gate("measure", (q,))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.num_qubits:
                    raise CircuitError(f"{g.kind} on qubit {q} outside 0..{self.num_qubits - 1}")

    def __len__(self) -> int:
        return len(self.gates)

    def two_qubit_gates(self) -> list[Gate]:
        return [g for g in self.gates if g.is_two_qubit]

    def to_json(self) -> dict:
        out = {"num_qubits": self.num_qubits, "gates": [g.to_json() for g in self.gates]}
        if self.metadata:
            out["metadata"] = self.metadata
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Circuit":
        try:
            gates = tuple(Gate.from_json(g) for g in data["gates"])
            return cls(int(data["num_qubits"]), gates, dict(data.get("metadata", {})))
        except (KeyError, TypeError) as exc:
            raise CircuitError(f"malformed circuit document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Circuit":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class LayerSequence:
    layers: tuple[tuple[tuple[int, int], ...], ...]
    gate_layer: tuple[int, ...] = ()  # layer of each gate of the source circuit, -1 for 1q gates

    def __len__(self) -> int:
        return len(self.layers)


def group_layers(circuit: Circuit) -> LayerSequence:
    """ASAP grouping of the two-qubit gates.

    A gate goes to the layer right after the last layer touching either of
    its qubits, which is the earliest slot that keeps every layer
    qubit-disjoint and preserves per-qubit order.
    """
    last = [-1] * circuit.num_qubits
    layers: list[list[tuple[int, int]]] = []
    gate_layer = []
    for g in circuit.gates:
        if not g.is_two_qubit:
            gate_layer.append(-1)
            continue
        p, q = g.qubits
        t = max(last[p], last[q]) + 1
        if t == len(layers):
            layers.append([])
        layers[t].append((p, q))
        last[p] = last[q] = t
        gate_layer.append(t)
    return LayerSequence(tuple(tuple(L) for L in layers), tuple(gate_layer))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[tuple[int, tuple[int, int]], ...]

    @property
    def compliant(self) -> bool:
        return not self.violations


def validate_routed(circuit: Circuit, H: HardwareGraph) -> ValidationReport:
    if circuit.num_qubits > H.num_vertices:
        raise CircuitError(f"circuit has {circuit.num_qubits} qubits, hardware {H.num_vertices}")
    bad = tuple((k, g.qubits) for k, g in enumerate(circuit.gates)
                if g.is_two_qubit and not H.has_arc(*g.qubits))
    return ValidationReport(bad)


def asap_slots(circuit: Circuit, skip: frozenset[str] = frozenset()) -> list[int]:
    """Unit-duration ASAP slot of every gate; gates of a kind in ``skip`` get -1."""
    last = [-1] * circuit.num_qubits
    slots = []
    for g in circuit.gates:
        if g.kind in skip:
            slots.append(-1)
            continue
        s = max(last[q] for q in g.qubits) + 1
        for q in g.qubits:
            last[q] = s
        slots.append(s)
    return slots


def depth(circuit: Circuit) -> int:
    """Critical-path length counting single- and two-qubit gates (measure/delay excluded)."""
    slots = asap_slots(circuit, frozenset({"measure", "delay"}))
    return max(slots, default=-1) + 1


def lower_to_native(circuit: Circuit) -> Circuit:
    """Rewrite ``swap`` as three CX and ``rzz(t)`` as ``cx, rz(t), cx``."""
    out = []
    for g in circuit.gates:
        if g.kind == "swap":
            a, b = g.qubits
            out += [cx(a, b), cx(b, a), cx(a, b)]
        elif g.kind == "rzz":
            a, b = g.qubits
            out += [cx(a, b), rz(b, g.angle), cx(a, b)]
        else:
            out.append(g)
    return Circuit(circuit.num_qubits, tuple(out), dict(circuit.metadata))


def cx_count(circuit: Circuit) -> int:
    return sum(1 for g in lower_to_native(circuit).gates if g.kind == "cx")


def insert_dd(circuit: Circuit, num_pulses: int) -> Circuit:
    """Fill idle windows with ``num_pulses`` X gates.

    Idle time is measured in ASAP slots: a window is the gap between two
    consecutive operations on a qubit. Windows shorter than ``num_pulses``
    slots are left alone; otherwise pulse ``k`` sits at slot fraction
    ``(k + 1/2) / num_pulses`` of the window. An even pulse count composes
    to the identity.
    """
    if num_pulses < 0 or num_pulses % 2:
        raise CircuitError(f"DD needs an even, non-negative pulse count, got {num_pulses}")
    if num_pulses == 0:
        return circuit
    slots = asap_slots(circuit)
    per_qubit: list[list[int]] = [[] for _ in range(circuit.num_qubits)]
    for s, g in zip(slots, circuit.gates):
        for q in g.qubits:
            per_qubit[q].append(s)
    # (slot, tie-break, gate); tie-break keeps original order inside a slot
    items = [(s, 1, k, g) for k, (s, g) in enumerate(zip(slots, circuit.gates))]
    for q, qs in enumerate(per_qubit):
        for s1, s2 in zip(qs, qs[1:]):
            width = s2 - s1 - 1
            if width < num_pulses:
                continue
            for k in range(num_pulses):
                slot = s1 + 1 + int((k + 0.5) * width / num_pulses)
                items.append((slot, 0, q, x(q)))
    items.sort(key=lambda it: (it[0], it[1], it[2]))
    meta = dict(circuit.metadata)
    meta["dd_pulses"] = num_pulses
    return Circuit(circuit.num_qubits, tuple(it[3] for it in items), meta)
