"""RB decay fits, error-rate ratios and the crosstalk-aware noise model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .hwgraph import HardwareGraph, arc_neighborhood


class FitError(RuntimeError):
    pass


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class DecayCurve:
    lengths: tuple[int, ...]
    survival: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(m) for m in self.lengths))
        object.__setattr__(self, "survival", tuple(tuple(float(p) for p in s) for s in self.survival))
        if len(self.lengths) != len(self.survival):
            raise ValueError("one survival list per sequence length is required")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ValueError("sequence lengths must be strictly increasing")
        for m, s in zip(self.lengths, self.survival):
            if not s:
                raise ValueError(f"no samples at length {m}")
            if any(not 0.0 <= p <= 1.0 for p in s):
                raise ValueError(f"survival probability outside [0,1] at length {m}")

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        m = np.array([m for m, s in zip(self.lengths, self.survival) for _ in s], dtype=float)
        p = np.array([p for s in self.survival for p in s], dtype=float)
        return m, p

    @classmethod
    def from_json(cls, data: dict) -> "DecayCurve":
        return cls(tuple(data["lengths"]), tuple(tuple(s) for s in data["survival"]))

    def to_json(self) -> dict:
        return {"lengths": list(self.lengths), "survival": [list(s) for s in self.survival]}


@dataclass(frozen=True)
class DecayFit:
    A: float
    alpha: float
    B: float
    stderr_alpha: float
    epc: float
    n_qubits: int

    @property
    def epc_stderr(self) -> float:
        return epc_factor(self.n_qubits) * self.stderr_alpha


def epc_factor(n_qubits: int) -> float:
    return 1.0 - 1.0 / 2 ** n_qubits


def _model(theta, m):
    A, alpha, B = theta
    return A * np.power(alpha, m) + B


def fit_decay(curve: DecayCurve, n_qubits: int, max_iter: int = 2000) -> DecayFit:
    """Unweighted least-squares fit of ``P(0) = A * alpha**m + B``.

    A curve that is flat above the fully mixed level ``1/2**n`` is a
    noiseless decay and yields ``alpha = 1``; a flat curve sitting at the
    mixed level carries no information about alpha and is rejected.
    """
    if len(curve.lengths) < 3:
        raise FitError(f"need at least 3 distinct lengths, got {len(curve.lengths)}")
    m, p = curve.points()
    B0 = 1.0 / 2 ** n_qubits
    if np.ptp(p) < 1e-12:
        if abs(p[0] - B0) < 1e-9:
            raise FitError("degenerate data: constant survival at the fully mixed level")
        return _finish(p[0] - B0, 1.0, B0, 0.0, n_qubits)

    m_min = curve.lengths[0]
    A0 = float(np.mean(curve.survival[0])) - B0
    means = np.array([np.mean(s) for s in curve.survival]) - B0
    ms = np.array(curve.lengths, dtype=float)
    ok = means > 1e-6 if A0 > 0 else means < -1e-6
    if ok.sum() >= 2:
        slope = np.polyfit(ms[ok], np.log(np.abs(means[ok])), 1)[0]
        alpha0 = float(np.clip(np.exp(slope), 1e-3, 1.0 - 1e-9))
    else:
        alpha0 = 0.9
    # A0 is measured at m_min, move it to m = 0 so the model starts on the data
    A0 = A0 / alpha0 ** m_min if A0 != 0 else 1e-3

    res = least_squares(lambda th: _model(th, m) - p, x0=[A0, alpha0, B0],
                        method="lm", max_nfev=max_iter, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError(f"fit did not converge: residual norm {np.linalg.norm(res.fun):.3e}")
    A, alpha, B = (float(v) for v in res.x)

    dof = max(len(p) - 3, 1)
    s2 = float(res.fun @ res.fun) / dof
    JtJ = res.jac.T @ res.jac
    try:
        cov = np.linalg.pinv(JtJ) * s2
        stderr = float(math.sqrt(max(cov[1, 1], 0.0)))
    except np.linalg.LinAlgError:
        stderr = float("inf")
    if alpha > 1.0:  # noise pushed the estimate past the physical limit
        alpha = 1.0
    return _finish(A, alpha, B, stderr, n_qubits)


def _finish(A, alpha, B, stderr, n_qubits) -> DecayFit:
    if not 0.0 < alpha <= 1.0:
        raise FitError(f"fitted alpha={alpha} outside (0, 1]")
    return DecayFit(float(A), float(alpha), float(B), float(stderr),
                    epc_factor(n_qubits) * (1.0 - alpha), n_qubits)


@dataclass(frozen=True)
class ErrEstimate:
    cr_edge: tuple[int, int]
    spectator: int
    ratio: float
    stderr: float

    def to_json(self) -> dict:
        return {"cr_edge": list(self.cr_edge), "spectator": self.spectator,
                "ratio": self.ratio, "stderr": self.stderr}

    @classmethod
    def from_json(cls, data: dict) -> "ErrEstimate":
        i, j = data["cr_edge"]
        return cls((int(i), int(j)), int(data["spectator"]), float(data["ratio"]),
                   float(data.get("stderr", 0.0)))


def error_rate_ratio(fit_parallel: DecayFit, fit_isolated: DecayFit,
                     cr_edge: tuple[int, int] = (0, 1), spectator: int = 0) -> ErrEstimate:
    if fit_parallel.n_qubits != fit_isolated.n_qubits:
        raise ValueError("fits were made for different qubit counts")
    if fit_isolated.epc <= 0:
        raise ValueError("isolated EPC is zero, the ratio is undefined")
    ratio = fit_parallel.epc / fit_isolated.epc
    rel_iso = fit_isolated.epc_stderr / fit_isolated.epc
    if fit_parallel.epc > 0:
        rel_par = fit_parallel.epc_stderr / fit_parallel.epc
        stderr = ratio * math.hypot(rel_par, rel_iso)
    else:
        # ratio * sigma_p / epc_p stays finite as epc_p -> 0
        stderr = math.hypot(fit_parallel.epc_stderr / fit_isolated.epc, ratio * rel_iso)
    return ErrEstimate(tuple(cr_edge), spectator, ratio, stderr)


def load_err_table(path: str | Path) -> list[ErrEstimate]:
    return [ErrEstimate.from_json(d) for d in json.loads(Path(path).read_text())]


def save_err_table(errs: list[ErrEstimate], path: str | Path) -> None:
    Path(path).write_text(json.dumps([e.to_json() for e in errs]) + "\n")


def _edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class CalibrationData:
    readout_error: tuple[float, ...]
    sq_error: tuple[float, ...]
    cx_error: dict  # undirected edge (i<j) -> error

    @classmethod
    def from_json(cls, data: dict) -> "CalibrationData":
        try:
            ro = tuple(float(q["readout_error"]) for q in data["qubits"])
            sq = tuple(float(q["sq_error"]) for q in data["qubits"])
            cx = {_edge_key(*e["edge"]): float(e["cx_error"]) for e in data["edges"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise CalibrationError(f"malformed calibration document: {exc}") from exc
        return cls(ro, sq, cx)

    def to_json(self) -> dict:
        return {
            "qubits": [{"readout_error": r, "sq_error": s}
                       for r, s in zip(self.readout_error, self.sq_error)],
            "edges": [{"edge": list(e), "cx_error": c} for e, c in sorted(self.cx_error.items())],
        }

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationData":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")


@dataclass(frozen=True)
class NoiseModel:
    """Per-qubit, per-arc and per-(edge, spectator) costs.

    Arc and crosstalk costs are keyed by the undirected edge ``(i, j)`` with
    ``i < j`` and apply to both arc directions.
    """

    qubit_cost: tuple[float, ...]
    arc_cost: dict = field(default_factory=dict)
    crosstalk_cost: dict = field(default_factory=dict)  # ((i, j), k) -> E, only nonzero entries

    def E_qubit(self, i: int) -> float:
        return self.qubit_cost[i]

    def E_arc(self, i: int, j: int) -> float:
        return self.arc_cost.get(_edge_key(i, j), 0.0)

    def E_crosstalk(self, i: int, j: int, k: int) -> float:
        return self.crosstalk_cost.get((_edge_key(i, j), k), 0.0)

    def crosstalk_by_edge(self) -> dict:
        out: dict = {}
        for (e, k), c in self.crosstalk_cost.items():
            out.setdefault(e, []).append((k, c))
        return out

    def to_json(self) -> dict:
        return {
            "qubit_cost": list(self.qubit_cost),
            "arc_cost": [{"edge": list(e), "cost": c} for e, c in sorted(self.arc_cost.items())],
            "crosstalk_cost": [{"edge": list(e), "spectator": k, "cost": c}
                               for (e, k), c in sorted(self.crosstalk_cost.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NoiseModel":
        return cls(
            tuple(float(v) for v in data["qubit_cost"]),
            {_edge_key(*d["edge"]): float(d["cost"]) for d in data["arc_cost"]},
            {(_edge_key(*d["edge"]), int(d["spectator"])): float(d["cost"])
             for d in data["crosstalk_cost"]},
        )


def assemble_noise_model(calib: CalibrationData, errs: list[ErrEstimate], keep_top: int = 10,
                         hardware: HardwareGraph | None = None) -> NoiseModel:
    """Combine calibration errors and ERR values into routing costs.

    Only the ``keep_top`` largest ratios are kept; every other ratio is
    treated as 1, i.e. no crosstalk.
    """
    if len(calib.readout_error) != len(calib.sq_error):
        raise CalibrationError("readout and single-qubit error lists differ in length")
    n = len(calib.readout_error)
    if hardware is not None:
        if hardware.num_vertices > n:
            raise CalibrationError(f"calibration lacks qubit {n}")
        for e in hardware.edges:
            if e not in calib.cx_error:
                raise CalibrationError(f"calibration lacks cx_error for edge {list(e)}")
    qubit_cost = tuple((r + s) / 2 for r, s in zip(calib.readout_error, calib.sq_error))
    arc_cost = dict(calib.cx_error)

    seen = set()
    for e in errs:
        key = (_edge_key(*e.cr_edge), e.spectator)
        if key in seen:
            raise CalibrationError(f"duplicate ERR entry for edge {list(key[0])}, spectator {key[1]}")
        seen.add(key)
        if not 0 <= e.spectator < n:
            raise CalibrationError(f"calibration lacks spectator qubit {e.spectator}")
        if hardware is not None and e.spectator not in arc_neighborhood(hardware, e.cr_edge):
            raise CalibrationError(
                f"spectator {e.spectator} is not adjacent to edge {list(e.cr_edge)}")

    ranked = sorted(errs, key=lambda e: (-e.ratio, _edge_key(*e.cr_edge), e.spectator))
    crosstalk = {}
    for e in ranked[:keep_top]:
        cost = max(0.0, (e.ratio - 1.0) * qubit_cost[e.spectator])
        if cost > 0:
            crosstalk[(_edge_key(*e.cr_edge), e.spectator)] = cost
    return NoiseModel(qubit_cost, arc_cost, crosstalk)
