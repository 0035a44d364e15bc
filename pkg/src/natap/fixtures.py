"""Bundled example inputs: a 27-qubit coupling graph with synthetic calibration data.

The calibration is generated from a fixed seed. CX errors are lowest
along the upper part of the chip (vertices 12..26), and the five severe
crosstalk pairs sit in that same area, so a layout chosen from CX errors
alone lands on the crosstalk. Regenerate the JSON files with
``python -m natap.fixtures``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .hwgraph import Family, HardwareGraph, arc_neighborhood
from .rbfit import CalibrationData, ErrEstimate, assemble_noise_model

FALCON27_EDGES = (
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7), (7, 10), (8, 9),
    (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14), (14, 16), (15, 18),
    (16, 19), (17, 18), (18, 21), (19, 20), (19, 22), (21, 23), (22, 25), (23, 24),
    (24, 25), (25, 26),
)

# (cr edge, spectator, ratio)
SEVERE_PAIRS = (
    ((22, 25), 24, 31.0),
    ((12, 15), 13, 24.0),
    ((24, 25), 23, 18.0),
    ((19, 22), 25, 14.0),
    ((14, 16), 19, 12.0),
)
LOW_ERROR_REGION = frozenset(range(12, 27))
SEED = 2024


def falcon27() -> HardwareGraph:
    return HardwareGraph(27, FALCON27_EDGES, Family.CUSTOM)


def synthetic_calibration(H: HardwareGraph, seed: int = SEED) -> CalibrationData:
    rng = np.random.default_rng(seed)
    n = H.num_vertices
    readout = rng.uniform(0.008, 0.03, n)
    sq = rng.uniform(2e-4, 8e-4, n)
    cx = {}
    for e in H.edges:
        low = e[0] in LOW_ERROR_REGION and e[1] in LOW_ERROR_REGION
        cx[e] = float(rng.uniform(0.004, 0.007) if low else rng.uniform(0.009, 0.02))
    return CalibrationData(tuple(float(v) for v in readout), tuple(float(v) for v in sq), cx)


def synthetic_err_table(H: HardwareGraph, seed: int = SEED) -> list[ErrEstimate]:
    rng = np.random.default_rng(seed + 1)
    severe = {(e, k): r for e, k, r in SEVERE_PAIRS}
    out = []
    for e in H.edges:
        for k in sorted(arc_neighborhood(H, e)):
            if (e, k) in severe:
                r = severe[(e, k)]
                out.append(ErrEstimate(e, k, r, round(0.1 * r, 6)))
            else:
                r = float(np.clip(rng.normal(1.0, 0.08), 0.7, 1.6))
                out.append(ErrEstimate(e, k, round(r, 6), round(float(rng.uniform(0.03, 0.12)), 6)))
    return out


def _data_path(name: str) -> Path:
    return Path(str(resources.files("natap") / "data" / name))


def load_falcon27() -> HardwareGraph:
    return HardwareGraph.load(_data_path("falcon27.json"))


def load_calibration() -> CalibrationData:
    return CalibrationData.load(_data_path("falcon27_calibration.json"))


def load_err_table() -> list[ErrEstimate]:
    return [ErrEstimate.from_json(d) for d in json.loads(_data_path("falcon27_err_table.json").read_text())]


def falcon27_noise(keep_top: int = 10):
    H = load_falcon27()
    return H, assemble_noise_model(load_calibration(), load_err_table(), keep_top, H)


def write_all(directory: str | Path | None = None) -> None:
    d = Path(directory) if directory else _data_path("")
    d.mkdir(parents=True, exist_ok=True)
    H = falcon27()
    H.save(d / "falcon27.json")
    synthetic_calibration(H).save(d / "falcon27_calibration.json")
    errs = synthetic_err_table(H)
    (d / "falcon27_err_table.json").write_text(json.dumps([e.to_json() for e in errs]) + "\n")


if __name__ == "__main__":
    write_all()
