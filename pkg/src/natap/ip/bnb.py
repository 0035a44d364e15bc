"""Branch-and-bound for binary programs on top of the LP engines."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import tol
from .model import Model
from .simplex import LpStatus, make_engine


class IpStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIMEOUT = "timeout"


@dataclass
class BnbParams:
    time_limit: float = 60.0
    gap_tol: float = tol.GAP
    seed: int = 0
    engine: str = "auto"
    node_limit: int | None = None
    # heuristic(lp_point, seed) -> binary point or None; candidates are checked before use
    heuristic: Callable | None = None
    heuristic_every: int = 1

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be non-negative")


@dataclass
class IpResult:
    status: IpStatus
    incumbent: np.ndarray | None
    value: float
    bound: float
    nodes: int
    wall_time: float
    lp_iterations: int = 0
    root_bound: float = -math.inf
    history: list = field(default_factory=list)  # (seconds, incumbent value) on each improvement

    def summary(self) -> dict:
        return {"status": self.status.value, "value": self.value, "bound": self.bound,
                "nodes": self.nodes, "wall_time": self.wall_time, "root_bound": self.root_bound}


def _integral_objective(c: np.ndarray) -> bool:
    return bool(np.all(np.abs(c - np.round(c)) < 1e-12))


def solve_bnb(model: Model, params: BnbParams | None = None) -> IpResult:
    """Best-bound search with depth-first plunging.

    Each processed node solves its LP relaxation. The most fractional
    variable is branched on (ties to the lowest index); the plunge follows
    the child closer to the LP value and the sibling is queued by its
    parent bound. Incumbents come from rounding the LP point and from the
    optional ``params.heuristic``.
    """
    params = params or BnbParams()
    t0 = time.monotonic()
    deadline = t0 + params.time_limit
    c = model.arrays()[0]
    n = model.num_vars
    integral = _integral_objective(c)
    engine = make_engine(model, params.engine)

    best_x: np.ndarray | None = None
    best_val = math.inf
    history: list = []

    def offer(x) -> bool:
        nonlocal best_x, best_val
        if x is None:
            return False
        x = np.asarray(np.round(x), dtype=float)
        if not model.is_feasible(x):
            return False
        v = float(c @ x)
        if v < best_val - 1e-12:
            best_x, best_val = x, v
            history.append((time.monotonic() - t0, v))
            return True
        return False

    def effective(bound: float) -> float:
        if integral and math.isfinite(bound):
            return math.ceil(bound - tol.INTEGRALITY)
        return bound

    def prunable(bound: float) -> bool:
        if best_x is None:
            return False
        return effective(bound) >= best_val - params.gap_tol * max(1.0, abs(best_val)) - 1e-9

    lower0, upper0 = np.zeros(n), np.ones(n)
    counter = 0
    heap: list = [(-math.inf, 0, ())]  # (parent bound, tie-break, fixings)
    nodes = 0
    lp_iters = 0
    root_bound = -math.inf
    timed_out = False

    while heap:
        bound, _, fixes = heapq.heappop(heap)
        if prunable(bound):
            continue
        # plunge from this node
        while True:
            if time.monotonic() > deadline or (params.node_limit and nodes >= params.node_limit):
                timed_out = True
                heapq.heappush(heap, (bound, counter, fixes))
                counter += 1
                break
            lo, up = lower0.copy(), upper0.copy()
            for j, v in fixes:
                lo[j] = up[j] = v
            res = engine.solve(lo, up)
            nodes += 1
            lp_iters += res.iterations
            if res.status is not LpStatus.OPTIMAL:
                break
            if not fixes:
                root_bound = res.value
            if prunable(res.value):
                break
            x = res.point
            frac = np.abs(x - np.round(x))
            if frac.max(initial=0.0) <= tol.INTEGRALITY:
                offer(x)
                break
            offer(x)
            if params.heuristic is not None and (nodes - 1) % params.heuristic_every == 0:
                offer(params.heuristic(x, params.seed + nodes))
                if prunable(res.value):
                    break
            score = np.minimum(x, 1 - x)
            j = int(np.argmax(score))  # argmax returns the lowest index on ties
            toward = 1 if x[j] >= 0.5 else 0
            heapq.heappush(heap, (res.value, counter, fixes + ((j, 1 - toward),)))
            counter += 1
            fixes = fixes + ((j, toward),)
            bound = res.value
        if timed_out:
            break

    wall = time.monotonic() - t0
    open_bounds = [b for b, _, _ in heap]
    if timed_out:
        proven = min(open_bounds, default=best_val)
        proven = min(max(proven, root_bound), best_val)
    else:
        proven = best_val
    if best_x is None:
        status = IpStatus.TIMEOUT if timed_out else IpStatus.INFEASIBLE
        return IpResult(status, None, math.inf, proven if timed_out else math.inf,
                        nodes, wall, lp_iters, root_bound, history)
    gap_ok = best_val - effective(proven) <= max(params.gap_tol, tol.GAP) * max(1.0, abs(best_val))
    if timed_out and not gap_ok:
        status = IpStatus.FEASIBLE
    else:
        status = IpStatus.OPTIMAL
        proven = min(max(effective(proven), proven), best_val)
    return IpResult(status, best_x.astype(np.int8), best_val, min(proven, best_val),
                    nodes, wall, lp_iters, root_bound, history)
