"""Token swapping between consecutive allocations.

Vertices without a token hold an anonymous filler that has no target and
costs nothing to move.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .hwgraph import HardwareGraph, all_pairs_distances


class TokenSwapError(ValueError):
    pass


@dataclass(frozen=True)
class TokenConfig:
    placement: dict  # token -> vertex
    graph: HardwareGraph

    def __post_init__(self):
        verts = list(self.placement.values())
        if len(set(verts)) != len(verts):
            raise TokenSwapError("placement is not injective")
        if any(not 0 <= v < self.graph.num_vertices for v in verts):
            raise TokenSwapError("placement uses a vertex outside the graph")


def apply_swaps(placement: dict, swaps) -> dict:
    where = dict(placement)
    at = {v: t for t, v in where.items()}
    for u, v in swaps:
        a, b = at.pop(u, None), at.pop(v, None)
        if a is not None:
            where[a] = v
            at[v] = a
        if b is not None:
            where[b] = u
            at[u] = b
    return where


def _check(H, start: TokenConfig, target: TokenConfig):
    if start.graph is not H and start.graph != H or target.graph is not H and target.graph != H:
        raise TokenSwapError("configurations refer to a different graph")
    if set(start.placement) != set(target.placement):
        raise TokenSwapError("start and target place different token sets")


def total_distance(dist, placement: dict, target: dict) -> int:
    return int(sum(dist[placement[t], target[t]] for t in placement))


def approx_token_swapping(H: HardwareGraph, start: TokenConfig, target: TokenConfig,
                          dist: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Happy swaps first; otherwise walk along preferred moves and resolve the chain.

    The walk starts at a misplaced token and keeps stepping to the next
    vertex on a shortest path of the token it is standing on. It ends
    either on a cycle, which is rotated with ``len - 1`` swaps that each
    bring one more token closer, or on a vertex whose token is already
    home, which is displaced by one unhappy swap.
    """
    _check(H, start, target)
    if dist is None:
        dist = all_pairs_distances(H)
    n = H.num_vertices
    at: list = [None] * n
    for t, v in start.placement.items():
        at[v] = t
    goal = dict(target.placement)
    swaps: list[tuple[int, int]] = []

    def do(u, v):
        at[u], at[v] = at[v], at[u]
        swaps.append((u, v))

    def gain(t, src, dst) -> int:
        return 0 if t is None else int(dist[src, goal[t]] - dist[dst, goal[t]])

    def step_toward(u) -> int:
        g = goal[at[u]]
        return min(w for w in H.adjacency[u] if dist[w, g] < dist[u, g])

    budget = 4 * n * n * max(1, len(goal)) + 16
    while True:
        misplaced = [v for v in range(n) if at[v] is not None and goal[at[v]] != v]
        if not misplaced:
            return swaps
        budget -= 1
        if budget < 0:
            raise TokenSwapError("token swapping failed to make progress")
        happy = None
        for u, v in H.edges:
            a, b = at[u], at[v]
            if a is None and b is None:
                continue
            ga, gb = gain(a, u, v), gain(b, v, u)
            if (a is None or ga > 0) and (b is None or gb > 0):
                happy = (u, v)
                break
        if happy:
            do(*happy)
            continue
        walk = [misplaced[0]]
        pos = {misplaced[0]: 0}
        while True:
            nxt = step_toward(walk[-1])
            if nxt in pos:
                cycle = walk[pos[nxt]:]
                for k in range(len(cycle) - 2, -1, -1):
                    do(cycle[k], cycle[k + 1])
                break
            t = at[nxt]
            if t is None or goal[t] == nxt:
                do(walk[-1], nxt)
                break
            pos[nxt] = len(walk)
            walk.append(nxt)


def brute_force_token_swapping(H: HardwareGraph, start: TokenConfig, target: TokenConfig,
                               max_vertices: int = 8) -> list[tuple[int, int]]:
    """Minimal swap sequence by BFS over token configurations."""
    _check(H, start, target)
    n = H.num_vertices
    if n > max_vertices:
        raise TokenSwapError(f"brute force limited to {max_vertices} vertices, graph has {n}")
    init: list = [-1] * n
    for t, v in start.placement.items():
        init[v] = t
    want = {v: t for t, v in target.placement.items()}

    def solved(state) -> bool:
        return all(state[v] == t for v, t in want.items())

    s0 = tuple(init)
    if solved(s0):
        return []
    prev = {s0: None}
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        for u, v in H.edges:
            if s[u] == s[v]:
                continue  # two fillers
            lst = list(s)
            lst[u], lst[v] = lst[v], lst[u]
            nxt = tuple(lst)
            if nxt in prev:
                continue
            prev[nxt] = (s, (u, v))
            if solved(nxt):
                out = []
                cur = nxt
                while prev[cur] is not None:
                    cur, sw = prev[cur]
                    out.append(sw)
                return out[::-1]
            queue.append(nxt)
    raise TokenSwapError("target configuration unreachable (graph disconnected?)")
