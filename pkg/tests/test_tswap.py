import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from natap.hwgraph import HardwareGraph, all_pairs_distances, grid, line
from natap.tswap import (TokenConfig, TokenSwapError, apply_swaps, approx_token_swapping,
                         brute_force_token_swapping, total_distance)


def _cfgs(H, start, target):
    return TokenConfig(dict(start), H), TokenConfig(dict(target), H)


def test_identity_is_empty():
    H = line(4)
    s, t = _cfgs(H, {0: 0, 1: 1}, {0: 0, 1: 1})
    assert approx_token_swapping(H, s, t) == []
    assert brute_force_token_swapping(H, s, t) == []


def test_adjacent_transposition():
    H = line(2)
    s, t = _cfgs(H, {0: 0, 1: 1}, {0: 1, 1: 0})
    assert len(approx_token_swapping(H, s, t)) == 1


def test_triangle_three_cycle():
    H = HardwareGraph(3, ((0, 1), (1, 2), (0, 2)))
    s, t = _cfgs(H, {0: 0, 1: 1, 2: 2}, {0: 1, 1: 2, 2: 0})
    assert len(brute_force_token_swapping(H, s, t)) == 2
    sw = approx_token_swapping(H, s, t)
    assert len(sw) == 2 and apply_swaps(s.placement, sw) == t.placement


@pytest.mark.parametrize("d", [1, 2, 3])
def test_path_transposition_optimum(d):
    H = line(d + 1)
    tokens = {k: k for k in range(d + 1)}
    target = dict(tokens)
    target[0], target[d] = d, 0
    s, t = _cfgs(H, tokens, target)
    assert len(brute_force_token_swapping(H, s, t)) == 2 * d - 1


def test_token_set_mismatch():
    H = line(3)
    s, t = _cfgs(H, {0: 0}, {1: 1})
    with pytest.raises(TokenSwapError):
        approx_token_swapping(H, s, t)


def test_non_injective_placement():
    with pytest.raises(TokenSwapError):
        TokenConfig({0: 1, 1: 1}, line(3))


def test_brute_force_guard():
    H = line(9)
    s, t = _cfgs(H, {0: 0}, {0: 8})
    with pytest.raises(TokenSwapError, match="limited"):
        brute_force_token_swapping(H, s, t)


def test_fillers_move_freely():
    # token 0 crosses two empty vertices; empty vertices carry no target
    H = line(3)
    s, t = _cfgs(H, {0: 0}, {0: 2})
    sw = approx_token_swapping(H, s, t)
    assert len(sw) == 2 and apply_swaps(s.placement, sw) == {0: 2}


@st.composite
def instances(draw):
    n = draw(st.integers(2, 7))
    edges = {(draw(st.integers(0, k - 1)), k) for k in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=6))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    H = HardwareGraph(n, tuple(edges))
    k = draw(st.integers(1, n))
    start = draw(st.permutations(range(n)))[:k]
    target = draw(st.permutations(range(n)))[:k]
    return H, dict(enumerate(start)), dict(enumerate(target))


@settings(max_examples=150, deadline=None)
@given(instances())
def test_approx_correct_and_bounded(inst):
    H, start, target = inst
    s, t = _cfgs(H, start, target)
    sw = approx_token_swapping(H, s, t)
    assert apply_swaps(start, sw) == target
    assert all(H.has_arc(u, v) for u, v in sw)
    opt = brute_force_token_swapping(H, s, t)
    assert apply_swaps(start, opt) == target
    assert len(opt) <= len(sw) <= 4 * len(opt)
    D = all_pairs_distances(H)
    assert len(opt) >= math.ceil(total_distance(D, start, target) / 2)


def test_grid_full_permutation():
    H = grid(3, 3)
    perm = [4, 0, 8, 2, 6, 1, 3, 7, 5]
    s, t = _cfgs(H, {k: k for k in range(9)}, dict(enumerate(perm)))
    sw = approx_token_swapping(H, s, t)
    assert apply_swaps(s.placement, sw) == t.placement
