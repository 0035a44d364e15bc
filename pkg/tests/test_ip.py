import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from natap.ip import (BnbParams, IpStatus, LpStatus, Model, ModelError, SimplexEngine, solve_bnb,
                      solve_lp_relaxation)
from natap.ip.simplex import HighsEngine

from oracles import brute_force_binary


def test_single_bound_row():
    M = Model()
    x = M.add_var(1.0)
    M.add_constraint([x], [1.0], ">=", 0.3)
    r = solve_lp_relaxation(M)
    assert r.status is LpStatus.OPTIMAL and abs(r.value - 0.3) < 1e-9


def test_infeasible_pair():
    M = Model()
    x = M.add_var(0.0)
    M.add_constraint([x], [1.0], "<=", 0.2)
    M.add_constraint([x], [1.0], ">=", 0.8)
    assert solve_lp_relaxation(M).status is LpStatus.INFEASIBLE
    assert solve_bnb(M).status is IpStatus.INFEASIBLE


def test_model_rejects_bad_rows():
    M = Model()
    x = M.add_var(0.0)
    with pytest.raises(ModelError):
        M.add_constraint([x, x], [1.0, 1.0], "<=", 1.0)
    with pytest.raises(ModelError):
        M.add_constraint([x], [float("nan")], "<=", 1.0)
    with pytest.raises(ModelError):
        M.add_constraint([x], [1.0], "<>", 1.0)


def test_integral_root_single_node():
    M = Model()
    a, b = M.add_var(1.0), M.add_var(2.0)
    M.add_constraint([a, b], [1.0, 1.0], ">=", 1.0)
    res = solve_bnb(M)
    assert res.status is IpStatus.OPTIMAL and res.nodes == 1 and res.value == 1.0


def test_min_neg_sum():
    M = Model()
    a, b = M.add_var(-1.0), M.add_var(-1.0)
    M.add_constraint([a, b], [1.0, 1.0], "<=", 1.0)
    res = solve_bnb(M)
    assert res.status is IpStatus.OPTIMAL and res.value == -1.0


def test_fractional_root_branches():
    # odd cycle packing: LP optimum 1.5, integer optimum 1
    M = Model()
    v = [M.add_var(-1.0) for _ in range(3)]
    for i in range(3):
        M.add_constraint([v[i], v[(i + 1) % 3]], [1.0, 1.0], "<=", 1.0)
    assert abs(solve_lp_relaxation(M).value + 1.5) < 1e-9
    res = solve_bnb(M)
    assert res.value == -1.0 and res.bound == -1.0 and res.nodes > 1


def test_dump_lp_lists_rows():
    M = Model()
    a = M.add_var(1.5, "a")
    M.add_constraint([a], [1.0], "<=", 1.0, "cap")
    text = M.dump_lp()
    assert "cap" in text and "a" in text


def _random_model(rng, n, m):
    M = Model()
    c = rng.integers(-5, 6, n).astype(float)
    for j in range(n):
        M.add_var(float(c[j]))
    rows = []
    for _ in range(m):
        cols = sorted(rng.choice(n, size=rng.integers(1, n + 1), replace=False).tolist())
        vals = rng.integers(-3, 4, len(cols)).astype(float)
        vals[vals == 0] = 1.0
        sense = rng.choice(["<=", ">=", "="])
        x0 = rng.integers(0, 2, n)  # keep most instances feasible
        rhs = float(sum(v * x0[j] for j, v in zip(cols, vals)))
        if sense == "<=":
            rhs += rng.integers(0, 2)
        elif sense == ">=":
            rhs -= rng.integers(0, 2)
        M.add_constraint(cols, vals, sense, rhs)
        rows.append((dict(zip(cols, vals)), sense, rhs))
    return M, c, rows


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_simplex_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    M, _, _ = _random_model(rng, int(rng.integers(2, 9)), int(rng.integers(1, 7)))
    a = SimplexEngine(M).solve()
    b = HighsEngine(M).solve()
    assert a.status == b.status
    if a.status is LpStatus.OPTIMAL:
        assert abs(a.value - b.value) < 1e-6
        assert M.max_violation(a.point) < 1e-7
        assert a.point.min() >= -1e-9 and a.point.max() <= 1 + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_warm_start_bounds(seed):
    rng = np.random.default_rng(seed)
    M, _, _ = _random_model(rng, 7, 5)
    eng = SimplexEngine(M)
    eng.solve()
    lo, hi = np.zeros(7), np.ones(7)
    for _ in range(4):
        j = int(rng.integers(7))
        lo[j] = hi[j] = float(rng.integers(2))
        a = eng.solve(lo.copy(), hi.copy())
        b = HighsEngine(M).solve(lo.copy(), hi.copy())
        assert a.status == b.status
        if a.status is LpStatus.OPTIMAL:
            assert abs(a.value - b.value) < 1e-6


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["simplex", "highs"]))
def test_bnb_matches_enumeration(seed, engine):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    M, c, rows = _random_model(rng, n, int(rng.integers(1, 6)))
    best = brute_force_binary(c, rows)
    res = solve_bnb(M, BnbParams(time_limit=30, gap_tol=0.0, engine=engine))
    if np.isinf(best):
        assert res.status is IpStatus.INFEASIBLE
    else:
        assert res.status is IpStatus.OPTIMAL
        assert abs(res.value - best) < 1e-9
        assert M.is_feasible(res.incumbent)


def test_bnb_deterministic():
    rng = np.random.default_rng(11)
    M, _, _ = _random_model(rng, 12, 8)
    a = solve_bnb(M, BnbParams(seed=3))
    b = solve_bnb(M, BnbParams(seed=3))
    assert a.nodes == b.nodes and a.value == b.value
    if a.incumbent is not None:
        assert (a.incumbent == b.incumbent).all()


def test_heuristic_candidates_are_checked():
    M = Model()
    a, b = M.add_var(-1.0), M.add_var(-1.0)
    M.add_constraint([a, b], [1.0, 1.0], "<=", 1.0)
    res = solve_bnb(M, BnbParams(heuristic=lambda lp, seed: np.array([1.0, 1.0])))
    assert res.value == -1.0


def test_bnb_params_validation():
    with pytest.raises(ValueError):
        BnbParams(time_limit=0)
    with pytest.raises(ValueError):
        BnbParams(gap_tol=-1)
