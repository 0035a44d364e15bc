import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from natap.circuit import Circuit, h, rzz
from natap.qaoa import (MaxCutInstance, QaoaError, QaoaParams, build_qaoa_circuit, expected_cut,
                        generate_maxcut_instance, matching_order, maxcut_optimum, optimize_parameters,
                        predict_noisy_ratio, qaoa_expectation, simulate, uniform_ratio)

from oracles import maxcut_brute, statevector

EDGE = MaxCutInstance(2, ((0, 1),))


def test_generated_sizes():
    assert len(generate_maxcut_instance("line", 14).edges) == 13
    assert len(generate_maxcut_instance("complete", 5).edges) == 10
    g = generate_maxcut_instance("three_regular", 10, 7)
    assert len(g.edges) == 15
    deg = np.bincount(np.array(g.edges).ravel(), minlength=10)
    assert (deg == 3).all()
    assert generate_maxcut_instance("three_regular", 10, 7) == g


def test_generation_errors():
    with pytest.raises(QaoaError):
        generate_maxcut_instance("three_regular", 7)
    with pytest.raises(QaoaError):
        MaxCutInstance(3, ((0, 1), (1, 0)))


def test_maxcut_optimum_examples():
    assert maxcut_optimum(generate_maxcut_instance("line", 14)) == 13
    assert maxcut_optimum(generate_maxcut_instance("complete", 5)) == 6
    assert maxcut_optimum(EDGE) == 1
    with pytest.raises(QaoaError):
        maxcut_optimum(generate_maxcut_instance("line", 30))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_maxcut_against_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    edges = tuple((i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5)
    inst = MaxCutInstance(n, edges)
    assert maxcut_optimum(inst) == maxcut_brute(n, edges)


def test_circuit_shape():
    c = build_qaoa_circuit(EDGE, QaoaParams(1, (0.3,), (0.2,)))
    assert [g.kind for g in c.gates] == ["h", "h", "rzz", "rx", "rx"]
    inst = generate_maxcut_instance("complete", 5)
    c = build_qaoa_circuit(inst, QaoaParams(2, (0.1, 0.2), (0.3, 0.4)))
    assert len(c.gates) == 5 + 2 * (10 + 5)


def test_matching_order_is_a_permutation_of_disjoint_runs():
    edges = generate_maxcut_instance("complete", 6).edges
    order = matching_order(edges)
    assert sorted(order) == sorted(edges)
    assert order[:3] == [(0, 1), (2, 3), (4, 5)]


def test_zero_angles_give_uniform_cut():
    inst = generate_maxcut_instance("complete", 5)
    r = qaoa_expectation(inst, QaoaParams(1, (0.0,), (0.0,)))
    assert r["expected_cut"] == pytest.approx(5.0)
    assert r["ratio"] == pytest.approx(5 / 6)
    assert uniform_ratio(inst) == pytest.approx(5 / 6)


def test_single_edge_reaches_one():
    par = optimize_parameters(EDGE, 1, seed=0)
    assert qaoa_expectation(EDGE, par)["ratio"] == pytest.approx(1.0, abs=1e-4)
    # known optimum: gamma = pi/4, beta = pi/8 (grid search confirms max expected cut 1)
    grid = [qaoa_expectation(EDGE, QaoaParams(1, (g,), (b,)))["expected_cut"]
            for g in np.linspace(0, math.pi, 41) for b in np.linspace(0, math.pi / 2, 41)]
    assert max(grid) == pytest.approx(1.0, abs=1e-9)


def test_line6_floor_and_restarts():
    inst = generate_maxcut_instance("line", 6)
    r8 = qaoa_expectation(inst, optimize_parameters(inst, 1, seed=0, restarts=8))["ratio"]
    r1 = qaoa_expectation(inst, optimize_parameters(inst, 1, seed=0, restarts=1))["ratio"]
    assert r8 >= 0.69 and r8 >= r1 - 1e-12


def test_ratio_monotone_with_warm_start():
    inst = generate_maxcut_instance("line", 6)
    prev, ratios = None, []
    for p in (1, 2, 3):
        prev = optimize_parameters(inst, p, seed=0, warm_start=prev)
        ratios.append(qaoa_expectation(inst, prev)["ratio"])
    assert all(b >= a - 1e-9 for a, b in zip(ratios, ratios[1:]))


def test_basis_state_cuts():
    # without the mixer and the initial H the state is a basis state; rzz only adds phase
    inst = MaxCutInstance(3, ((0, 1), (1, 2)))
    c = Circuit(3, (rzz(0, 1, 0.7), rzz(1, 2, 0.2)))
    psi = simulate(c)
    assert expected_cut(psi, inst) == pytest.approx(0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_simulator_matches_reference(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    edges = tuple((i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5) or ((0, 1),)
    inst = MaxCutInstance(n, edges)
    par = QaoaParams(2, tuple(rng.uniform(0, 3, 2)), tuple(rng.uniform(0, 1.5, 2)))
    c = build_qaoa_circuit(inst, par)
    psi = simulate(c, check_norm=True)
    ref = statevector(n, [(g.kind, g.qubits, g.angle) for g in c.gates])
    assert np.allclose(psi, ref, atol=1e-12)
    dense = qaoa_expectation(inst, par)["expected_cut"]
    assert expected_cut(psi, inst) == pytest.approx(dense, abs=1e-9)


def test_prediction_limits_and_monotonicity():
    assert predict_noisy_ratio(0.0, None, 0.9, 0.5) == pytest.approx(0.9)
    assert predict_noisy_ratio(1e6, None, 0.9, 0.5) == pytest.approx(0.5)
    a = predict_noisy_ratio(0.2, None, 0.9, 0.5)
    b = predict_noisy_ratio(0.3, None, 0.9, 0.5)
    assert a > b
    with pytest.raises(QaoaError):
        predict_noisy_ratio(0.1, None, 0.4, 0.5)


def test_simulation_guard():
    with pytest.raises(QaoaError):
        qaoa_expectation(generate_maxcut_instance("line", 20), QaoaParams(1, (0.1,), (0.1,)))
    with pytest.raises(QaoaError):
        simulate(Circuit(25, (h(0),)))
