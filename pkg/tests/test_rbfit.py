import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from natap.hwgraph import line
from natap.rbfit import (CalibrationData, CalibrationError, DecayCurve, DecayFit, ErrEstimate, FitError,
                         NoiseModel, assemble_noise_model, epc_factor, error_rate_ratio, fit_decay,
                         load_err_table, save_err_table)

LENGTHS = tuple(range(1, 301, 10))


def _curve(alpha, A=0.5, B=0.5, lengths=LENGTHS, sigma=0.0, rng=None):
    vals = []
    for m in lengths:
        p = A * alpha ** m + B
        if sigma:
            p = float(np.clip(p + rng.normal(0, sigma), 0, 1))
        vals.append((p,))
    return DecayCurve(lengths, tuple(vals))


def _fit(alpha, epc, stderr=0.0, n=1):
    return DecayFit(0.5, alpha, 0.5, stderr, epc, n)


def test_curve_validation():
    with pytest.raises(ValueError):
        DecayCurve((1, 1), ((0.5,), (0.5,)))
    with pytest.raises(ValueError):
        DecayCurve((1,), ((1.2,),))


def test_exact_points_recover_alpha():
    f = fit_decay(_curve(0.99), 1)
    assert abs(f.alpha - 0.99) < 1e-6
    assert abs(f.epc - 0.005) < 1e-8


def test_alpha_one_gives_zero_epc():
    f = fit_decay(DecayCurve((1, 5, 10), ((0.97,), (0.97,), (0.97,))), 1)
    assert f.alpha == 1.0 and f.epc == 0.0


def test_constant_at_depolarized_level_is_degenerate():
    with pytest.raises(FitError):
        fit_decay(DecayCurve((1, 5, 10), ((0.5,), (0.5,), (0.5,))), 1)


def test_too_few_lengths():
    with pytest.raises(FitError):
        fit_decay(DecayCurve((1, 5), ((0.9,), (0.8,))), 1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.9, 0.999), st.integers(1, 2), st.integers(0, 10_000))
def test_epc_identity_always_holds(alpha, n, seed):
    rng = np.random.default_rng(seed)
    f = fit_decay(_curve(alpha, 1 - 1 / 2 ** n - 0.02, 1 / 2 ** n, sigma=0.005, rng=rng), n)
    assert f.epc == epc_factor(n) * (1 - f.alpha)


def test_ratio_examples():
    a = _fit(0.9, 0.05)
    r = error_rate_ratio(a, a)
    assert r.ratio == 1
    r = error_rate_ratio(_fit(0.9, 0.05), _fit(0.99, 0.005))
    assert math.isclose(r.ratio, 10.0) and r.stderr == 0.0


def test_ratio_undefined_without_isolated_error():
    with pytest.raises(ValueError):
        error_rate_ratio(_fit(0.9, 0.05), _fit(1.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 0.1), st.floats(1e-4, 0.1), st.floats(0.01, 100))
def test_ratio_scale_consistent(ep, ei, c):
    r1 = error_rate_ratio(_fit(1 - 2 * ep, ep), _fit(1 - 2 * ei, ei)).ratio
    r2 = error_rate_ratio(_fit(1 - 2 * ep * c, ep * c), _fit(1 - 2 * ei * c, ei * c)).ratio
    assert math.isclose(r1, r2, rel_tol=1e-9)


def test_ratio_stderr_matches_resampling():
    # first-order propagation checked against resampled EPC pairs
    rng = np.random.default_rng(5)
    ep, sp, ei, si = 0.02, 0.0008, 0.005, 0.0002
    fp = _fit(1 - 2 * ep, ep, 2 * sp)
    fi = _fit(1 - 2 * ei, ei, 2 * si)
    est = error_rate_ratio(fp, fi)
    samples = rng.normal(ep, sp, 200_000) / rng.normal(ei, si, 200_000)
    assert abs(est.stderr - samples.std()) / samples.std() < 0.10


def _calib():
    return CalibrationData((0.02, 0.01, 0.03), (0.0, 0.01, 0.01), {(0, 1): 0.01, (1, 2): 0.02})


def test_noise_model_terms():
    errs = [ErrEstimate((0, 1), 2, 11.0, 0.1), ErrEstimate((1, 2), 0, 0.9, 0.1)]
    M = assemble_noise_model(_calib(), errs, 10, line(3))
    assert M.E_qubit(0) == pytest.approx(0.01)
    assert M.E_arc(1, 0) == 0.01
    # E_k for k=2 is (0.03 + 0.01) / 2 = 0.02
    assert M.E_crosstalk(0, 1, 2) == pytest.approx(10 * 0.02)
    assert M.E_crosstalk(1, 2, 0) == 0.0
    assert (((1, 2), 0)) not in M.crosstalk_cost


def test_unit_ratio_costs_nothing():
    M = assemble_noise_model(_calib(), [ErrEstimate((0, 1), 2, 1.0, 0.0)], 10, line(3))
    assert M.crosstalk_cost == {}


def test_keep_top_truncates():
    H = line(6)
    cal = CalibrationData((0.02,) * 6, (0.01,) * 6, {e: 0.01 for e in H.edges})
    errs = [ErrEstimate((1, 2), 0, 5.0, 0), ErrEstimate((1, 2), 3, 4.0, 0), ErrEstimate((2, 3), 1, 3.0, 0),
            ErrEstimate((3, 4), 5, 6.0, 0)]
    M = assemble_noise_model(cal, errs, 2, H)
    assert set(M.crosstalk_cost) == {((3, 4), 5), ((1, 2), 0)}


def test_missing_calibration_entry_named():
    cal = CalibrationData((0.02, 0.01, 0.03), (0.0, 0.01, 0.01), {(0, 1): 0.01})
    with pytest.raises(CalibrationError, match="1, 2|\\(1, 2\\)"):
        assemble_noise_model(cal, [], 10, line(3))


def test_noise_model_round_trip():
    errs = [ErrEstimate((0, 1), 2, 11.0, 0.1)]
    M = assemble_noise_model(_calib(), errs, 10, line(3))
    assert NoiseModel.from_json(M.to_json()) == M


def test_err_table_round_trip(tmp_path):
    errs = [ErrEstimate((0, 1), 2, 1.25, 0.05), ErrEstimate((1, 2), 0, 0.8, 0.02)]
    save_err_table(errs, tmp_path / "e.json")
    assert load_err_table(tmp_path / "e.json") == errs


def test_calibration_round_trip(tmp_path):
    _calib().save(tmp_path / "c.json")
    assert CalibrationData.load(tmp_path / "c.json") == _calib()
    with pytest.raises(CalibrationError):
        CalibrationData.from_json({"qubits": [{"readout_error": 0.1}], "edges": []})
