
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvrelaxo.ensemble import T1Curve, add_measurement_noise, default_tau_grid
from nvrelaxo.fitters import DecayModel, FitError, fit, r_squared, weighted_rate, weighted_rate_from_params

GRID = default_tau_grid(5e-3, 41)


def biexp_curve(a_s, t_s, a_l, t_l, grid=GRID):
    return T1Curve(grid, a_s * np.exp(-grid / t_s) + a_l * np.exp(-grid / t_l))


biexp_params = st.tuples(
    st.floats(0.1, 0.9), st.floats(5e-5, 4e-4), st.floats(4.0, 20.0)
).map(lambda p: (p[0], p[1], 1.0 - p[0], p[1] * p[2]))


@settings(max_examples=40, deadline=None)
@given(biexp_params)
def test_exact_biexp_recovered(p):
    res = fit(biexp_curve(*p), "biexp")
    assert res.converged and not res.collapsed
    got = res.params
    assert got["T_s"] == pytest.approx(p[1], rel=1e-6)
    assert got["T_l"] == pytest.approx(p[3], rel=1e-6)
    assert got["A_s"] == pytest.approx(p[0], rel=1e-6)
    assert res.r_squared == pytest.approx(1.0, abs=1e-12)
    assert res.derived_rates["gamma_w"] == pytest.approx(weighted_rate_from_params(*p), rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(biexp_params, st.floats(0.01, 100.0))
def test_time_scaling_equivariance(p, c):
    curve = biexp_curve(*p)
    stretched_axis = T1Curve(curve.tau * c, curve.intensity)
    base, scaled = fit(curve, "biexp"), fit(stretched_axis, "biexp")
    assert scaled.params["T_l"] == pytest.approx(base.params["T_l"] * c, rel=1e-6)
    assert scaled.derived_rates["gamma_w"] == pytest.approx(base.derived_rates["gamma_w"] / c, rel=1e-6)
    for family in ("single_exp", "stretched"):
        b, s = fit(curve, family), fit(stretched_axis, family)
        assert s.params["T"] == pytest.approx(b.params["T"] * c, rel=1e-5)
        assert s.r_squared == pytest.approx(b.r_squared, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(biexp_params, st.floats(0.05, 20.0))
def test_amplitude_scaling_equivariance(p, k):
    curve = biexp_curve(*p)
    for family in ("single_exp", "stretched", "biexp"):
        base = fit(curve, family)
        scaled = fit(T1Curve(curve.tau, curve.intensity * k), family)
        assert scaled.r_squared == pytest.approx(base.r_squared, abs=1e-8)
        for name, v in base.derived_rates.items():
            assert scaled.derived_rates[name] == pytest.approx(v, rel=1e-5)


@settings(max_examples=40, deadline=None)
@given(biexp_params, st.integers(0, 2**32 - 1))
def test_model_nesting(p, seed):
    # biexp contains single_exp; stretched contains it at beta = 1
    curve = add_measurement_noise(biexp_curve(*p), 0.01, seed)
    single = fit(curve, "single_exp")
    assert fit(curve, "biexp").r_squared >= single.r_squared - 1e-12
    assert fit(curve, "stretched").r_squared >= single.r_squared - 1e-9


def test_single_exp_data_collapses_biexp():
    curve = T1Curve(GRID, 0.9 * np.exp(-GRID / 1e-3))
    res = fit(curve, "biexp")
    assert res.collapsed
    assert res.params["A_s"] == 0.0
    assert res.derived_rates["gamma_w"] == pytest.approx(1e3, rel=1e-9)
    assert res.derived_rates["gamma_long"] == pytest.approx(1e3, rel=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_stretched_on_exponential_data(seed):
    curve = add_measurement_noise(T1Curve(GRID, np.exp(-GRID / 1e-3)), 0.002, seed)
    res = fit(curve, "stretched")
    assert res.params["beta"] == pytest.approx(1.0, abs=0.02)


def test_stretched_recovers_beta():
    true = DecayModel("stretched", {"A": 1.0, "T": 1e-3, "beta": 0.6})
    res = fit(T1Curve(GRID, true(GRID)), "stretched")
    assert res.params["beta"] == pytest.approx(0.6, rel=1e-6)
    assert res.derived_rates["gamma_stre"] == pytest.approx(1e3, rel=1e-6)


def test_preconditions():
    short = T1Curve([0.0, 1e-4, 2e-4, 3e-4], [1.0, 0.8, 0.6, 0.5])
    with pytest.raises(FitError):
        fit(short, "biexp")
    with pytest.raises(FitError):
        fit(T1Curve(GRID, np.ones_like(GRID)), "single_exp")
    with pytest.raises(ValueError):
        fit(biexp_curve(0.5, 1e-4, 0.5, 1e-3), "triexp")


def test_r_squared_and_weighted_rate_helpers():
    curve = biexp_curve(0.5, 1e-4, 0.5, 1e-3)
    res = fit(curve, "biexp")
    assert r_squared(curve, res.model) == pytest.approx(res.r_squared)
    assert weighted_rate(res) == pytest.approx(res.derived_rates["gamma_w"])
    with pytest.raises(ValueError):
        weighted_rate(fit(curve, "single_exp"))
    doc = res.to_json()
    assert doc["family"] == "biexp" and doc["converged"] is True


def test_fit_is_deterministic():
    curve = add_measurement_noise(biexp_curve(0.4, 2e-4, 0.6, 2e-3), 0.01, 9)
    a, b = fit(curve, "biexp"), fit(curve, "biexp")
    assert a.params == b.params and a.iterations == b.iterations
