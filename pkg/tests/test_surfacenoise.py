import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from nvrelaxo.spinphysics import MAGIC_ANGLE
from nvrelaxo.surfacenoise import (
    ENSEMBLE_DEPTHS,
    PILLAR_DEPTHS_NARROW,
    DepthDistribution,
    SurfaceNoiseModel,
    background_rate,
    background_rate_cdf,
    background_rate_pdf,
    c_surf_from_sigma,
    depth_from_rate,
    pdf_mode_depth,
    rate_ceiling,
    sample_depths,
    sigma_from_c_surf,
    surface_coupling,
)

from oracles import rate_cdf_quadrature, surface_b2_quadrature, truncnorm_moments


@pytest.mark.parametrize("tilt", [MAGIC_ANGLE, 0.0])
@pytest.mark.parametrize("depth", [2.0, 5.0, 10.0, 20.0])
def test_sheet_coupling_matches_quadrature(tilt, depth):
    model = SurfaceNoiseModel(sigma_surf=0.4, axis_tilt=tilt)
    assert surface_coupling(model, depth) == pytest.approx(surface_b2_quadrature(depth, tilt, 0.4), rel=1e-9)


def test_magic_to_normal_ratio():
    magic = surface_coupling(SurfaceNoiseModel(axis_tilt=MAGIC_ANGLE), 5.0)
    normal = surface_coupling(SurfaceNoiseModel(axis_tilt=0.0), 5.0)
    assert magic / normal == pytest.approx(4 / 3, rel=1e-14)


def test_unsupported_tilt():
    with pytest.raises(ValueError):
        SurfaceNoiseModel(axis_tilt=0.5)


def test_c_surf_anchor_values():
    # C_surf at the two headline surface densities
    assert c_surf_from_sigma(0.40, 0.28e-9) == pytest.approx(2.13e6, rel=5e-3)
    assert c_surf_from_sigma(0.50, 0.28e-9) == pytest.approx(2.66e6, rel=5e-3)
    assert sigma_from_c_surf(2.7e6, 0.28e-9) == pytest.approx(0.507, abs=2e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(1.5, 40.0))
def test_rate_scales_as_inverse_fourth_power(sigma, depth):
    m = SurfaceNoiseModel(sigma_surf=sigma)
    assert m.rate(depth) - m.gamma_bulk == pytest.approx(m.c_surf / depth**4, rel=1e-12)
    assert m.rate(2 * depth) - m.gamma_bulk == pytest.approx((m.rate(depth) - m.gamma_bulk) / 16, rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.5, 40.0))
def test_depth_round_trip(depth):
    r = background_rate(2.7e6, 100.0, depth)
    assert depth_from_rate(2.7e6, 100.0, r) == pytest.approx(depth, rel=1e-12)


def test_from_c_surf():
    m = SurfaceNoiseModel.from_c_surf(2.7e6)
    assert m.c_surf == pytest.approx(2.7e6, rel=1e-12)


@pytest.mark.parametrize("dist", [ENSEMBLE_DEPTHS, PILLAR_DEPTHS_NARROW, DepthDistribution(1.0, 1.0, 2.0)])
def test_truncated_moments(dist):
    mean, var = truncnorm_moments(dist.mu, dist.sigma, dist.d_min)
    assert dist.mean() == pytest.approx(mean, rel=1e-12)
    assert dist.variance() == pytest.approx(var, rel=1e-12)
    norm, _ = integrate.quad(dist.pdf, dist.d_min, np.inf)
    assert norm == pytest.approx(1.0, abs=1e-10)


def test_sampled_depths_follow_truncated_normal():
    d = sample_depths(ENSEMBLE_DEPTHS, 200_000, 5)
    assert d.min() >= 2.0
    a = (2.0 - 6.5) / 2.8
    ks = stats.kstest(d, stats.truncnorm(a, np.inf, loc=6.5, scale=2.8).cdf)
    assert ks.statistic < 0.005
    np.testing.assert_array_equal(d[:1000], sample_depths(ENSEMBLE_DEPTHS, 200_000, 5)[:1000])


def test_sampling_gives_up_on_vanishing_mass():
    with pytest.raises(RuntimeError):
        sample_depths(DepthDistribution(-100.0, 1.0, 2.0), 10, 0)


@pytest.mark.parametrize("c_surf", [2.13e6, 2.7e6])
def test_rate_pdf_normalised(c_surf):
    lo, hi = 100.0, rate_ceiling(c_surf, 100.0, ENSEMBLE_DEPTHS)
    f = lambda g: background_rate_pdf(g, ENSEMBLE_DEPTHS, c_surf, 100.0)
    # integrate in log(gamma - bulk) to resolve the peak and the long tail
    g = lambda u: f(lo + math.exp(u)) * math.exp(u)
    total, _ = integrate.quad(g, math.log(1e-6), math.log(hi - lo), limit=400, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(101.0, 5e5))
def test_rate_cdf_matches_quadrature(gamma):
    ours = background_rate_cdf(gamma, ENSEMBLE_DEPTHS, 2.7e6, 100.0)
    assert ours == pytest.approx(rate_cdf_quadrature(gamma, 6.5, 2.8, 2.0, 2.7e6, 100.0), abs=1e-9)


def test_pdf_is_derivative_of_cdf():
    g = np.geomspace(150, 5e4, 50)
    h = g * 1e-6
    num = (background_rate_cdf(g + h, ENSEMBLE_DEPTHS, 2.7e6, 100.0)
           - background_rate_cdf(g - h, ENSEMBLE_DEPTHS, 2.7e6, 100.0)) / (2 * h)
    np.testing.assert_allclose(background_rate_pdf(g, ENSEMBLE_DEPTHS, 2.7e6, 100.0), num, rtol=1e-5)


def test_pdf_peak_location():
    dist = ENSEMBLE_DEPTHS
    d_star = pdf_mode_depth(dist)
    g = np.linspace(101, 3000, 200_001)
    p = background_rate_pdf(g, dist, 2.7e6, 100.0)
    peak_depth = depth_from_rate(2.7e6, 100.0, g[np.argmax(p)])
    assert peak_depth == pytest.approx(d_star, rel=1e-3)
    assert d_star > dist.mu


def test_pdf_support():
    ceiling = rate_ceiling(2.7e6, 100.0, ENSEMBLE_DEPTHS)
    assert background_rate_pdf(99.0, ENSEMBLE_DEPTHS, 2.7e6, 100.0) == 0.0
    assert background_rate_pdf(ceiling * 1.01, ENSEMBLE_DEPTHS, 2.7e6, 100.0) == 0.0
    assert background_rate_cdf(ceiling * 1.01, ENSEMBLE_DEPTHS, 2.7e6, 100.0) == pytest.approx(1.0)


def test_pdf_matches_transformed_samples():
    d = sample_depths(ENSEMBLE_DEPTHS, 10**6, 11)
    rates = background_rate(2.7e6, 100.0, d)
    ks = stats.kstest(rates, lambda g: background_rate_cdf(g, ENSEMBLE_DEPTHS, 2.7e6, 100.0))
    assert ks.statistic < 0.01


def test_bad_depths():
    with pytest.raises(ValueError):
        background_rate(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        depth_from_rate(1.0, 100.0, 50.0)
    with pytest.raises(ValueError):
        DepthDistribution(sigma=0.0)
