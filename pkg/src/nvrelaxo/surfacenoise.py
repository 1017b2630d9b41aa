"""Depth-dependent background relaxation from a sheet of surface spins.

A uniform areal density of electron spins on the diamond surface gives a
transverse coupling that falls off as d^-4 with NV depth. Together with a
depth-independent bulk rate this sets the background rate

    Gamma_BG(d) = gamma_bulk + c_surf / d^4

Depths are in nm and densities in nm^-2 at this module's interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from .rng import as_generator
from .spinphysics import (
    DEFAULT_CONSTANTS,
    MAGIC_ANGLE,
    SURFACE_SPIN,
    PhysicalConstants,
    SpinLabelSpec,
    dipolar_prefactor,
    rate_factor,
)

NM = 1e-9
MAX_REJECTIONS = 10**6


def _tilt_branch(axis_tilt: float) -> float:
    """Planar integral of (2 + 3 sin^2) / r^6 times d^4, for the supported cuts."""
    if abs(axis_tilt) < 1e-3:
        return 1.5 * math.pi
    if abs(axis_tilt - MAGIC_ANGLE) < 1e-3:
        return 2.0 * math.pi
    raise ValueError(f"axis_tilt must be 0 or the [100] magic angle, got {axis_tilt!r} rad")


def coupling_amplitude(spec: SpinLabelSpec = SURFACE_SPIN, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """A^2 = S(S+1)/3 (mu0 gamma gamma_NV hbar / 4 pi)^2, in (rad/s)^2 m^6."""
    return spec.spin_factor * dipolar_prefactor(spec.gamma, constants) ** 2


def c_surf_from_sigma(sigma_surf: float, tau_c_surf: float, axis_tilt: float = MAGIC_ANGLE,
                      spec: SpinLabelSpec = SURFACE_SPIN,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Composite coefficient c_surf in s^-1 nm^4 for a density in nm^-2."""
    b2_d4 = _tilt_branch(axis_tilt) * coupling_amplitude(spec, constants) * (sigma_surf / NM**2)  # (rad/s)^2 m^4
    return rate_factor(tau_c_surf, constants) * b2_d4 / NM**4


def sigma_from_c_surf(c_surf: float, tau_c_surf: float, axis_tilt: float = MAGIC_ANGLE,
                      spec: SpinLabelSpec = SURFACE_SPIN,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    return c_surf / c_surf_from_sigma(1.0, tau_c_surf, axis_tilt, spec, constants)


@dataclass(frozen=True)
class SurfaceNoiseModel:
    sigma_surf: float = 0.40
    tau_c_surf: float = 0.28e-9
    gamma_bulk: float = 100.0
    axis_tilt: float = MAGIC_ANGLE
    c_surf_override: float | None = None
    constants: PhysicalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if self.sigma_surf < 0 or self.gamma_bulk < 0:
            raise ValueError("sigma_surf and gamma_bulk must be non-negative")
        if not self.tau_c_surf > 0:
            raise ValueError("tau_c_surf must be positive")
        _tilt_branch(self.axis_tilt)

    @property
    def c_surf(self) -> float:
        if self.c_surf_override is not None:
            return self.c_surf_override
        return c_surf_from_sigma(self.sigma_surf, self.tau_c_surf, self.axis_tilt, constants=self.constants)

    @classmethod
    def from_c_surf(cls, c_surf: float, **kwargs) -> "SurfaceNoiseModel":
        model = cls(**kwargs)
        sigma = sigma_from_c_surf(c_surf, model.tau_c_surf, model.axis_tilt, constants=model.constants)
        return replace(model, sigma_surf=sigma)

    def rate(self, depth):
        return background_rate(self.c_surf, self.gamma_bulk, depth)


@dataclass(frozen=True)
class DepthDistribution:
    """Gaussian NV depth law truncated below ``d_min`` (all nm)."""

    mu: float = 6.5
    sigma: float = 2.8
    d_min: float = 2.0

    def __post_init__(self):
        if not self.sigma > 0 or not self.d_min > 0:
            raise ValueError("sigma and d_min must be positive")

    @property
    def mass(self) -> float:
        """Probability of d >= d_min under the untruncated Gaussian."""
        return float(ndtr((self.mu - self.d_min) / self.sigma))

    def pdf(self, d):
        d = np.asarray(d, dtype=float)
        z = (d - self.mu) / self.sigma
        dens = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi) * self.mass)
        return np.where(d >= self.d_min, dens, 0.0)

    def mean(self) -> float:
        """Closed-form mean of the truncated normal."""
        a = (self.d_min - self.mu) / self.sigma
        phi = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
        return self.mu + self.sigma * phi / self.mass

    def variance(self) -> float:
        a = (self.d_min - self.mu) / self.sigma
        phi = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
        lam = phi / self.mass
        return self.sigma**2 * (1.0 + a * lam - lam**2)


ENSEMBLE_DEPTHS = DepthDistribution(6.5, 2.8, 2.0)
PILLAR_DEPTHS = DepthDistribution(5.5, 2.8, 2.0)
#: the narrower width quoted alongside the single-NV rate histogram
PILLAR_DEPTHS_NARROW = DepthDistribution(5.5, 2.2, 2.0)

DEPTH_PRESETS = {
    "ensemble": ENSEMBLE_DEPTHS,
    "pillar": PILLAR_DEPTHS,
    "pillar-narrow": PILLAR_DEPTHS_NARROW,
}


def surface_coupling(model: SurfaceNoiseModel, depth, spec: SpinLabelSpec = SURFACE_SPIN,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Summed transverse coupling b_surf^2 ((rad/s)^2) of the spin sheet at NV depth ``depth`` nm."""
    d = np.asarray(depth, dtype=float)
    if np.any(d <= 0):
        raise ValueError("depth must be positive")
    sigma_m = model.sigma_surf / NM**2
    out = _tilt_branch(model.axis_tilt) * coupling_amplitude(spec, constants) * sigma_m / (d * NM) ** 4
    return float(out) if out.ndim == 0 else out


def background_rate(c_surf: float, gamma_bulk: float, depth):
    """gamma_bulk + c_surf / d^4 (s^-1), depth in nm."""
    d = np.asarray(depth, dtype=float)
    if np.any(d <= 0):
        raise ValueError("depth must be positive")
    out = gamma_bulk + c_surf / d**4
    return float(out) if out.ndim == 0 else out


def depth_from_rate(c_surf: float, gamma_bulk: float, rate):
    """Inverse of :func:`background_rate`."""
    x = np.asarray(rate, dtype=float) - gamma_bulk
    if np.any(x <= 0):
        raise ValueError("rate must exceed gamma_bulk")
    out = (c_surf / x) ** 0.25
    return float(out) if out.ndim == 0 else out


def sample_depths(dist: DepthDistribution, n: int, seed) -> np.ndarray:
    """Rejection-sample ``n`` depths from the truncated Gaussian.

    ``seed`` is an integer or a ``numpy.random.Generator``. Raises
    ``RuntimeError`` if a million consecutive draws fall below ``d_min``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    out = np.empty(n)
    filled = 0
    misses = 0
    accept = max(dist.mass, 1e-6)
    while filled < n:
        batch = min(1 << 20, int((n - filled) / accept * 1.05) + 32)
        draw = rng.normal(dist.mu, dist.sigma, batch)
        ok = np.flatnonzero(draw >= dist.d_min)
        if ok.size == 0:
            misses += batch
            if misses >= MAX_REJECTIONS:
                raise RuntimeError(
                    f"no depth >= d_min={dist.d_min} nm in {misses} draws; distribution has vanishing mass"
                )
            continue
        misses = 0
        take = ok[: n - filled]
        out[filled:filled + take.size] = draw[take]
        filled += take.size
    return out


def background_rate_pdf(gamma, dist: DepthDistribution, c_surf: float, gamma_bulk: float):
    """Density (s) of Gamma_BG when depths follow ``dist``.

    Change of variables through d = (c_surf / (Gamma - gamma_bulk))^(1/4).
    Zero outside (gamma_bulk, gamma_bulk + c_surf / d_min^4].
    """
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    out = np.zeros_like(g)
    x = g - gamma_bulk
    inside = x > 0
    if c_surf > 0 and np.any(inside):
        xi = x[inside]
        d = (c_surf / xi) ** 0.25
        jac = 0.25 * c_surf**0.25 * xi ** (-1.25)
        out[inside] = dist.pdf(d) * jac
    return float(out[0]) if np.ndim(gamma) == 0 else out


def background_rate_cdf(gamma, dist: DepthDistribution, c_surf: float, gamma_bulk: float):
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    x = g - gamma_bulk
    out = np.zeros_like(g)
    pos = x > 0
    d = (c_surf / x[pos]) ** 0.25
    # P(Gamma <= g) = P(depth >= d)
    tail = ndtr((dist.mu - np.maximum(d, dist.d_min)) / dist.sigma) / dist.mass
    out[pos] = tail
    return float(out[0]) if np.ndim(gamma) == 0 else out


def rate_ceiling(c_surf: float, gamma_bulk: float, dist: DepthDistribution) -> float:
    return gamma_bulk + c_surf / dist.d_min**4


def pdf_mode_depth(dist: DepthDistribution) -> float:
    """Depth at which the background-rate density peaks.

    The d^5 Jacobian pushes the peak deeper than the depth mode:
    maximise phi((d - mu)/sigma) d^5, i.e. d^2 - mu d - 5 sigma^2 = 0.
    """
    d = 0.5 * (dist.mu + math.sqrt(dist.mu**2 + 20.0 * dist.sigma**2))
    return max(d, dist.d_min)
