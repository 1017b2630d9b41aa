"""Closed-form relaxation physics of an NV center coupled to fluctuating spins.

Covers the three-level rate equation of the NV ground state, the Lorentzian
spectral weight of an exponentially correlated noise source, the dipolar
transverse coupling of a label spin, and the resulting T1 acceleration.

Units are strict SI internally: metres, seconds, rad/s. Spin quantum numbers
are stored as ``2S`` integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "GAMMA_E",
    "PhysicalConstants",
    "SpinLabelSpec",
    "LabelSite",
    "RateEquationParams",
    "MN_II",
    "SURFACE_SPIN",
    "nv_axis",
    "dipolar_prefactor",
    "transverse_coupling",
    "coupling_kernel",
    "lorentzian_weight",
    "induced_rate",
    "solve_populations",
    "difference_signal",
    "t1_signal",
]

#: free-electron gyromagnetic ratio (rad s^-1 T^-1), CODATA 2018
GAMMA_E = 1.76085963e11
MAGIC_ANGLE = math.acos(1.0 / math.sqrt(3.0))


@dataclass(frozen=True)
class PhysicalConstants:
    mu0: float = 1.25663706212e-6
    hbar: float = 1.054571817e-34
    gamma_nv: float = GAMMA_E
    omega0: float = 2.0 * math.pi * 2.87e9

    def __post_init__(self):
        for name in ("mu0", "hbar", "gamma_nv", "omega0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class SpinLabelSpec:
    """One paramagnetic species: spin ``two_s / 2``, gyromagnetic ratio, noise correlation time."""

    two_s: int
    gamma: float = GAMMA_E
    tau_c: float = 1e-10
    name: str = ""

    def __post_init__(self):
        if not (isinstance(self.two_s, (int, np.integer)) and 1 <= self.two_s <= 7):
            raise ValueError(f"2S must be an integer in [1, 7], got {self.two_s!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.tau_c > 0:
            raise ValueError("tau_c must be positive")

    @classmethod
    def from_spin(cls, spin, **kwargs) -> "SpinLabelSpec":
        two_s = Fraction(spin) * 2
        if two_s.denominator != 1:
            raise ValueError(f"spin {spin!r} is not a multiple of 1/2")
        return cls(two_s=int(two_s), **kwargs)

    @property
    def spin_s(self) -> Fraction:
        return Fraction(self.two_s, 2)

    @property
    def spin_factor(self) -> float:
        """S(S+1)/3, exact from the rational spin."""
        s = self.spin_s
        return float(s * (s + 1) / 3)


#: Mn(II); tau_c from a 3 GHz linewidth read as 1/(2 pi tau_c)
MN_II = SpinLabelSpec(two_s=5, gamma=GAMMA_E, tau_c=1.0 / (2.0 * math.pi * 3e9), name="Mn(II)")
#: surface dangling-bond electron spin
SURFACE_SPIN = SpinLabelSpec(two_s=1, gamma=GAMMA_E, tau_c=0.28e-9, name="surface")


@dataclass(frozen=True)
class LabelSite:
    position: tuple  # metres, relative to the NV
    multiplicity: int = 1
    spec: SpinLabelSpec = field(default=MN_II)

    def __post_init__(self):
        pos = tuple(float(x) for x in self.position)
        if len(pos) != 3:
            raise ValueError("position must be a 3-vector")
        object.__setattr__(self, "position", pos)
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")
        if math.hypot(*pos) == 0.0:
            raise ValueError("label site coincides with the NV center")


@dataclass(frozen=True)
class RateEquationParams:
    k01: float
    k11: float = 0.0

    def __post_init__(self):
        if self.k01 < 0 or self.k11 < 0:
            raise ValueError("transition rates must be non-negative")


def nv_axis(tilt: float, azimuth: float = 0.0) -> np.ndarray:
    """Unit NV quantization axis tilted by ``tilt`` from the surface normal (+z)."""
    return np.array(
        [math.sin(tilt) * math.cos(azimuth), math.sin(tilt) * math.sin(azimuth), math.cos(tilt)]
    )


def dipolar_prefactor(gamma: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """mu0 gamma gamma_NV hbar / 4 pi, in rad/s * m^3."""
    return constants.mu0 / (4.0 * math.pi) * gamma * constants.gamma_nv * constants.hbar


def coupling_kernel(positions, axis, spin_factor: float, gamma: float,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Vectorised b_perp^2 for label positions of shape (..., 3), one spin each.

    Returns (rad/s)^2. Zero-length positions raise ``ValueError``.
    """
    pos = np.asarray(positions, dtype=float)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    r2 = np.einsum("...i,...i->...", pos, pos)
    if np.any(r2 == 0.0):
        raise ValueError("label site coincides with the NV center")
    cos2 = np.einsum("...i,i->...", pos, axis) ** 2 / r2
    sin2 = 1.0 - cos2
    amp = spin_factor * dipolar_prefactor(gamma, constants) ** 2
    return amp * (2.0 + 3.0 * sin2) / r2**3


def transverse_coupling(site: LabelSite, axis, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Transverse coupling b_perp^2 of one (possibly multiply occupied) site."""
    b2 = coupling_kernel(site.position, axis, site.spec.spin_factor, site.spec.gamma, constants)
    return float(site.multiplicity * b2)


def lorentzian_weight(tau_c, omega):
    """2 tau_c / (1 + (omega tau_c)^2), in seconds."""
    tau_c = np.asarray(tau_c, dtype=float)
    if np.any(tau_c <= 0):
        raise ValueError("tau_c must be positive")
    out = 2.0 * tau_c / (1.0 + (np.asarray(omega, dtype=float) * tau_c) ** 2)
    return float(out) if out.ndim == 0 else out


def rate_factor(tau_c: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Converts b_perp^2 into a T1 rate: 3 tau_c / (1 + (omega0 tau_c)^2)."""
    return 1.5 * lorentzian_weight(tau_c, constants.omega0)


def induced_rate(sites: Sequence[LabelSite], axis, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Relaxation-rate acceleration (s^-1) from independent label sites."""
    if not sites:
        return 0.0
    terms = [transverse_coupling(s, axis, constants) * rate_factor(s.spec.tau_c, constants) for s in sites]
    return math.fsum(terms)


def solve_populations(params: RateEquationParams, init, t):
    """Populations (n0, n-1, n+1) at time ``t`` from the closed-form rate-equation solution."""
    n0, nm, np_ = (float(x) for x in init)
    if min(n0, nm, np_) < 0 or abs(n0 + nm + np_ - 1.0) > 1e-12:
        raise ValueError("initial populations must lie on the probability simplex")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    fast = np.exp(-3.0 * params.k01 * t)
    dq = np.exp(-(params.k01 + 2.0 * params.k11) * t)
    third = 1.0 / 3.0
    p0 = third + (n0 - third) * fast
    half_split = 0.5 * (np_ - nm) * dq
    common = third - 0.5 * (n0 - third) * fast
    return p0, common - half_split, common + half_split


def difference_signal(params: RateEquationParams, t):
    """n0 after |0> preparation minus n0 after |-1> preparation, normalised at t=0."""
    bright, dark = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
    diff = solve_populations(params, bright, t)[0] - solve_populations(params, dark, t)[0]
    diff0 = solve_populations(params, bright, 0.0)[0] - solve_populations(params, dark, 0.0)[0]
    return diff / diff0


def t1_signal(k01, t):
    """Normalised T1 curve exp(-3 k01 t)."""
    k01 = np.asarray(k01, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(k01 < 0) or np.any(t < 0):
        raise ValueError("k01 and t must be non-negative")
    out = np.exp(-3.0 * k01 * t)
    return float(out) if out.ndim == 0 else out
