"""Independent reference implementations used only by the tests.

None of these import the code under test; each recomputes a quantity by a
different route (arbitrary precision, explicit ODE integration, numerical
quadrature) so agreement is meaningful.
"""

import math

import mpmath
import numpy as np
from scipy import integrate, special

MU0 = 1.25663706212e-6
HBAR = 1.054571817e-34
GAMMA_E = 1.76085963e11
OMEGA0 = 2 * math.pi * 2.87e9


def coupling_mp(pos_m, axis, two_s, gamma=GAMMA_E, dps=40):
    """b_perp^2 of one spin at ``pos_m`` (metres) computed in arbitrary precision."""
    with mpmath.workdps(dps):
        s = mpmath.mpf(two_s) / 2
        x, y, z = (mpmath.mpf(float(v)) for v in pos_m)
        ax = [mpmath.mpf(float(v)) for v in axis]
        na = mpmath.sqrt(sum(a * a for a in ax))
        ax = [a / na for a in ax]
        r2 = x * x + y * y + z * z
        cos = (x * ax[0] + y * ax[1] + z * ax[2]) / mpmath.sqrt(r2)
        pref = mpmath.mpf(MU0) / (4 * mpmath.pi) * mpmath.mpf(gamma) * mpmath.mpf(GAMMA_E) * mpmath.mpf(HBAR)
        return float(s * (s + 1) / 3 * pref**2 * (2 + 3 * (1 - cos**2)) / r2**3)


def rk4_populations(k01, k11, init, t, steps=4000):
    """Integrate the three-level rate equations with classical RK4."""
    m = np.array([[-2 * k01, k01, k01], [k01, -k01 - k11, k11], [k01, k11, -k01 - k11]])
    y = np.array(init, dtype=float)  # ordering (n0, n-1, n+1)
    if t == 0:
        return y
    h = t / steps
    for _ in range(steps):
        a = m @ y
        b = m @ (y + 0.5 * h * a)
        c = m @ (y + 0.5 * h * b)
        d = m @ (y + h * c)
        y = y + h / 6 * (a + 2 * b + 2 * c + d)
    return y


def surface_b2_quadrature(depth_nm, tilt, sigma_nm2, two_s=1, gamma=GAMMA_E):
    """Surface-sheet b_perp^2 by direct 2D quadrature over the sheet (polar coordinates)."""
    s = two_s / 2
    amp = s * (s + 1) / 3 * (MU0 / (4 * math.pi) * gamma * GAMMA_E * HBAR) ** 2
    n = (math.sin(tilt), 0.0, math.cos(tilt))
    d = depth_nm

    def integrand(rho, phi):
        x, y = rho * math.cos(phi), rho * math.sin(phi)
        r2 = x * x + y * y + d * d
        cos2 = (x * n[0] + y * n[1] + d * n[2]) ** 2 / r2
        return rho * (2 + 3 * (1 - cos2)) / r2**3

    # substitute rho = d * tan(u) to map [0, inf) onto [0, pi/2)
    def mapped(u, phi):
        rho = d * math.tan(u)
        return integrand(rho, phi) * d / math.cos(u) ** 2

    val, _ = integrate.dblquad(mapped, 0.0, 2 * math.pi, 0.0, math.pi / 2, epsabs=0, epsrel=1e-11)
    return amp * sigma_nm2 * val * 1e18 * 1e36  # sigma in nm^-2, integral in nm^-4


def truncnorm_moments(mu, sigma, lo):
    a = (lo - mu) / sigma
    z = 1 - special.ndtr(a)
    phi = math.exp(-a * a / 2) / math.sqrt(2 * math.pi)
    mean = mu + sigma * phi / z
    var = sigma**2 * (1 + a * phi / z - (phi / z) ** 2)
    return mean, var


def rate_cdf_quadrature(gamma, mu, sigma, lo, c_surf, gamma_bulk):
    """P(Gamma_BG <= gamma) by integrating the depth density over d >= (c/(gamma-bulk))^(1/4)."""
    d_cut = max(lo, (c_surf / (gamma - gamma_bulk)) ** 0.25)
    z = 1 - special.ndtr((lo - mu) / sigma)
    pdf = lambda d: math.exp(-0.5 * ((d - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi) * z)
    val, _ = integrate.quad(pdf, d_cut, np.inf, epsabs=1e-13)
    return val
