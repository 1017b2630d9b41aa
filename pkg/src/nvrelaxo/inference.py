"""Monte Carlo inversions from relaxation data to surface and protein densities.

Every driver here follows the same recipe: run the forward model at a set of
candidate parameter values with a fixed master seed, score each simulation
against the data, and report the best candidate. NV populations are generated
in fixed-size chunks with per-chunk random streams, so results do not depend
on the number of worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .ensemble import RatePopulation, T1Curve, add_measurement_noise, default_tau_grid, synthesize_curve
from .fitters import FitError, fit
from .parallel import ordered_map
from .rng import substream
from .scene import LabelPlane, SaGeometry, batch_signals, plane_batch, sa_batch
from .spinphysics import DEFAULT_CONSTANTS, MAGIC_ANGLE, MN_II, PhysicalConstants, SpinLabelSpec
from .surfacenoise import (
    ENSEMBLE_DEPTHS,
    PILLAR_DEPTHS,
    DepthDistribution,
    SurfaceNoiseModel,
    background_rate,
    background_rate_cdf,
    c_surf_from_sigma,
    sample_depths,
)

CHUNK = 1000
SINGLE_MOLECULE_SHARE = 0.70
CONTOUR_LEVEL = 0.5
SA_DELTA_CUTOFF = 1e4
GAMMA_BG_MAX = 2000.0


@dataclass
class DensityScanResult:
    scanned_values: np.ndarray
    scores: np.ndarray
    best: float
    interval: tuple
    score_name: str = "r_squared"
    interval_fraction: float = 0.05
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scanned_values": [float(v) for v in self.scanned_values],
            "scores": [float(s) for s in self.scores],
            "best": float(self.best),
            "interval": [float(v) for v in self.interval],
            "score_name": self.score_name,
            "interval_fraction": self.interval_fraction,
            **self.extra,
        }


def _scan_result(values, scores, score_name="r_squared", fraction=0.05, extra=None) -> DensityScanResult:
    values = np.asarray(values, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite score in scan")
    k = int(np.argmax(scores))
    best = scores[k]
    near = values[scores >= best - fraction * abs(best)]
    return DensityScanResult(values, scores, float(values[k]), (float(near.min()), float(near.max())),
                             score_name, fraction, extra or {})


def binned_r_squared(observed: np.ndarray, predicted: np.ndarray) -> float:
    """R^2 of a predicted histogram density against an observed one, bin by bin."""
    centred = observed - observed.mean()
    ss_tot = float(centred @ centred)
    if ss_tot == 0.0:
        raise ValueError("observed histogram is flat")
    resid = observed - predicted
    return 1.0 - float(resid @ resid) / ss_tot


# -- population generation -------------------------------------------------------

def _chunks(n: int, size: int = CHUNK):
    return [(i, min(size, n - i * size)) for i in range((n + size - 1) // size)]


def _depth_chunk(unit, seed, dist):
    idx, size = unit
    return sample_depths(dist, size, substream(seed, "depths", idx))


def sample_population_depths(n: int, dist: DepthDistribution, seed: int, workers: int | None = 1) -> np.ndarray:
    """Depths of ``n`` NVs drawn chunk-wise from independent substreams."""
    parts = ordered_map(partial(_depth_chunk, seed=seed, dist=dist), _chunks(n), workers)
    return np.concatenate(parts)


def _plane_chunk(unit, seed, depths, plane, region_size, spec, tilt, constants):
    idx, size = unit
    d = depths[idx * CHUNK: idx * CHUNK + size]
    batch = plane_batch(size, plane, region_size, substream(seed, "label-plane", idx))
    return batch_signals(d, batch, spec, tilt, constants)


def plane_signals(depths, plane: LabelPlane, seed: int, region_size: float = 40.0,
                  label_spec: SpinLabelSpec = MN_II, axis_tilt: float = MAGIC_ANGLE,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS, workers: int | None = 1) -> np.ndarray:
    """Label-induced rate for each NV, each under its own random plane scene."""
    depths = np.asarray(depths, dtype=float)
    fn = partial(_plane_chunk, seed=seed, depths=depths, plane=plane, region_size=region_size,
                 spec=label_spec, tilt=axis_tilt, constants=constants)
    return np.concatenate(ordered_map(fn, _chunks(depths.size), workers))


# -- ensemble T1 -------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleConfig:
    n_nv: int = 40000
    depths: DepthDistribution = ENSEMBLE_DEPTHS
    surface: SurfaceNoiseModel = SurfaceNoiseModel(sigma_surf=0.40)
    plane_height: float = 2.0
    labels_per_point: int = 4
    label_spec: SpinLabelSpec = MN_II
    region_size: float = 40.0
    t_max: float | None = None  # None: 5 / (population mean rate)
    n_points: int = 31
    noise_sd: float = 0.0


def expected_weighted_rate(rates) -> float:
    """Initial logarithmic decay rate of the population average, which a biexp Gamma_w estimates."""
    return math.fsum(rates) / len(rates)


def ensemble_grid(config: EnsembleConfig, background_rates) -> np.ndarray:
    t_max = config.t_max or 5.0 / expected_weighted_rate(background_rates)
    return default_tau_grid(t_max, config.n_points)


def infer_surface_density_from_curve(target: T1Curve, dist: DepthDistribution, tau_c_surf: float,
                                     gamma_bulk: float, scan, n_nv: int = 40000, seed: int = 0,
                                     axis_tilt: float = MAGIC_ANGLE, constants: PhysicalConstants = DEFAULT_CONSTANTS,
                                     interval_fraction: float = 1e-3, workers: int | None = 1) -> DensityScanResult:
    """Grid-scan sigma_surf, scoring each simulated ensemble curve by R^2 against ``target``.

    One depth sample (fixed by ``seed``) is shared by all candidates.
    """
    if len(target) < 4:
        raise ValueError("target curve needs at least 4 points")
    scan = np.asarray(scan, dtype=float)
    if scan.size == 0 or np.any(scan <= 0):
        raise ValueError("scan must be a non-empty list of positive densities")
    if n_nv < 40000:
        raise ValueError("use at least 40 000 NVs per simulated curve")
    depths = sample_population_depths(n_nv, dist, seed, workers)
    unit_c = c_surf_from_sigma(1.0, tau_c_surf, axis_tilt, constants=constants)
    data = target.intensity
    centred = data - data.mean()
    ss_tot = float(centred @ centred)
    scores = []
    for sigma in scan:
        rates = background_rate(sigma * unit_c, gamma_bulk, depths)
        sim = synthesize_curve(RatePopulation(rates), target.tau).intensity
        resid = sim - data
        scores.append(1.0 - float(resid @ resid) / ss_tot)
    return _scan_result(scan, scores, fraction=interval_fraction,
                        extra={"kind": "surface", "unit": "nm^-2", "n_nv": n_nv})


# -- single-NV background histogram ------------------------------------------------

def infer_c_surf_from_histogram(rates, dist: DepthDistribution, gamma_bulk: float, scan,
                                bin_space: str = "log", score: str = "r_squared") -> DensityScanResult:
    """Grid-scan c_surf against a histogram of single-NV background rates.

    Bins follow the Freedman-Diaconis rule, in log10(rate) by default so the
    heavy shallow-NV tail does not swamp the bulk of the distribution. The
    model density per bin is the exact bin average of the background-rate
    density. ``score="loglik"`` scores by the unbinned log-likelihood instead.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.size < 50:
        raise ValueError("need at least 50 rates")
    if np.ptp(rates) == 0:
        raise ValueError("all rates are equal; histogram is degenerate")
    if np.any(rates <= gamma_bulk):
        raise ValueError("rates must exceed gamma_bulk")
    scan = np.asarray(scan, dtype=float)
    if scan.size == 0 or np.any(scan <= 0):
        raise ValueError("scan must be non-empty and positive")

    if score == "loglik":
        from .surfacenoise import background_rate_pdf

        scores = []
        for c in scan:
            p = background_rate_pdf(rates, dist, c, gamma_bulk)
            scores.append(float(np.sum(np.log(np.maximum(p, 1e-300)))))
        return _scan_result(scan, scores, "log_likelihood", extra={"kind": "c-surf"})

    if bin_space == "log":
        x = np.log10(rates)
        edges = np.histogram_bin_edges(x, bins="fd")
        gamma_edges = 10.0**edges
    elif bin_space == "linear":
        edges = np.histogram_bin_edges(rates, bins="fd")
        gamma_edges = edges
        x = rates
    else:
        raise ValueError(f"unknown bin_space {bin_space!r}")
    counts, _ = np.histogram(x, edges)
    width = np.diff(edges)
    observed = counts / (rates.size * width)
    scores = []
    for c in scan:
        mass = np.diff(background_rate_cdf(gamma_edges, dist, c, gamma_bulk))
        scores.append(binned_r_squared(observed, mass / width))
    return _scan_result(scan, scores, extra={"kind": "c-surf", "unit": "s^-1 nm^4", "bins": int(width.size)})


# -- ensemble response to a label plane ------------------------------------------------

@dataclass
class SensitivityTable:
    densities: np.ndarray
    delta_w: np.ndarray
    delta_long: np.ndarray
    delta_stre: np.ndarray
    delta_true: np.ndarray
    included: np.ndarray
    slopes: dict
    background: dict

    def ratios(self) -> dict:
        s = self.slopes
        return {"w_over_long": s["w"] / s["long"], "w_over_stre": s["w"] / s["stre"]}

    def to_csv(self) -> str:
        lines = ["sigma_ub_nm2,spacing_nm,delta_w,delta_long,delta_stre,delta_true,included"]
        for i, d in enumerate(self.densities):
            spacing = d**-0.5 if d > 0 else float("inf")
            vals = [d, spacing, self.delta_w[i], self.delta_long[i], self.delta_stre[i], self.delta_true[i]]
            lines.append(",".join(f"{float(v):.17g}" for v in vals) + f",{int(self.included[i])}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "densities": self.densities.tolist(),
            "delta_w": self.delta_w.tolist(),
            "delta_long": self.delta_long.tolist(),
            "delta_stre": self.delta_stre.tolist(),
            "delta_true": self.delta_true.tolist(),
            "included": self.included.tolist(),
            "slopes": self.slopes,
            "ratios": self.ratios(),
            "background": self.background,
        }


def _estimators(curve: T1Curve):
    bi = fit(curve, "biexp")
    st = fit(curve, "stretched")
    ok = bi.converged and st.converged
    return bi.derived_rates["gamma_w"], bi.derived_rates["gamma_long"], st.derived_rates["gamma_stre"], ok


def _slope(x, y) -> float:
    if x.size < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def sensitivity_compare(densities, config: EnsembleConfig = EnsembleConfig(), seed: int = 0,
                        workers: int | None = 1) -> SensitivityTable:
    """Estimator response of a simulated ensemble to Ub(Mn) planes of increasing density.

    For each density the background and with-protein ensemble curves share the
    same NV depths; both are fitted with the biexponential and stretched
    models and each estimator's rate difference is recorded alongside the
    true mean single-NV acceleration.
    """
    densities = np.asarray(densities, dtype=float)
    depths = sample_population_depths(config.n_nv, config.depths, seed, workers)
    bg_rates = config.surface.rate(depths)
    grid = ensemble_grid(config, bg_rates)

    def curve_for(rates, tag):
        c = synthesize_curve(RatePopulation(rates), grid)
        if config.noise_sd > 0:
            c = add_measurement_noise(c, config.noise_sd, substream(seed, "curve-noise", tag))
        return c

    w0, l0, s0, ok0 = _estimators(curve_for(bg_rates, 0))
    rows = []
    for k, sigma in enumerate(densities):
        plane = LabelPlane(sigma, config.plane_height, config.labels_per_point)
        delta = plane_signals(depths, plane, seed, config.region_size, config.label_spec,
                              config.surface.axis_tilt, config.surface.constants, workers)
        w, l, s, ok = _estimators(curve_for(bg_rates + delta, k + 1))
        rows.append((w - w0, l - l0, s - s0, math.fsum(delta) / delta.size, ok and ok0))
    arr = np.array([r[:4] for r in rows]).reshape(-1, 4)
    included = np.array([r[4] for r in rows], dtype=bool)
    x = densities[included]
    slopes = {name: _slope(x, arr[included, j]) for j, name in enumerate(("w", "long", "stre", "true"))}
    return SensitivityTable(densities, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], included, slopes,
                            {"gamma_w": w0, "gamma_long": l0, "gamma_stre": s0, "t_max": float(grid[-1])})


def spacing_grid(max_spacing: float = 20.0, min_spacing: float = 7.0, n: int = 8) -> np.ndarray:
    """Label densities (nm^-2) for evenly spaced spacings between the bounds."""
    return np.linspace(max_spacing, min_spacing, n) ** -2.0


@dataclass
class SpacingResult:
    delta_gamma: float
    sd: float
    densities: np.ndarray
    simulated: np.ndarray
    slope: float
    floor: float
    density_interval: tuple
    spacing_interval: tuple
    unbounded: bool
    estimator: str

    def to_json(self) -> dict:
        return {
            "kind": "label-spacing",
            "delta_gamma": self.delta_gamma,
            "sd": self.sd,
            "estimator": self.estimator,
            "densities": self.densities.tolist(),
            "simulated": self.simulated.tolist(),
            "slope": self.slope,
            "floor": self.floor,
            "density_interval": list(self.density_interval),
            "spacing_interval": [v if math.isfinite(v) else None for v in self.spacing_interval],
            "unbounded": self.unbounded,
        }


def infer_label_spacing(delta_gamma: float, sd: float = 0.0, config: EnsembleConfig = EnsembleConfig(),
                        densities=None, estimator: str = "true", seed: int = 0,
                        workers: int | None = 1) -> SpacingResult:
    """Invert a measured mean acceleration to a label density and spacing interval.

    The simulated response is fitted by a line through the origin (the mean
    acceleration is exactly linear in density). ``estimator`` selects which
    simulated quantity is matched: ``"true"`` (mean single-NV acceleration) or
    ``"w"`` / ``"long"`` / ``"stre"`` (fitted ensemble estimators). Values
    below one label point per simulation region are beyond the simulation's
    resolution and leave the spacing unbounded above.
    """
    if not delta_gamma > 0:
        raise ValueError("delta_gamma must be positive")
    densities = spacing_grid() if densities is None else np.asarray(densities, dtype=float)
    if estimator == "true":
        depths = sample_population_depths(config.n_nv, config.depths, seed, workers)
        sim = []
        for sigma in densities:
            plane = LabelPlane(sigma, config.plane_height, config.labels_per_point)
            delta = plane_signals(depths, plane, seed, config.region_size, config.label_spec,
                                  config.surface.axis_tilt, config.surface.constants, workers)
            sim.append(math.fsum(delta) / delta.size)
        sim = np.array(sim)
    elif estimator in ("w", "long", "stre"):
        table = sensitivity_compare(densities, config, seed, workers)
        sim = {"w": table.delta_w, "long": table.delta_long, "stre": table.delta_stre}[estimator]
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    slope = float(densities @ sim / (densities @ densities))
    floor = slope / config.region_size**2
    lo_dg, hi_dg = delta_gamma - sd, delta_gamma + sd
    unbounded = lo_dg < floor
    lo_sigma = max(lo_dg, 0.0) / slope
    hi_sigma = hi_dg / slope
    spacing_hi = float("inf") if unbounded else lo_sigma**-0.5
    spacing_lo = hi_sigma**-0.5 if hi_dg >= floor else float("inf")
    return SpacingResult(delta_gamma, sd, densities, sim, slope, floor, (lo_sigma, hi_sigma),
                         (spacing_lo, spacing_hi), bool(unbounded), estimator)


# -- single NVs under streptavidin ---------------------------------------------------

@dataclass(frozen=True)
class SingleNvConfig:
    depths: DepthDistribution = PILLAR_DEPTHS
    surface: SurfaceNoiseModel = SurfaceNoiseModel(sigma_surf=0.50)
    geometry: SaGeometry = SaGeometry()
    label_spec: SpinLabelSpec = MN_II
    region_size: float = 40.0
    gamma_bg_max: float | None = GAMMA_BG_MAX
    delta_noise_sd: float = 0.0  # Gaussian measurement noise on each NV's acceleration (s^-1)


@dataclass
class SingleNvSignals:
    """Per retained NV: depth, background rate, acceleration, largest single-complex share."""

    depth: np.ndarray
    gamma_bg: np.ndarray
    delta: np.ndarray
    max_share: np.ndarray
    n_simulated: int

    def __len__(self):
        return self.delta.size

    def head(self, n: int) -> "SingleNvSignals":
        return _select(self, slice(0, n))


def _select(sig: SingleNvSignals, mask) -> SingleNvSignals:
    return SingleNvSignals(sig.depth[mask], sig.gamma_bg[mask], sig.delta[mask], sig.max_share[mask], sig.n_simulated)


def _single_nv_chunk(unit, seed, sigma_sa, config: SingleNvConfig):
    idx, size = unit
    rng = substream(seed, "single-nv", idx)
    depths = sample_depths(config.depths, size, rng)
    gamma_bg = config.surface.rate(depths)
    batch = sa_batch(size, sigma_sa, config.region_size, rng, config.geometry)
    delta, share = batch_signals(depths, batch, config.label_spec, config.surface.axis_tilt,
                                 config.surface.constants, with_shares=True)
    if config.delta_noise_sd > 0:
        delta = delta + rng.normal(0.0, config.delta_noise_sd, size)
    return depths, gamma_bg, delta, share


def simulate_single_nv_signals(sigma_sa: float, n_nv: int, config: SingleNvConfig = SingleNvConfig(),
                               seed: int = 0, workers: int | None = 1) -> SingleNvSignals:
    """Simulate ``n_nv`` single NVs, each under an independent SA scene, and keep those passing the background filter."""
    if n_nv < 1:
        raise ValueError("n_nv must be >= 1")
    parts = ordered_map(partial(_single_nv_chunk, seed=seed, sigma_sa=sigma_sa, config=config),
                        _chunks(n_nv), workers)
    depth, gamma_bg, delta, share = (np.concatenate(p) for p in zip(*parts))
    keep = np.ones(n_nv, bool) if config.gamma_bg_max is None else gamma_bg < config.gamma_bg_max
    return SingleNvSignals(depth[keep], gamma_bg[keep], delta[keep], share[keep], n_nv)


def _delta_histogram(values, edges):
    counts, _ = np.histogram(values, edges)
    total = counts.sum()
    return counts / (total * np.diff(edges)) if total else np.zeros(edges.size - 1)


def infer_sa_density(observed, scan, config: SingleNvConfig = SingleNvConfig(), n_sim: int = 10000,
                     seed: int = 0, cutoff: float | None = SA_DELTA_CUTOFF, workers: int | None = 1,
                     score: str = "r_squared") -> DensityScanResult:
    """Grid-scan the SA density against observed single-NV accelerations.

    Both observed and simulated accelerations are histogrammed over
    [0, cutoff) with Freedman-Diaconis bins taken from the observations, and
    scored by binned R^2 (or by the log-likelihood of the observations under
    the simulated histogram with ``score="loglik"``).
    """
    obs = np.asarray(observed, dtype=float)
    if obs.size < 30:
        raise ValueError("need at least 30 observations")
    if cutoff is not None:
        obs = obs[obs < cutoff]
    scan = np.asarray(scan, dtype=float)
    if scan.size == 0 or np.any(scan < 0):
        raise ValueError("scan must be non-empty and non-negative")
    width = np.diff(np.histogram_bin_edges(obs, bins="fd"))[0]
    lo = min(0.0, float(obs.min()))
    hi = cutoff if cutoff is not None else float(obs.max())
    nbins = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, nbins + 1)
    observed_density = _delta_histogram(obs, edges)
    scores = []
    for sigma in scan:
        sim = simulate_single_nv_signals(sigma, n_sim, config, seed, workers).delta
        if cutoff is not None:
            sim = sim[sim < cutoff]
        predicted = _delta_histogram(sim, edges)
        if score == "loglik":
            counts, _ = np.histogram(obs, edges)
            p = np.maximum(predicted * np.diff(edges), 1e-12)
            scores.append(float(counts @ np.log(p)))
        else:
            scores.append(binned_r_squared(observed_density, predicted))
    name = "log_likelihood" if score == "loglik" else "r_squared"
    return _scan_result(scan, scores, name, extra={"kind": "sa-density", "unit": "nm^-2", "bins": nbins,
                                                   "n_observed": int(obs.size)})


# -- probability map -----------------------------------------------------------

@dataclass
class ProbabilityMap:
    gamma_bg_edges: np.ndarray
    delta_edges: np.ndarray
    density: np.ndarray  # (n_delta, n_bg), each populated column integrates to 1 over delta
    p_single: np.ndarray  # (n_delta, n_bg), NaN where a bin holds no events
    counts: np.ndarray
    share_threshold: float
    contour: np.ndarray  # (k, 2) polyline of (gamma_bg, delta) where p_single crosses the level
    contour_level: float
    n_outside: int
    n_no_source: int = 0

    @property
    def empty(self) -> bool:
        return int(self.counts.sum()) == 0

    def mass_below(self, level: float = CONTOUR_LEVEL) -> float:
        """Fraction of mapped events sitting in bins with p_single < level."""
        total = self.counts.sum()
        if total == 0:
            return float("nan")
        below = np.nan_to_num(self.p_single, nan=np.inf) < level
        return float(self.counts[below].sum() / total)

    def to_matrix_text(self, which: str = "density") -> str:
        """gnuplot ``matrix nonuniform`` layout: first row Gamma_BG centres, first column delta centres."""
        values = self.density if which == "density" else self.p_single
        gc = 0.5 * (self.gamma_bg_edges[1:] + self.gamma_bg_edges[:-1])
        dc = 0.5 * (self.delta_edges[1:] + self.delta_edges[:-1])
        fmt = lambda v: "nan" if not np.isfinite(v) else f"{float(v):.17g}"
        lines = [" ".join([str(gc.size)] + [fmt(v) for v in gc])]
        for i, d in enumerate(dc):
            lines.append(" ".join([fmt(d)] + [fmt(v) for v in values[i]]))
        return "\n".join(lines) + "\n"

    def contour_csv(self) -> str:
        rows = ["gamma_bg,delta_gamma"] + [f"{x:.17g},{y:.17g}" for x, y in self.contour]
        return "\n".join(rows) + "\n"

    def to_json(self) -> dict:
        nan_to_none = lambda a: [[None if not np.isfinite(v) else float(v) for v in row] for row in a]
        mass = self.mass_below(self.contour_level)
        return {
            "gamma_bg_edges": self.gamma_bg_edges.tolist(),
            "delta_edges": self.delta_edges.tolist(),
            "density": self.density.tolist(),
            "p_single": nan_to_none(self.p_single),
            "counts": self.counts.astype(int).tolist(),
            "share_threshold": self.share_threshold,
            "contour_level": self.contour_level,
            "contour": self.contour.tolist(),
            "n_outside": self.n_outside,
            "n_no_source": self.n_no_source,
            "empty": self.empty,
            "mass_below_level": None if math.isnan(mass) else mass,
        }


def _crossings(p_single, gamma_centres, delta_centres, level):
    """Per Gamma_BG column, the first delta where p_single rises through ``level``."""
    points = []
    for j, g in enumerate(gamma_centres):
        col = p_single[:, j]
        valid = np.flatnonzero(np.isfinite(col))
        for a, b in zip(valid[:-1], valid[1:]):
            pa, pb = col[a], col[b]
            if pa < level <= pb:
                frac = (level - pa) / (pb - pa)
                points.append((g, delta_centres[a] + frac * (delta_centres[b] - delta_centres[a])))
                break
    return np.array(points).reshape(-1, 2)


def probability_map(sigma_sa: float, n_nv: int = 10000, config: SingleNvConfig = SingleNvConfig(),
                    gamma_bg_edges=None, delta_edges=None, seed: int = 0,
                    share_threshold: float = SINGLE_MOLECULE_SHARE, contour_level: float = CONTOUR_LEVEL,
                    workers: int | None = 1) -> ProbabilityMap:
    """Conditional density of delta given Gamma_BG, and the single-complex probability per bin."""
    sig = simulate_single_nv_signals(sigma_sa, n_nv, config, seed, workers)
    n_no_source = int(np.count_nonzero(sig.max_share == 0))
    sig = _select(sig, sig.max_share > 0)  # NVs without any complex in range carry no event
    top = config.gamma_bg_max or float(np.max(sig.gamma_bg, initial=1.0))
    gamma_bg_edges = np.linspace(0.0, top, 21) if gamma_bg_edges is None else np.asarray(gamma_bg_edges, float)
    delta_edges = np.linspace(0.0, SA_DELTA_CUTOFF, 41) if delta_edges is None else np.asarray(delta_edges, float)
    if np.any(np.diff(gamma_bg_edges) <= 0) or np.any(np.diff(delta_edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    counts, _, _ = np.histogram2d(sig.delta, sig.gamma_bg, [delta_edges, gamma_bg_edges])
    single, _, _ = np.histogram2d(sig.delta[sig.max_share > share_threshold],
                                  sig.gamma_bg[sig.max_share > share_threshold], [delta_edges, gamma_bg_edges])
    col = counts.sum(axis=0)
    dw = np.diff(delta_edges)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        density = np.where(col > 0, counts / (col * dw), 0.0)
        p_single = np.where(counts > 0, single / counts, np.nan)
    gc = 0.5 * (gamma_bg_edges[1:] + gamma_bg_edges[:-1])
    dc = 0.5 * (delta_edges[1:] + delta_edges[:-1])
    return ProbabilityMap(gamma_bg_edges, delta_edges, density, p_single, counts, share_threshold,
                          _crossings(p_single, gc, dc, contour_level), contour_level,
                          int(len(sig) - counts.sum()), n_no_source)
