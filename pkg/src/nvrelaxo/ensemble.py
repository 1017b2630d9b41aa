"""Ensemble T1 curves as population averages of single-NV exponentials."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .rng import as_generator

DEFAULT_NOISE_SD = 0.01
DEFAULT_GRID_POINTS = 31


@dataclass(frozen=True)
class T1Curve:
    tau: np.ndarray
    intensity: np.ndarray
    noise_sd: np.ndarray | None = None

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        intensity = np.asarray(self.intensity, dtype=float)
        if tau.ndim != 1 or tau.shape != intensity.shape:
            raise ValueError("tau and intensity must be 1-D arrays of equal length")
        if tau.size < 4:
            raise ValueError("a T1 curve needs at least 4 points")
        if np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must be strictly increasing")
        if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(intensity))):
            raise ValueError("non-finite values in curve")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "intensity", intensity)
        if self.noise_sd is not None:
            sd = np.broadcast_to(np.asarray(self.noise_sd, dtype=float), tau.shape).copy()
            object.__setattr__(self, "noise_sd", sd)

    def __len__(self):
        return self.tau.size

    def to_csv(self, path=None) -> str:
        """Write ``tau_s,intensity[,sd]`` rows with 17 significant digits."""
        buf = io.StringIO(newline="")
        has_sd = self.noise_sd is not None
        buf.write("tau_s,intensity,sd\n" if has_sd else "tau_s,intensity\n")
        for i in range(len(self)):
            row = [self.tau[i], self.intensity[i]] + ([self.noise_sd[i]] if has_sd else [])
            buf.write(",".join(f"{float(v):.17g}" for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_bytes(text.encode("utf-8"))
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "T1Curve":
        """Parse the CSV format; raises ``CurveFormatError`` carrying the line number."""
        if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
            text = Path(path_or_text).read_text(encoding="utf-8")
        else:
            text = path_or_text
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise CurveFormatError("empty file", 1)
        header = [h.strip() for h in lines[0].split(",")]
        if header not in (["tau_s", "intensity"], ["tau_s", "intensity", "sd"]):
            raise CurveFormatError(f"bad header {lines[0]!r}", 1)
        cols = len(header)
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            fields = line.split(",")
            if len(fields) != cols:
                raise CurveFormatError(f"expected {cols} fields, got {len(fields)}", lineno)
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise CurveFormatError(f"unparseable number in {line!r}", lineno) from None
        if not rows:
            raise CurveFormatError("no data rows", 2)
        arr = np.array(rows)
        try:
            return cls(arr[:, 0], arr[:, 1], arr[:, 2] if cols == 3 else None)
        except ValueError as exc:
            raise CurveFormatError(str(exc), len(lines)) from None


class CurveFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class RatePopulation:
    rates: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float).ravel()
        if rates.size == 0:
            raise ValueError("empty rate population")
        if np.any(rates <= 0) or not np.all(np.isfinite(rates)):
            raise ValueError("rates must be positive and finite")
        object.__setattr__(self, "rates", rates)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != rates.shape or np.any(w < 0):
                raise ValueError("weights must be non-negative and match rates")
            if abs(math.fsum(w) - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1")
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.rates.size

    def mean_rate(self) -> float:
        if self.weights is None:
            return math.fsum(self.rates) / self.rates.size
        return math.fsum(self.rates * self.weights)

    def to_json(self, bins: int = 60) -> dict:
        lo, hi = np.log10(self.rates.min()), np.log10(self.rates.max())
        edges = np.logspace(lo, hi if hi > lo else lo + 1, bins + 1)
        counts, _ = np.histogram(self.rates, edges, weights=self.weights)
        return {
            "n": int(self.rates.size),
            "mean_rate": self.mean_rate(),
            "median_rate": float(np.median(self.rates)),
            "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
        }


def synthesize_curve(pop: RatePopulation, tau_grid) -> T1Curve:
    """Population average of exp(-Gamma tau) on ``tau_grid``.

    Columns are summed with ``math.fsum`` (exact rounding), so the result does
    not depend on summation order or chunking.
    """
    tau = np.asarray(tau_grid, dtype=float)
    decays = np.exp(-np.outer(pop.rates, tau))
    if pop.weights is None:
        n = pop.rates.size
        intensity = np.array([math.fsum(decays[:, j]) / n for j in range(tau.size)])
    else:
        weighted = decays * pop.weights[:, None]
        intensity = np.array([math.fsum(weighted[:, j]) for j in range(tau.size)])
    return T1Curve(tau, intensity)


def add_measurement_noise(curve: T1Curve, sd: float, seed) -> T1Curve:
    """I.i.d. Gaussian noise of width ``sd`` on every intensity point."""
    if sd < 0:
        raise ValueError("sd must be non-negative")
    if sd == 0:
        return replace(curve, noise_sd=np.zeros_like(curve.tau))
    rng = as_generator(seed)
    noisy = curve.intensity + rng.normal(0.0, sd, curve.intensity.shape)
    return T1Curve(curve.tau, noisy, np.full_like(curve.tau, sd))


def default_tau_grid(t_max: float, n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """0 followed by ``n_points - 1`` log-spaced times from t_max/1000 to t_max."""
    if n_points < 4:
        raise ValueError("n_points must be >= 4")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    return np.concatenate([[0.0], np.geomspace(t_max * 1e-3, t_max, n_points - 1)])
