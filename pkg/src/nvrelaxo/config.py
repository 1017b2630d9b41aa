"""Run configuration: nested dataclasses with JSON round-trip and strict keys.

Resolution order is command-line flags, then the JSON config file, then the
defaults below. Unknown keys anywhere in the document are rejected.
"""

from __future__ import annotations

import json
import math
import types
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import numpy as np

from .inference import EnsembleConfig, SingleNvConfig
from .scene import SaGeometry
from .spinphysics import GAMMA_E, MAGIC_ANGLE, MN_II, PhysicalConstants, SpinLabelSpec
from .surfacenoise import DepthDistribution, SurfaceNoiseModel


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class ConstantsSection:
    mu0: float = 1.25663706212e-6
    hbar: float = 1.054571817e-34
    gamma_nv: float = GAMMA_E
    omega0: float = 2.0 * math.pi * 2.87e9

    def build(self) -> PhysicalConstants:
        return PhysicalConstants(**asdict(self))


@dataclass
class LabelSection:
    two_s: int = MN_II.two_s
    gamma: float = MN_II.gamma
    tau_c: float = MN_II.tau_c
    name: str = MN_II.name

    def build(self) -> SpinLabelSpec:
        return SpinLabelSpec(**asdict(self))


@dataclass
class DepthSection:
    mu: float = 6.5
    sigma: float = 2.8
    d_min: float = 2.0

    def build(self) -> DepthDistribution:
        return DepthDistribution(self.mu, self.sigma, self.d_min)


@dataclass
class SurfaceSection:
    sigma_surf: float = 0.40
    tau_c_surf: float = 0.28e-9
    gamma_bulk: float = 100.0
    axis_tilt_deg: float = math.degrees(MAGIC_ANGLE)

    def build(self, constants: PhysicalConstants) -> SurfaceNoiseModel:
        return SurfaceNoiseModel(self.sigma_surf, self.tau_c_surf, self.gamma_bulk,
                                 math.radians(self.axis_tilt_deg), constants=constants)


@dataclass
class EnsembleSection:
    n_nv: int = 40000
    depth: DepthSection = field(default_factory=DepthSection)
    surface: SurfaceSection = field(default_factory=SurfaceSection)
    plane_height: float = 2.0
    labels_per_point: int = 4
    region_size: float = 40.0
    t_max: float | None = None
    n_points: int = 31
    noise_sd: float = 0.0


@dataclass
class SingleNvSection:
    n_nv: int = 10000
    sigma_sa: float = 0.007
    depth: DepthSection = field(default_factory=lambda: DepthSection(mu=5.5))
    surface: SurfaceSection = field(default_factory=lambda: SurfaceSection(sigma_surf=0.50))
    region_size: float = 40.0
    gamma_bg_max: float | None = 2000.0
    cube_edge: float = 5.8
    standoff: float = 0.0
    labels_per_complex: int = 4
    occupancy: float = 1.0
    random_rotation: bool = True
    exclusion: bool = False
    delta_noise_sd: float = 0.0


def _round(values):
    return [float(f"{v:.12g}") for v in values]


@dataclass
class GridSection:
    sigma_surf_scan: list = field(default_factory=lambda: _round(np.arange(0.20, 0.605, 0.01)))
    c_surf_scan: list = field(default_factory=lambda: _round(np.geomspace(1e6, 7e6, 121)))
    sa_scan: list = field(default_factory=lambda: _round(np.arange(0.002, 0.01605, 0.0005)))
    ub_spacings_nm: list = field(default_factory=lambda: _round(np.linspace(20.0, 7.0, 8)))
    map_gamma_bg_edges: list | None = None  # default: 20 bins over [0, gamma_bg_max]
    map_delta_edges: list | None = None  # default: 40 bins over [0, 1e4]


@dataclass
class InferSection:
    score: str = "r_squared"
    bin_space: str = "log"
    sa_cutoff: float | None = 1e4
    n_sim: int = 10000
    surface_n_nv: int = 40000
    histogram_depth: DepthSection = field(default_factory=lambda: DepthSection(mu=5.5, sigma=2.2))
    estimator: str = "true"
    delta_gamma: float | None = None
    delta_gamma_sd: float = 0.0
    share_threshold: float = 0.70
    contour_level: float = 0.5


@dataclass
class RunConfig:
    seed: int = 0
    workers: int | None = None  # execution detail; never affects outputs
    constants: ConstantsSection = field(default_factory=ConstantsSection)
    label: LabelSection = field(default_factory=LabelSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    single_nv: SingleNvSection = field(default_factory=SingleNvSection)
    grids: GridSection = field(default_factory=GridSection)
    infer: InferSection = field(default_factory=InferSection)

    # -- builders ------------------------------------------------------------
    def physical_constants(self) -> PhysicalConstants:
        return self.constants.build()

    def ensemble_config(self) -> EnsembleConfig:
        e = self.ensemble
        return EnsembleConfig(
            n_nv=e.n_nv, depths=e.depth.build(), surface=e.surface.build(self.physical_constants()),
            plane_height=e.plane_height, labels_per_point=e.labels_per_point, label_spec=self.label.build(),
            region_size=e.region_size, t_max=e.t_max, n_points=e.n_points, noise_sd=e.noise_sd,
        )

    def single_nv_config(self) -> SingleNvConfig:
        s = self.single_nv
        geometry = SaGeometry(s.cube_edge, s.standoff, s.labels_per_complex, s.occupancy,
                              s.random_rotation, s.exclusion)
        return SingleNvConfig(
            depths=s.depth.build(), surface=s.surface.build(self.physical_constants()), geometry=geometry,
            label_spec=self.label.build(), region_size=s.region_size, gamma_bg_max=s.gamma_bg_max,
            delta_noise_sd=s.delta_noise_sd,
        )

    def validate(self) -> "RunConfig":
        """Build every derived object once so bad values fail early as ConfigError."""
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.infer.score not in ("r_squared", "loglik"):
            raise ConfigError(f"infer.score must be 'r_squared' or 'loglik', got {self.infer.score!r}")
        if self.infer.bin_space not in ("log", "linear"):
            raise ConfigError(f"infer.bin_space must be 'log' or 'linear', got {self.infer.bin_space!r}")
        if self.infer.estimator not in ("true", "w", "long", "stre"):
            raise ConfigError(f"unknown infer.estimator {self.infer.estimator!r}")
        try:
            self.ensemble_config()
            self.single_nv_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    # -- serialization -----------------------------------------------------------
    def to_json(self, include_workers: bool = False) -> dict:
        doc = asdict(self)
        if not include_workers:
            doc.pop("workers")
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return _merge(tp(), value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    if tp is list:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{path}: expected a list of numbers")
        return [float(v) for v in value]
    raise ConfigError(f"{path}: unsupported type {tp}")  # pragma: no cover


def _merge(obj, doc: dict, path: str):
    """Overlay ``doc`` onto an existing dataclass instance (partial sections keep their defaults)."""
    cls = type(obj)
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) at {path or 'top level'}: {', '.join(unknown)}")
    updates = {}
    for key, value in doc.items():
        sub = f"{path}.{key}" if path else key
        if is_dataclass(hints[key]) and isinstance(value, dict):
            updates[key] = _merge(getattr(obj, key), value, sub)
        else:
            updates[key] = _coerce(hints[key], value, sub)
    return replace(obj, **updates)


def config_from_dict(doc: dict, base: RunConfig | None = None) -> RunConfig:
    """Overlay a JSON document on ``base`` (defaults when omitted).

    A manifest written by the CLI is accepted as-is: its ``config`` entry is used.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    if "manifest_version" in doc:
        doc = doc.get("config", {})
    return _merge(base or RunConfig(), doc, "")


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(doc)


def apply_override(cfg: RunConfig, assignment: str) -> RunConfig:
    """Apply one ``dotted.key=json_value`` override (plain strings need not be quoted)."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    doc: dict = {}
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return _merge(cfg, doc, "")
