"""Label geometry above the diamond surface and the rate it induces at an NV.

Coordinates: the diamond surface is z = 0, NVs sit at z = -depth, labels at
z >= 0. Lateral positions and heights are in nm.

Two kinds of label sources are modelled:

* streptavidin (SA) complexes, cubes whose four biotin pockets sit on
  opposing vertices of the top and bottom faces, each pocket holding one
  biotin-Ub point carrying several Mn(II) labels;
* planes of uniformly scattered label points (Ub-only or BSA layers).

Besides the object-level API (``build_sa_scene``, ``nv_signal``) the module
exposes batched kernels that evaluate many independent NV/scene pairs in one
vectorised pass; the Monte Carlo drivers in ``inference`` use those.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .rng import as_generator
from .spinphysics import (
    DEFAULT_CONSTANTS,
    MAGIC_ANGLE,
    MN_II,
    PhysicalConstants,
    SpinLabelSpec,
    coupling_kernel,
    nv_axis,
    rate_factor,
)

NM = 1e-9
SA_CUBE_EDGE = 5.8
LABELS_PER_UB = 4
UB_PLANE_HEIGHT = 2.0
REGION_SIZE = 40.0


@dataclass(frozen=True)
class Region:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("region must have positive area")

    @classmethod
    def centered(cls, size: float = REGION_SIZE, center=(0.0, 0.0)) -> "Region":
        cx, cy = center
        return cls(cx - size / 2, cx + size / 2, cy - size / 2, cy + size / 2)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, x, y) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def shifted(self, dx: float, dy: float) -> "Region":
        return Region(self.x0 + dx, self.x1 + dx, self.y0 + dy, self.y1 + dy)


@dataclass(frozen=True)
class NvCenter:
    lateral_position: tuple = (0.0, 0.0)
    depth: float = 5.5
    axis_tilt: float = MAGIC_ANGLE
    gamma_bg: float = 0.0
    axis_azimuth: float = 0.0

    def __post_init__(self):
        if not self.depth > 0:
            raise ValueError("NV depth must be positive")
        if self.gamma_bg < 0:
            raise ValueError("gamma_bg must be non-negative")

    @property
    def position(self) -> np.ndarray:
        x, y = self.lateral_position
        return np.array([x, y, -self.depth])

    @property
    def axis(self) -> np.ndarray:
        return nv_axis(self.axis_tilt, self.axis_azimuth)


def _site_offsets(edge: float) -> np.ndarray:
    """Local pocket coordinates: one diagonal of the top face, the crossing diagonal of the bottom face."""
    h = edge / 2
    return np.array([[h, h, edge], [-h, -h, edge], [h, -h, 0.0], [-h, h, 0.0]])


@dataclass(frozen=True)
class SaComplex:
    center: tuple
    cube_edge: float = SA_CUBE_EDGE
    standoff: float = 0.0
    occupied_sites: tuple = (0, 1, 2, 3)
    labels_per_complex: int = LABELS_PER_UB
    rotation: float = 0.0

    def __post_init__(self):
        if not self.cube_edge > 0 or self.standoff < 0:
            raise ValueError("cube_edge must be positive and standoff non-negative")
        sites = tuple(sorted(set(int(s) for s in self.occupied_sites)))
        if len(sites) > 4 or any(s not in range(4) for s in sites):
            raise ValueError("occupied_sites must be a subset of {0, 1, 2, 3}")
        object.__setattr__(self, "occupied_sites", sites)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def label_points(self) -> np.ndarray:
        """(k, 3) coordinates of the occupied binding pockets."""
        local = _site_offsets(self.cube_edge)[list(self.occupied_sites)]
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        x = self.center[0] + c * local[:, 0] - s * local[:, 1]
        y = self.center[1] + s * local[:, 0] + c * local[:, 1]
        z = self.standoff + local[:, 2]
        return np.column_stack([x, y, z])


@dataclass(frozen=True)
class LabelPlane:
    density: float
    height: float = UB_PLANE_HEIGHT
    labels_per_point: int = LABELS_PER_UB

    def __post_init__(self):
        if self.density < 0 or self.height < 0:
            raise ValueError("density and height must be non-negative")
        if self.labels_per_point < 1:
            raise ValueError("labels_per_point must be >= 1")


@dataclass(frozen=True)
class PlaneLayer:
    """A plane specification together with the lateral points drawn for it."""

    plane: LabelPlane
    points: np.ndarray  # (k, 2)


@dataclass
class Scene:
    region: Region
    complexes: list = field(default_factory=list)
    layers: list = field(default_factory=list)
    label_spec: SpinLabelSpec = MN_II

    def __post_init__(self):
        for cx in self.complexes:
            if not self.region.contains(*cx.center):
                raise ValueError(f"complex center {cx.center} outside region")

    @property
    def planes(self) -> list:
        return [layer.plane for layer in self.layers]

    def sources(self):
        """Yield (source id, (k, 3) label points, labels per point); SA complexes first."""
        sid = 0
        for cx in self.complexes:
            yield sid, cx.label_points(), cx.labels_per_complex
            sid += 1
        for layer in self.layers:
            for x, y in layer.points:
                yield sid, np.array([[x, y, layer.plane.height]]), layer.plane.labels_per_point
                sid += 1

    def is_empty(self) -> bool:
        return not self.complexes and all(len(layer.points) == 0 for layer in self.layers)

    def translated(self, dx: float, dy: float) -> "Scene":
        cxs = [SaComplex((c.center[0] + dx, c.center[1] + dy), c.cube_edge, c.standoff,
                         c.occupied_sites, c.labels_per_complex, c.rotation) for c in self.complexes]
        layers = [PlaneLayer(l.plane, l.points + np.array([dx, dy])) for l in self.layers]
        return Scene(self.region.shifted(dx, dy), cxs, layers, self.label_spec)

    def to_json(self) -> dict:
        return {
            "region": [self.region.x0, self.region.x1, self.region.y0, self.region.y1],
            "complexes": [
                {
                    "center": list(c.center),
                    "cube_edge": c.cube_edge,
                    "standoff": c.standoff,
                    "occupied_sites": list(c.occupied_sites),
                    "labels_per_complex": c.labels_per_complex,
                    "rotation": c.rotation,
                }
                for c in self.complexes
            ],
            "planes": [
                {**asdict(l.plane), "points": np.asarray(l.points).tolist()} for l in self.layers
            ],
            "label_spec": asdict(self.label_spec),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Scene":
        unknown = set(doc) - {"region", "complexes", "planes", "label_spec"}
        if unknown:
            raise ValueError(f"unknown scene keys: {sorted(unknown)}")
        region = Region(*doc["region"])
        complexes = [SaComplex(**{**c, "center": tuple(c["center"]),
                                  "occupied_sites": tuple(c["occupied_sites"])})
                     for c in doc.get("complexes", [])]
        layers = []
        for p in doc.get("planes", []):
            p = dict(p)
            pts = np.asarray(p.pop("points", []), dtype=float).reshape(-1, 2)
            layers.append(PlaneLayer(LabelPlane(**p), pts))
        spec = SpinLabelSpec(**doc["label_spec"]) if "label_spec" in doc else MN_II
        return cls(region, complexes, layers, spec)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


# -- scene construction --------------------------------------------------------

@dataclass(frozen=True)
class SaGeometry:
    cube_edge: float = SA_CUBE_EDGE
    standoff: float = 0.0
    labels_per_complex: int = LABELS_PER_UB
    occupancy: float = 1.0  # per-pocket probability of a bound biotin-Ub
    random_rotation: bool = True
    exclusion: bool = False  # reject complexes whose centres are closer than one cube edge

    def __post_init__(self):
        if not 0.0 <= self.occupancy <= 1.0:
            raise ValueError("occupancy must lie in [0, 1]")


def _uniform_centers(rng, count, region):
    x = rng.uniform(region.x0, region.x1, count)
    y = rng.uniform(region.y0, region.y1, count)
    return np.column_stack([x, y])


def _exclude(rng, centers, region, min_dist, max_tries=1000):
    """Redraw centres overlapping earlier ones (sequential random addition)."""
    kept = []
    for c in centers:
        for _ in range(max_tries):
            if all(math.dist(c, k) >= min_dist for k in kept):
                break
            c = _uniform_centers(rng, 1, region)[0]
        else:
            raise RuntimeError("could not place complex without overlap")
        kept.append(c)
    return np.array(kept).reshape(-1, 2)


def _occupied(rng, count, occupancy):
    if occupancy >= 1.0:
        return np.ones((count, 4), dtype=bool)
    return rng.random((count, 4)) < occupancy


def build_sa_scene(sigma_sa: float, region: Region, seed, geometry: SaGeometry = SaGeometry(),
                   label_spec: SpinLabelSpec = MN_II) -> Scene:
    """Poisson-distributed SA complexes (mean sigma_sa * area) with uniform centres."""
    if sigma_sa < 0:
        raise ValueError("sigma_sa must be non-negative")
    rng = as_generator(seed)
    count = int(rng.poisson(sigma_sa * region.area))
    centers = _uniform_centers(rng, count, region)
    if geometry.exclusion and count:
        centers = _exclude(rng, centers, region, geometry.cube_edge)
    rot = rng.uniform(0, 2 * math.pi, count) if geometry.random_rotation else np.zeros(count)
    occ = _occupied(rng, count, geometry.occupancy)
    complexes = [
        SaComplex(tuple(centers[i]), geometry.cube_edge, geometry.standoff,
                  tuple(np.flatnonzero(occ[i])), geometry.labels_per_complex, float(rot[i]))
        for i in range(count)
    ]
    return Scene(region, complexes, [], label_spec)


def build_plane_scene(plane: LabelPlane, region: Region, seed, label_spec: SpinLabelSpec = MN_II) -> Scene:
    """Poisson number of label points, uniform over ``region`` at the plane height."""
    rng = as_generator(seed)
    count = int(rng.poisson(plane.density * region.area))
    return Scene(region, [], [PlaneLayer(plane, _uniform_centers(rng, count, region))], label_spec)


# -- rate evaluation -------------------------------------------------------------

def nv_signal(nv: NvCenter, scene: Scene, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Total induced rate at ``nv`` and each source's share as (source id, rate) pairs."""
    spec = scene.label_spec
    factor = rate_factor(spec.tau_c, constants)
    contributions = []
    for sid, pts, mult in scene.sources():
        if len(pts) == 0:
            continue
        rel = (pts - nv.position) * NM
        b2 = coupling_kernel(rel, nv.axis, spec.spin_factor, spec.gamma, constants)
        contributions.append((sid, math.fsum(mult * factor * b2)))
    total = math.fsum(c for _, c in contributions)
    return total, contributions


@dataclass
class LabelBatch:
    """Flat label points for many independent NV scenes.

    ``nv`` maps each point to its NV; ``owner`` is a batch-global source id
    (an SA complex, or a single plane point); ``owner_nv`` maps sources to NVs.
    Coordinates are relative to the owning NV's lateral position.
    """

    xyz: np.ndarray
    mult: np.ndarray
    nv: np.ndarray
    owner: np.ndarray
    owner_nv: np.ndarray

    @classmethod
    def empty(cls):
        z = np.zeros(0, dtype=np.int64)
        return cls(np.zeros((0, 3)), np.zeros(0), z, z, z)


def sa_batch(n_nv: int, sigma_sa: float, region_size: float, rng, geometry: SaGeometry = SaGeometry()) -> LabelBatch:
    """Independent SA scenes centred on each of ``n_nv`` NVs."""
    region = Region.centered(region_size)
    counts = rng.poisson(sigma_sa * region.area, n_nv)
    total = int(counts.sum())
    owner_nv = np.repeat(np.arange(n_nv), counts)
    centers = _uniform_centers(rng, total, region)
    if geometry.exclusion and total:
        starts = np.concatenate([[0], np.cumsum(counts)])
        centers = np.concatenate(
            [_exclude(rng, centers[a:b], region, geometry.cube_edge) for a, b in zip(starts[:-1], starts[1:])]
        ).reshape(-1, 2)
    rot = rng.uniform(0, 2 * math.pi, total) if geometry.random_rotation else np.zeros(total)
    occ = _occupied(rng, total, geometry.occupancy)
    local = _site_offsets(geometry.cube_edge)
    c, s = np.cos(rot)[:, None], np.sin(rot)[:, None]
    x = centers[:, :1] + c * local[:, 0] - s * local[:, 1]
    y = centers[:, 1:] + s * local[:, 0] + c * local[:, 1]
    z = np.broadcast_to(geometry.standoff + local[:, 2], x.shape)
    keep = occ.ravel()
    xyz = np.column_stack([x.ravel(), y.ravel(), z.ravel()])[keep]
    owner = np.repeat(np.arange(total), 4)[keep]
    return LabelBatch(
        xyz=xyz,
        mult=np.full(xyz.shape[0], float(geometry.labels_per_complex)),
        nv=owner_nv[owner],
        owner=owner,
        owner_nv=owner_nv,
    )


def plane_batch(n_nv: int, plane: LabelPlane, region_size: float, rng) -> LabelBatch:
    """Independent plane scenes centred on each of ``n_nv`` NVs."""
    region = Region.centered(region_size)
    counts = rng.poisson(plane.density * region.area, n_nv)
    total = int(counts.sum())
    xy = _uniform_centers(rng, total, region)
    owner_nv = np.repeat(np.arange(n_nv), counts)
    return LabelBatch(
        xyz=np.column_stack([xy, np.full(total, plane.height)]),
        mult=np.full(total, float(plane.labels_per_point)),
        nv=owner_nv,
        owner=np.arange(total),
        owner_nv=owner_nv,
    )


def batch_signals(depths, batch: LabelBatch, label_spec: SpinLabelSpec = MN_II,
                  axis_tilt: float = MAGIC_ANGLE, constants: PhysicalConstants = DEFAULT_CONSTANTS,
                  with_shares: bool = False):
    """Induced rate per NV for a :class:`LabelBatch`; NV ``i`` sits at (0, 0, -depths[i]).

    With ``with_shares`` also returns each NV's largest single-source fraction
    of its total (0 where the total is 0).
    """
    depths = np.asarray(depths, dtype=float)
    n = depths.size
    if batch.xyz.shape[0] == 0:
        zero = np.zeros(n)
        return (zero, zero.copy()) if with_shares else zero
    rel = batch.xyz.copy()
    rel[:, 2] += depths[batch.nv]
    b2 = coupling_kernel(rel * NM, nv_axis(axis_tilt), label_spec.spin_factor, label_spec.gamma, constants)
    contrib = batch.mult * rate_factor(label_spec.tau_c, constants) * b2
    delta = np.bincount(batch.nv, contrib, minlength=n)
    if not with_shares:
        return delta
    per_owner = np.bincount(batch.owner, contrib, minlength=batch.owner_nv.size)
    biggest = np.zeros(n)
    np.maximum.at(biggest, batch.owner_nv, per_owner)
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(delta > 0, biggest / delta, 0.0)
    return delta, share
