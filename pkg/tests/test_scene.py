import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nvrelaxo.rng import substream
from nvrelaxo.scene import (
    LabelBatch,
    LabelPlane,
    NvCenter,
    Region,
    SaComplex,
    SaGeometry,
    Scene,
    batch_signals,
    build_plane_scene,
    build_sa_scene,
    nv_signal,
    plane_batch,
    sa_batch,
)
from nvrelaxo.spinphysics import MAGIC_ANGLE, MN_II, coupling_kernel, nv_axis, rate_factor

NM = 1e-9


def scene_to_batch(scene: Scene) -> LabelBatch:
    xyz, mult, owner = [], [], []
    n_sources = 0
    for sid, pts, m in scene.sources():
        xyz.append(pts)
        mult += [m] * len(pts)
        owner += [sid] * len(pts)
        n_sources = sid + 1
    if not xyz:
        return LabelBatch.empty()
    xyz = np.vstack(xyz)
    owner = np.array(owner)
    return LabelBatch(xyz, np.array(mult, float), np.zeros(len(owner), int), owner, np.zeros(n_sources, int))


def test_pocket_layout():
    pts = SaComplex((0.0, 0.0), cube_edge=5.8).label_points()
    top, bottom = pts[pts[:, 2] > 0], pts[pts[:, 2] == 0]
    assert len(top) == 2 and len(bottom) == 2
    np.testing.assert_allclose(np.abs(pts[:, :2]), 2.9)
    # the two face diagonals cross when viewed from above
    d_top = top[0, :2] - top[1, :2]
    d_bottom = bottom[0, :2] - bottom[1, :2]
    assert abs(d_top @ d_bottom) < 1e-12
    np.testing.assert_allclose(pts.mean(axis=0)[:2], 0.0, atol=1e-12)


def test_complex_rotation_preserves_geometry():
    a = SaComplex((1.0, 2.0), rotation=0.0).label_points()
    b = SaComplex((1.0, 2.0), rotation=1.1).label_points()
    da = np.linalg.norm(a[:, None] - a[None], axis=-1)
    db = np.linalg.norm(b[:, None] - b[None], axis=-1)
    np.testing.assert_allclose(da, db, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_scene_and_batch_paths_agree(seed):
    scene = build_sa_scene(0.02, Region.centered(40.0), seed)
    nv = NvCenter((0.0, 0.0), depth=4.0)
    total, parts = nv_signal(nv, scene)
    batch = scene_to_batch(scene)
    delta, share = batch_signals([4.0], batch, with_shares=True)
    assert delta[0] == pytest.approx(total, rel=1e-12)
    if total > 0:
        assert share[0] == pytest.approx(max(c for _, c in parts) / total, rel=1e-12)


def test_single_label_signal_matches_kernel():
    scene = Scene(Region.centered(40.0), [SaComplex((3.0, -1.0), occupied_sites=(0,), rotation=0.0)])
    nv = NvCenter((0.0, 0.0), depth=5.0)
    pos = (scene.complexes[0].label_points()[0] - nv.position) * NM
    expected = 4 * rate_factor(MN_II.tau_c) * coupling_kernel(pos, nv.axis, MN_II.spin_factor, MN_II.gamma)
    assert nv_signal(nv, scene)[0] == pytest.approx(expected, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.integers(0, 1000))
def test_translation_invariance(dx, dy, seed):
    scene = build_sa_scene(0.01, Region.centered(40.0), seed)
    nv = NvCenter((1.0, -2.0), depth=6.0)
    moved = NvCenter((1.0 + dx, -2.0 + dy), depth=6.0)
    a = nv_signal(nv, scene)[0]
    b = nv_signal(moved, scene.translated(dx, dy))[0]
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


def test_empty_scene():
    scene = build_sa_scene(0.0, Region.centered(40.0), 1)
    assert scene.is_empty()
    assert nv_signal(NvCenter(), scene)[0] == 0.0
    d, s = batch_signals(np.full(10, 5.0), sa_batch(10, 0.0, 40.0, substream(0, "t")), with_shares=True)
    assert not d.any() and not s.any()


def test_poisson_count_mean():
    counts = [len(build_sa_scene(0.007, Region.centered(40.0), s).complexes) for s in range(2000)]
    assert np.mean(counts) == pytest.approx(0.007 * 1600, rel=0.03)


def test_occupancy_thins_pockets():
    batch = sa_batch(2000, 0.01, 40.0, substream(3, "t"), SaGeometry(occupancy=0.5))
    n_complex = batch.owner_nv.size
    assert batch.xyz.shape[0] / (4 * n_complex) == pytest.approx(0.5, abs=0.02)


def test_exclusion_keeps_complexes_apart():
    scene = build_sa_scene(0.02, Region.centered(40.0), 4, SaGeometry(exclusion=True))
    c = np.array([x.center for x in scene.complexes])
    dist = np.linalg.norm(c[:, None] - c[None], axis=-1) + np.eye(len(c)) * 1e9
    assert dist.min() >= 5.8


def test_scene_json_round_trip():
    scene = build_sa_scene(0.01, Region.centered(40.0), 8)
    plane = build_plane_scene(LabelPlane(0.01, 2.0), Region.centered(40.0), 9)
    scene = Scene(scene.region, scene.complexes, plane.layers)
    back = Scene.from_json(json.loads(scene.dumps()))
    nv = NvCenter(depth=3.0)
    assert nv_signal(nv, back)[0] == nv_signal(nv, scene)[0]
    with pytest.raises(ValueError):
        Scene.from_json({**scene.to_json(), "extra": 1})


def test_complex_outside_region_rejected():
    with pytest.raises(ValueError):
        Scene(Region.centered(10.0), [SaComplex((20.0, 0.0))])


def test_plane_mean_matches_sheet_integral():
    # mean over random planes equals the integral over the square region
    depth, plane = 5.5, LabelPlane(0.02, 2.0, 4)
    z = depth + plane.height
    axis = nv_axis(MAGIC_ANGLE)

    def kern(y, x):
        return coupling_kernel(np.array([x, y, z]) * NM, axis, MN_II.spin_factor, MN_II.gamma)

    val, _ = integrate.dblquad(kern, -20, 20, -20, 20, epsrel=1e-10)
    expected = rate_factor(MN_II.tau_c) * plane.labels_per_point * plane.density * val

    n = 40_000
    batch = plane_batch(n, plane, 40.0, substream(0, "plane-test"))
    delta = batch_signals(np.full(n, depth), batch)
    sem = delta.std() / math.sqrt(n)
    assert abs(delta.mean() - expected) < 4 * sem
    # and the finite region captures nearly all of the infinite-sheet value
    infinite = rate_factor(MN_II.tau_c) * 4 * 0.02 * 2 * math.pi * MN_II.spin_factor \
        * (1e-7 * MN_II.gamma * 1.76085963e11 * 1.054571817e-34) ** 2 / (z * NM) ** 4 * 1e18
    assert expected / infinite == pytest.approx(1.0, abs=0.02)


def test_nv_center_validation():
    with pytest.raises(ValueError):
        NvCenter(depth=0.0)
    with pytest.raises(ValueError):
        LabelPlane(-1.0)
    with pytest.raises(ValueError):
        SaGeometry(occupancy=1.5)
