import math

import numpy as np
import pytest

from segdepth import evaluation as ev
from segdepth import geometry as geo
from segdepth.imageio import DepthMapImage, Frame


def shifted_frame(frame: Frame, dy: int) -> Frame:
    return Frame(np.clip(frame.y.astype(int) + dy, 0, 255).astype(np.uint8), frame.cb, frame.cr)


# -- PSNR -----------------------------------------------------------------------------------

def test_psnr_closed_forms():
    a = Frame.from_ycc(np.full((16, 16, 3), 100.0))
    assert ev.psnr_luma(a, a) == ev.INFINITE
    assert ev.psnr_luma(a, shifted_frame(a, 1)) == pytest.approx(10 * math.log10(65025), abs=0.01)
    assert ev.psnr_luma(a, shifted_frame(a, 1)) == pytest.approx(48.13, abs=0.01)
    black = Frame.from_ycc(np.zeros((16, 16, 3)))
    white = Frame.from_ycc(np.full((16, 16, 3), 255.0))
    assert ev.psnr_luma(black, white) == pytest.approx(0.0)


def test_psnr_dimension_mismatch():
    with pytest.raises(ev.DimensionMismatch):
        ev.psnr_luma(Frame.from_ycc(np.zeros((16, 16, 3))), Frame.from_ycc(np.zeros((16, 18, 3))))


def test_psnr_symmetric_and_monotone_in_noise():
    rng = np.random.default_rng(0)
    base = Frame.from_ycc(rng.uniform(40, 210, (32, 32, 3)))
    noise = rng.standard_normal((32, 32))
    values = []
    for amp in (2, 8, 20):
        other = Frame(np.clip(np.rint(base.y + amp * noise), 0, 255).astype(np.uint8), base.cb, base.cr)
        assert ev.psnr_luma(base, other) == ev.psnr_luma(other, base)
        values.append(ev.psnr_luma(base, other))
    assert values[0] > values[1] > values[2]


# -- scene generation -----------------------------------------------------------------------------

def test_fronto_parallel_plane_uniform_labels():
    ls = ev.SceneSpec().label_space
    z = float(ls.depth_of(9))
    spec = ev.SceneSpec(width=64, height=48, planes=(ev.Plane(z, texel=0.01),))
    scene = ev.generate_scene(spec)
    for v in range(3):
        assert (scene.true_labels(0, v) == 9).all()


def test_two_plane_ground_truth_matches_analytic_mask():
    spec = ev.two_plane_spec()
    scene = ev.generate_scene(spec)
    bg, fg = spec.planes
    x0, x1, y0, y1 = fg.bounds
    for v, cam in enumerate(scene.rig.cameras):
        h, w = spec.height, spec.width
        rows, cols = np.mgrid[0:h, 0:w]
        # the camera is a pure x translation of the center camera: ray hits z = fg.depth at
        cx_world = cam.center[0]
        X = cx_world + (cols - cam.intrinsics[0, 2]) / cam.intrinsics[0, 0] * fg.depth
        Y = (rows - cam.intrinsics[1, 2]) / cam.intrinsics[1, 1] * fg.depth
        mask = (X >= x0) & (X < x1) & (Y >= y0) & (Y < y1)
        assert np.array_equal(scene.surfaces[0][v] == 1, mask)
        expected = np.where(mask, 20, 4)
        assert np.array_equal(scene.true_labels(0, v), expected)


def test_slanted_labels_monotone():
    spec = ev.slanted_spec(4, 24, width=128, height=64)
    scene = ev.generate_scene(spec)
    lab = scene.true_labels(0, 1)
    row = lab[32]
    assert np.all(np.diff(row) >= 0)
    assert row[0] == 4 and row[-1] == 24


def test_generate_scene_deterministic():
    a = ev.generate_scene(ev.two_plane_spec(width=96, height=64))
    b = ev.generate_scene(ev.two_plane_spec(width=96, height=64))
    for fa, fb in zip(a.frames[0], b.frames[0]):
        assert fa == fb


def test_degenerate_specs():
    with pytest.raises(ev.DegenerateSpec):
        ev.generate_scene(ev.SceneSpec(width=32, height=32, planes=(ev.Plane(2.0, bounds=(-1, 1, -1, 1)),)))
    with pytest.raises(ev.DegenerateSpec):
        ev.generate_scene(ev.SceneSpec(width=32, height=32, planes=(ev.Plane(50.0),)))


def test_occlusion_mask():
    spec = ev.two_plane_spec()
    scene = ev.generate_scene(spec)
    depths = scene.depths[0]
    h, w = spec.height, spec.width
    rows, cols = np.mgrid[0:h, 0:w]
    pts = np.column_stack([cols.ravel(), rows.ravel()])
    vis = ev.visible_in_neighbors(depths, scene.rig, 1, pts).reshape(h, w)
    # foreground is visible from both neighbors; background next to the square is hidden
    assert vis[scene.surfaces[0][1] == 1].all()
    # the band hidden by the square in the right view: disparity difference is 16 px
    fg_cols = np.flatnonzero((scene.surfaces[0][1] == 1).any(axis=0))
    left_edge = fg_cols.min()
    band = vis[120, left_edge - 15:left_edge]
    assert not band.any()
    assert vis[120, 40:left_edge - 20].all()


# -- view synthesis ------------------------------------------------------------------------------

def test_synthesis_identity_warp():
    scene = ev.generate_scene(ev.two_plane_spec(width=160, height=120))
    rig = scene.rig
    f0, d0 = scene.frames[0][0], scene.depth_map(0, 0)
    f2, d2 = scene.frames[0][2], scene.depth_map(0, 2)
    out = ev.synthesize_view(rig[0], (f0, d0, rig[0]), (f2, d2, rig[2]), rig)
    # the coincident source has weight 1 / distance -> infinite; output equals it
    assert np.array_equal(out.y, f0.y)


def test_synthesis_uniform_depth_is_shift():
    spec = ev.SceneSpec(width=96, height=64)
    z = float(spec.label_space.depth_of(6))
    spec = ev.SceneSpec(width=96, height=64, planes=(ev.Plane(z, texel=1.6 * z / 300),))
    scene = ev.generate_scene(spec)
    rig = scene.rig
    disp = spec.focal * spec.baseline / z       # 12 px with these settings
    assert disp == pytest.approx(12.0)
    src = scene.frames[0][0]
    dm = scene.depth_map(0, 0)
    out = ev.synthesize_view(rig[1], (src, dm, rig[0]), (src, dm, rig[0]), rig)
    d = int(round(disp))
    np.testing.assert_array_equal(out.y[:, : 96 - d], src.y[:, d:])


def test_synthesis_matches_renderer():
    scene = ev.generate_scene(ev.two_plane_spec())
    rig = scene.rig
    out = ev.synthesize_view(rig[1], (scene.frames[0][0], scene.depth_map(0, 0), rig[0]),
                             (scene.frames[0][2], scene.depth_map(0, 2), rig[2]), rig)
    assert ev.psnr_luma(out, scene.frames[0][1]) > 35


# -- evaluate ------------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_two_plane():
    from segdepth.config import EstimationConfig
    spec = ev.two_plane_spec()
    scene = ev.generate_scene(spec)
    cfg = EstimationConfig(views=("a", "b", "c"), cameras="c", z_near=spec.z_near, z_far=spec.z_far,
                           width=spec.width, height=spec.height, depth_levels=spec.levels, segments=2000)
    return scene, cfg


def test_evaluate_bounds(small_two_plane):
    scene, cfg = small_two_plane
    truth = ev.evaluate(cfg, scene, depth_override=lambda f, v: scene.depth_map(f, v))
    flat = ev.evaluate(cfg, scene, depth_override=lambda f, v: DepthMapImage.from_depth(
        np.full(scene.depths[f][v].shape, scene.spec.z_far), scene.spec.z_near, scene.spec.z_far))
    assert truth.mean_psnr > 35
    assert flat.mean_psnr < truth.mean_psnr
    assert truth.mean_percent_correct == 1.0


def test_evaluate_estimated(small_two_plane):
    scene, cfg = small_two_plane
    rep = ev.evaluate(cfg, scene)
    assert rep.mean_percent_correct >= 0.95
    assert 0 <= rep.median_label_error[0] <= 1
    assert rep.psnr[0] >= 0
