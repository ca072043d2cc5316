"""Synthetic multiview scenes, a forward-warping view synthesizer and quality metrics.

Scenes are textured planes seen by a horizontal camera rig.  The center
camera sits at the world origin looking down +z, so the world z of a hit
point is exactly its center-plane depth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .energy import DepthLabelSpace
from .imageio import DepthMapImage, Frame
from .segmentation import Segmentation


class DegenerateSpec(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


INFINITE = math.inf


@dataclass(frozen=True)
class Plane:
    """Surface ``z = depth + slope_x * x + slope_y * y`` in center-camera coordinates."""
    depth: float
    slope_x: float = 0.0
    slope_y: float = 0.0
    bounds: tuple[float, float, float, float] | None = None   # xmin, xmax, ymin, ymax
    texel: float = 0.01          # metric size of one noise cell
    seed: int = 0
    tint: tuple[float, float] = (128.0, 128.0)
    velocity: tuple[float, float] = (0.0, 0.0)                # metric shift per frame

    def depth_at(self, x, y):
        return self.depth + self.slope_x * x + self.slope_y * y


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 240
    views: int = 3
    focal: float = 300.0
    baseline: float = 0.1
    toe_in: float = 0.0          # yaw (radians) of each side camera towards the center
    z_near: float = 30.0 / 37.0
    z_far: float = 5.0
    levels: int = 32
    planes: tuple[Plane, ...] = ()
    frames: int = 1

    @property
    def label_space(self) -> DepthLabelSpace:
        return DepthLabelSpace(self.levels, self.z_near, self.z_far)

    def rig(self) -> geo.Rig:
        center = self.views // 2
        cams = []
        for i in range(self.views):
            off = i - center
            cams.append(geo.simple_camera(self.focal, (self.width - 1) / 2, (self.height - 1) / 2,
                                          position=(off * self.baseline, 0.0, 0.0),
                                          yaw=-off * self.toe_in, name=f"v{i}",
                                          width=self.width, height=self.height))
        return geo.Rig(tuple(cams), center)


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    spec: SceneSpec
    rig: geo.Rig
    frames: tuple[tuple[Frame, ...], ...]      # [frame][view]
    depths: tuple[tuple[np.ndarray, ...], ...]  # float ground truth, [frame][view]
    surfaces: tuple[tuple[np.ndarray, ...], ...] = field(default=())  # plane index per pixel

    @property
    def label_space(self) -> DepthLabelSpace:
        return self.spec.label_space

    def depth_map(self, frame: int, view: int) -> DepthMapImage:
        return DepthMapImage.from_depth(self.depths[frame][view], self.spec.z_near, self.spec.z_far)

    def true_labels(self, frame: int, view: int) -> np.ndarray:
        return self.label_space.label_of(self.depths[frame][view])


# -- procedural texture ----------------------------------------------------

def _lattice(seed: int, size: int = 512) -> np.ndarray:
    return np.random.default_rng(seed).random((size, size))


def value_noise(x, y, seed: int) -> np.ndarray:
    """Bilinear value noise in [0, 1] with unit lattice spacing."""
    table = _lattice(seed)
    n = table.shape[0]
    x0, y0 = np.floor(x), np.floor(y)
    fx, fy = x - x0, y - y0
    i0 = x0.astype(np.int64) % n
    j0 = y0.astype(np.int64) % n
    i1, j1 = (i0 + 1) % n, (j0 + 1) % n
    top = table[j0, i0] * (1 - fx) + table[j0, i1] * fx
    bot = table[j1, i0] * (1 - fx) + table[j1, i1] * fx
    return top * (1 - fy) + bot * fy


def plane_texture(plane: Plane, x, y) -> np.ndarray:
    """YCbCr texture: coarse checkerboard plus two octaves of value noise."""
    u, v = x / plane.texel, y / plane.texel
    checker = ((np.floor(u / 8) + np.floor(v / 8)) % 2) * 2 - 1
    fine = value_noise(u, v, plane.seed)
    coarse = value_noise(u / 4, v / 4, plane.seed + 1)
    Y = 128 + 25 * checker + 120 * (fine - 0.5) + 60 * (coarse - 0.5)
    cb = plane.tint[0] + 50 * (value_noise(u / 2, v / 2, plane.seed + 2) - 0.5)
    cr = plane.tint[1] + 50 * (value_noise(u / 2, v / 2, plane.seed + 3) - 0.5)
    return np.clip(np.stack([Y, cb, cr], axis=-1), 0, 255)


# -- rendering -------------------------------------------------------------

def render_view(spec: SceneSpec, cam: geo.CameraParams, frame: int = 0):
    """Ray-cast one view; returns (ycc float image, depth, surface index)."""
    h, w = spec.height, spec.width
    rows, cols = np.mgrid[0:h, 0:w]
    pix = np.column_stack([cols.ravel(), rows.ravel(), np.ones(h * w)]).astype(np.float64)
    rays = np.linalg.solve(cam.intrinsics, pix.T).T @ cam.rotation
    origin = cam.center
    best = np.full(h * w, np.inf)
    surface = np.full(h * w, -1, dtype=np.int64)
    depth = np.full(h * w, np.nan)
    color = np.zeros((h * w, 3))
    for k, plane in enumerate(spec.planes):
        vx, vy = plane.velocity
        shift_x, shift_y = vx * frame, vy * frame
        # plane moves rigidly: evaluate in its own (unshifted) coordinates
        ox, oy = origin[0] - shift_x, origin[1] - shift_y
        denom = rays[:, 2] - plane.slope_x * rays[:, 0] - plane.slope_y * rays[:, 1]
        numer = plane.depth + plane.slope_x * ox + plane.slope_y * oy - origin[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = numer / denom
        hit = np.isfinite(lam) & (lam > 1e-9)
        px = ox + lam * rays[:, 0]
        py = oy + lam * rays[:, 1]
        if plane.bounds is not None:
            x0, x1, y0, y1 = plane.bounds
            hit &= (px >= x0) & (px < x1) & (py >= y0) & (py < y1)
        win = hit & (lam < best)
        if not win.any():
            continue
        best[win] = lam[win]
        surface[win] = k
        depth[win] = origin[2] + lam[win] * rays[win, 2]
        color[win] = plane_texture(plane, px[win], py[win])
    if np.any(surface < 0):
        raise DegenerateSpec("some pixels see no surface; add an unbounded background plane")
    ycc = color.reshape(h, w, 3)
    # 4:2:0 chroma: one sample per 2x2 block, replicated
    for ch in (1, 2):
        sub = ycc[::2, ::2, ch]
        ycc[..., ch] = np.repeat(np.repeat(sub, 2, axis=0), 2, axis=1)[:h, :w]
    return ycc, depth.reshape(h, w), surface.reshape(h, w)


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    ls = spec.label_space
    for plane in spec.planes:
        if not ls.z_near <= plane.depth <= ls.z_far:
            raise DegenerateSpec(f"plane depth {plane.depth} outside [{ls.z_near}, {ls.z_far}]")
    if not any(p.bounds is None for p in spec.planes):
        raise DegenerateSpec("scene needs an unbounded background plane")
    rig = spec.rig()
    frames, depths, surfaces = [], [], []
    for f in range(spec.frames):
        fr, dp, sf = [], [], []
        for cam in rig.cameras:
            ycc, depth, surf = render_view(spec, cam, f)
            fr.append(Frame.from_ycc(ycc))
            dp.append(depth)
            sf.append(surf)
        frames.append(tuple(fr))
        depths.append(tuple(dp))
        surfaces.append(tuple(sf))
    return SyntheticScene(spec, rig, tuple(frames), tuple(depths), tuple(surfaces))


def two_plane_spec(frames: int = 1, **overrides) -> SceneSpec:
    """Textured square at label 20 floating over a background at label 4 (L = 32)."""
    base = SceneSpec(frames=frames)
    base = replace(base, **overrides)
    ls = base.label_space
    z_bg, z_fg = float(ls.depth_of(4)), float(ls.depth_of(20))
    px_fg = z_fg / base.focal
    half_w, half_h = 55 * px_fg, 45 * px_fg
    planes = (
        Plane(z_bg, texel=1.6 * z_bg / base.focal, seed=11, tint=(110.0, 150.0)),
        Plane(z_fg, bounds=(-half_w, half_w, -half_h, half_h), texel=1.6 * px_fg, seed=23,
              tint=(160.0, 100.0)),
    )
    return replace(base, planes=planes)


def moving_square_spec(frames: int = 3, step_px: float = 6.0, **overrides) -> SceneSpec:
    """Two-plane scene whose square slides right by ``step_px`` pixels per frame."""
    spec = two_plane_spec(frames, **overrides)
    bg, fg = spec.planes
    fg = replace(fg, velocity=(step_px * fg.depth / spec.focal, 0.0))
    return replace(spec, planes=(bg, fg))


def slanted_spec(l0: int = 4, l1: int = 24, **overrides) -> SceneSpec:
    """Single plane whose center-plane label ramps from ``l0`` to ``l1`` left to right."""
    base = replace(SceneSpec(), **overrides)
    ls = base.label_space
    z0, z1 = float(ls.depth_of(l0)), float(ls.depth_of(l1))
    # solve z(x) = a + b x along the image row through the center
    half = (base.width - 1) / 2 / base.focal
    # x = xn * z for normalized image coordinate xn
    b = (z1 - z0) / (half * z1 + half * z0)
    a = z0 * (1 + b * half)
    return replace(base, planes=(Plane(a, slope_x=b, texel=1.6 * a / base.focal, seed=5),))


PRESETS = {"two-plane": two_plane_spec, "moving": moving_square_spec, "slanted": slanted_spec}


# -- occlusion and ground truth labels ---------------------------------------

def visible_in_neighbors(depths, rig: geo.Rig, view: int, points, rel_tol: float = 1e-3) -> np.ndarray:
    """True where pixel ``points`` (N, 2) of ``view`` are seen by every neighbor view.

    ``depths`` holds per-view center-plane depth images; a point is hidden when
    it projects outside a neighbor or that neighbor sees something nearer.
    """
    pts = np.asarray(points, dtype=np.float64)
    topo = geo.NeighborTopology.from_rig(rig)
    col = np.rint(pts[:, 0]).astype(np.int64)
    row = np.rint(pts[:, 1]).astype(np.int64)
    z = depths[view][row, col]
    ok = np.ones(len(pts), dtype=bool)
    for other in topo[view]:
        uv = geo.correspond_many(pts, rig[view], rig[other], z, rig)
        inside = ~np.isnan(uv[:, 0])
        ok &= inside
        c2, r2 = geo.nearest_pixel(uv[inside], rig[other].width, rig[other].height)
        seen = depths[other][r2, c2]
        ok[inside] &= seen >= z[inside] * (1 - rel_tol)
    return ok


def segment_truth(seg: Segmentation, true_labels: np.ndarray) -> np.ndarray:
    """Ground-truth label of each segment, read at its anchor pixel."""
    return true_labels[seg.anchors[:, 1], seg.anchors[:, 0]]


def label_accuracy(estimated, truth, mask) -> tuple[float, float]:
    """(median absolute label error, fraction within one label) over ``mask``."""
    err = np.abs(np.asarray(estimated) - np.asarray(truth))[np.asarray(mask, dtype=bool)]
    if len(err) == 0:
        return 0.0, 1.0
    return float(np.median(err)), float(np.mean(err <= 1))


# -- view synthesis ------------------------------------------------------------

def _warp(target: geo.CameraParams, source: geo.CameraParams, frame: Frame, depth: np.ndarray, rig: geo.Rig):
    """Forward-warp one source view; returns (color, camera z) images with NaN holes."""
    h, w = depth.shape
    rows, cols = np.mgrid[0:h, 0:w]
    pix = np.column_stack([cols.ravel(), rows.ravel()])
    pts, ok = geo.unproject_many(pix, source, depth.ravel(), rig)
    uv, ok2 = geo.project_many(pts, target)
    ok &= ok2
    tw, th = target.width, target.height
    col = np.rint(uv[:, 0])
    row = np.rint(uv[:, 1])
    ok &= (col >= 0) & (col < tw) & (row >= 0) & (row < th)
    src = np.flatnonzero(ok)
    idx = (row[src] * tw + col[src]).astype(np.int64)
    zcam = pts[src] @ target.rotation[2] + target.translation[2]
    # nearest wins; among equal depths the lowest source index
    order = np.lexsort((src, zcam, idx))
    first = order[np.r_[True, idx[order][1:] != idx[order][:-1]]] if len(order) else order
    zbuf = np.full(th * tw, np.nan)
    out = np.full((th * tw, 3), np.nan)
    zbuf[idx[first]] = zcam[first]
    out[idx[first]] = frame.ycc().reshape(-1, 3)[src[first]]
    return out.reshape(th, tw, 3), zbuf.reshape(th, tw)


def _fill_holes(color: np.ndarray, zbuf: np.ndarray) -> np.ndarray:
    """Fill holes row by row from the nearest filled pixel on the farther (background) side."""
    h, w = zbuf.shape
    filled = ~np.isnan(zbuf)
    if filled.all():
        return color
    ar = np.broadcast_to(np.arange(w), (h, w))
    left = np.maximum.accumulate(np.where(filled, ar, -1), axis=1)
    right = np.minimum.accumulate(np.where(filled, ar, w)[:, ::-1], axis=1)[:, ::-1]
    rr = np.broadcast_to(np.arange(h)[:, None], (h, w))
    zl = np.where(left >= 0, zbuf[rr, np.clip(left, 0, w - 1)], -np.inf)
    zr = np.where(right < w, zbuf[rr, np.clip(right, 0, w - 1)], -np.inf)
    use_left = zl >= zr
    src = np.where(use_left, left, right)
    have = (src >= 0) & (src < w)
    out = color.copy()
    holes = ~filled & have
    out[holes] = color[rr[holes], src[holes]]
    out[~filled & ~have] = 128.0
    return out


def synthesize_view(target: geo.CameraParams, left: tuple[Frame, DepthMapImage, geo.CameraParams],
                    right: tuple[Frame, DepthMapImage, geo.CameraParams], rig: geo.Rig,
                    blend_tol: float = 0.02) -> Frame:
    """Depth-image-based rendering of ``target`` from two source views."""
    warped = []
    for frame, dmap, cam in (left, right):
        color, z = _warp(target, cam, frame, dmap.depth(), rig)
        dist = float(np.linalg.norm(cam.center - target.center))
        warped.append((color, z, 1.0 / max(dist, 1e-12)))
    zs = np.stack([z for _, z, _ in warped])
    zmin = np.nanmin(np.where(np.isnan(zs), np.inf, zs), axis=0)
    num = np.zeros(warped[0][0].shape)
    den = np.zeros(zs.shape[1:])
    for color, z, wgt in warped:
        use = ~np.isnan(z) & (z <= zmin * (1 + blend_tol))
        num[use] += wgt * color[use]
        den[use] += wgt
    zbuf = np.where(den > 0, zmin, np.nan)
    with np.errstate(invalid="ignore"):
        out = num / den[..., None]
    return Frame.from_ycc(_fill_holes(out, zbuf))


def psnr_luma(a: Frame, b: Frame) -> float:
    """Luma PSNR in dB; ``math.inf`` for identical planes."""
    if a.y.shape != b.y.shape:
        raise DimensionMismatch(f"{a.y.shape} vs {b.y.shape}")
    mse = np.mean((a.y.astype(np.float64) - b.y.astype(np.float64)) ** 2)
    if mse == 0:
        return INFINITE
    return float(10 * np.log10(255.0 ** 2 / mse))


@dataclass
class QualityReport:
    psnr: list[float]
    median_label_error: list[float]
    percent_correct: list[float]

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr)) if self.psnr else float("nan")

    @property
    def mean_percent_correct(self) -> float:
        return float(np.mean(self.percent_correct)) if self.percent_correct else float("nan")

    def rows(self):
        for f, (p, e, c) in enumerate(zip(self.psnr, self.median_label_error, self.percent_correct)):
            yield f, p, e, c


def frame_quality(frames, depth_maps, true_depths, rig: geo.Rig, segmentations,
                  label_space: DepthLabelSpace) -> tuple[float, float, float]:
    """(luma PSNR of the synthesized middle view, median label error, fraction within one label).

    The middle view is rebuilt from its two neighbors' frames and estimated
    depth maps.  Label errors cover every view, skipping segments whose anchor
    is hidden from a neighbor view.
    """
    mid = rig.center_index
    if not 0 < mid < len(rig) - 1:
        raise ValueError("the middle view needs a neighbor on each side")
    synth = synthesize_view(rig[mid], (frames[mid - 1], depth_maps[mid - 1], rig[mid - 1]),
                            (frames[mid + 1], depth_maps[mid + 1], rig[mid + 1]), rig)
    psnr = psnr_luma(synth, frames[mid])
    errs, within = [], []
    for v, seg in enumerate(segmentations):
        truth = segment_truth(seg, label_space.label_of(true_depths[v]))
        est = segment_truth(seg, label_space.label_of(depth_maps[v].depth()))
        vis = visible_in_neighbors(true_depths, rig, v, seg.anchors)
        err = np.abs(est - truth)[vis]
        errs.append(err)
    err = np.concatenate(errs)
    if len(err) == 0:
        return psnr, 0.0, 1.0
    return psnr, float(np.median(err)), float(np.mean(err <= 1))


def evaluate(config, scene: SyntheticScene, segmentations=None, depth_override=None) -> QualityReport:
    """Run the estimator on ``scene`` and score it against the scene's ground truth.

    ``depth_override(frame, view)`` replaces estimated depth maps (for bound
    and sanity runs); segmentation and label errors then refer to it.
    """
    from .pipeline import estimate_frames

    if len(scene.rig) < 3:
        raise ValueError("evaluation needs at least three views")
    report = QualityReport([], [], [])
    results = estimate_frames(lambda f: scene.frames[f], scene.rig, config, scene.spec.frames, segmentations)
    for res in results:
        f = res.index
        maps = res.depth_maps
        if depth_override is not None:
            maps = [depth_override(f, v) for v in range(len(maps))]
        p, med, pc = frame_quality(scene.frames[f], maps, scene.depths[f], scene.rig,
                                   res.segmentations, scene.label_space)
        report.psnr.append(p)
        report.median_label_error.append(med)
        report.percent_correct.append(pc)
    return report
