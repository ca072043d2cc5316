"""Segment-level cost function: inter-view matching reward plus adjacency smoothing.

Every quantity here is a pure function of frames, segmentations, cameras and a
labeling.  The optimizer in :mod:`segdepth.graphcut` builds its graphs from the
per-label tables below, but move acceptance is always judged by
:func:`total_energy`, which recomputes correspondences from scratch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import geometry as geo
from .imageio import Frame
from .segmentation import Segmentation

BETA_EPS = 1.0


@dataclass(frozen=True)
class DepthLabelSpace:
    """``levels`` planes parallel to the center camera, uniform in inverse depth."""
    levels: int
    z_near: float
    z_far: float

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("need at least two depth levels")
        if not 0 < self.z_near < self.z_far:
            raise ValueError("need 0 < z_near < z_far")

    def depth_of(self, label):
        label = np.asarray(label, dtype=np.float64)
        inv = 1.0 / self.z_far + label / (self.levels - 1) * (1.0 / self.z_near - 1.0 / self.z_far)
        return 1.0 / inv

    def label_of(self, depth):
        """Nearest label (in inverse depth) for metric depth(s)."""
        inv = 1.0 / np.asarray(depth, dtype=np.float64)
        t = (inv - 1.0 / self.z_far) / (1.0 / self.z_near - 1.0 / self.z_far) * (self.levels - 1)
        return np.clip(np.rint(t), 0, self.levels - 1).astype(np.int64)


@dataclass(frozen=True)
class EnergyParams:
    beta0: float = 4.0
    K: float = 30.0
    window: int = 3

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be a positive odd integer")

    @property
    def offsets(self) -> np.ndarray:
        r = self.window // 2
        dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
        return np.column_stack([dx.ravel(), dy.ravel()])


@dataclass
class Labeling:
    """Per-view segment labels plus frozen flags (frozen labels never move)."""
    labels: list[np.ndarray]
    frozen: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.labels = [np.asarray(l, dtype=np.int64).copy() for l in self.labels]
        if not self.frozen:
            self.frozen = [np.zeros(len(l), dtype=bool) for l in self.labels]
        self.frozen = [np.asarray(f, dtype=bool).copy() for f in self.frozen]

    def copy(self) -> "Labeling":
        return Labeling(self.labels, self.frozen)

    @property
    def active_count(self) -> int:
        return int(sum((~f).sum() for f in self.frozen))

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        return (len(self.labels) == len(other.labels)
                and all(np.array_equal(a, b) for a, b in zip(self.labels, other.labels))
                and all(np.array_equal(a, b) for a, b in zip(self.frozen, other.frozen)))


# -- scalar building blocks ------------------------------------------------

def inter_view_term(m, same_label: bool, K: float) -> float:
    """Matching reward ``min(0, m - K)``, only for equal labels with a valid match."""
    if m is None or not same_label:
        return 0.0
    return min(0.0, m - K)


def smoothing_coefficient(color_s, color_t, beta0: float) -> float:
    dist = float(np.abs(np.asarray(color_s, dtype=np.float64) - np.asarray(color_t, dtype=np.float64)).sum())
    return beta0 / max(BETA_EPS, dist)


def discontinuity_term(d_s: int, d_t: int, beta: float) -> float:
    return beta * abs(int(d_s) - int(d_t))


# -- the multiview problem -------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultiviewData:
    """Everything the cost function reads: one frame, segmentation and camera per view."""
    frames: tuple[Frame, ...]
    segmentations: tuple[Segmentation, ...]
    rig: geo.Rig
    label_space: DepthLabelSpace
    params: EnergyParams
    topology: geo.NeighborTopology | None = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "segmentations", tuple(self.segmentations))
        if not len(self.frames) == len(self.segmentations) == len(self.rig):
            raise ValueError("frames, segmentations and cameras must match one-to-one")
        if self.topology is None:
            object.__setattr__(self, "topology", geo.NeighborTopology.from_rig(self.rig))
        cams = tuple(c if c.width is not None else c.with_size(f.width, f.height)
                     for c, f in zip(self.rig.cameras, self.frames))
        object.__setattr__(self, "rig", geo.Rig(cams, self.rig.center_index))

    @property
    def view_count(self) -> int:
        return len(self.frames)

    @cached_property
    def ycc(self) -> tuple[np.ndarray, ...]:
        return tuple(f.ycc() for f in self.frames)

    @cached_property
    def betas(self) -> tuple[np.ndarray, ...]:
        """Smoothing coefficient for every adjacency edge of every view."""
        out = []
        for seg in self.segmentations:
            mc = seg.mean_colors
            dist = np.abs(mc[seg.edges[:, 0]] - mc[seg.edges[:, 1]]).sum(axis=1)
            out.append(self.params.beta0 / np.maximum(BETA_EPS, dist))
        return tuple(out)

    def view_pairs(self):
        """Ordered (view, neighbor view) pairs, both directions."""
        return [(c, c2) for c in range(self.view_count) for c2 in self.topology[c]]


def window_costs(data: MultiviewData, c: int, c2: int, centroids: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Mean L1 YCbCr distance between windows at ``centroids`` (view c) and ``uv`` (view c2).

    Rows with NaN ``uv`` give NaN.
    """
    off = data.params.offsets
    a, b = data.ycc[c], data.ycc[c2]
    ha, wa = a.shape[:2]
    hb, wb = b.shape[:2]
    valid = ~np.isnan(uv[:, 0])
    out = np.full(len(centroids), np.nan)
    if not valid.any():
        return out
    ca, ra = geo.nearest_pixel(centroids[valid], wa, ha)
    ca, ra = np.clip(ca, 0, wa - 1), np.clip(ra, 0, ha - 1)
    cb, rb = geo.nearest_pixel(uv[valid], wb, hb)
    xa = np.clip(ca[:, None] + off[None, :, 0], 0, wa - 1)
    ya = np.clip(ra[:, None] + off[None, :, 1], 0, ha - 1)
    xb = np.clip(cb[:, None] + off[None, :, 0], 0, wb - 1)
    yb = np.clip(rb[:, None] + off[None, :, 1], 0, hb - 1)
    diff = np.abs(a[ya, xa] - b[yb, xb]).sum(axis=-1)
    out[valid] = diff.mean(axis=1)
    return out


def correspondences(data: MultiviewData, c: int, c2: int, labels) -> tuple[np.ndarray, np.ndarray]:
    """Corresponded pixel and partner segment in ``c2`` for each segment of ``c``.

    ``labels`` is a scalar label or one label per segment.  Partners are -1
    where the correspondence leaves view ``c2``.
    """
    seg, seg2 = data.segmentations[c], data.segmentations[c2]
    depth = data.label_space.depth_of(np.broadcast_to(labels, (seg.count,)))
    uv = geo.correspond_many(seg.centroids, data.rig[c], data.rig[c2], depth, data.rig)
    partner = np.full(seg.count, -1, dtype=np.int64)
    ok = ~np.isnan(uv[:, 0])
    col, row = geo.nearest_pixel(uv[ok], seg2.width, seg2.height)
    partner[ok] = seg2.label_map[row, col]
    return uv, partner


def match_core(data: MultiviewData, c: int, s: int, c2: int, label: int):
    """Window matching cost of segment ``s`` of view ``c`` against view ``c2``; None when out of view."""
    seg = data.segmentations[c]
    cam, cam2 = data.rig[c], data.rig[c2]
    uv = geo.correspond(seg.centroids[s], cam, cam2, float(data.label_space.depth_of(label)), data.rig)
    if uv is None:
        return None
    return float(window_costs(data, c, c2, seg.centroids[s:s + 1], uv.reshape(1, 2))[0])


class MatchTables:
    """Per-label matching costs and partner segments, computed lazily one label at a time."""

    def __init__(self, data: MultiviewData):
        self.data = data
        L = data.label_space.levels
        self.pairs = data.view_pairs()
        self.cost = {p: np.full((data.segmentations[p[0]].count, L), np.nan) for p in self.pairs}
        self.partner = {p: np.full((data.segmentations[p[0]].count, L), -1, dtype=np.int64)
                        for p in self.pairs}
        self.done = np.zeros(L, dtype=bool)

    def ensure(self, labels) -> None:
        for l in np.unique(np.asarray(labels, dtype=np.int64)):
            if self.done[l]:
                continue
            for (c, c2) in self.pairs:
                uv, partner = correspondences(self.data, c, c2, l)
                self.cost[c, c2][:, l] = window_costs(self.data, c, c2, self.data.segmentations[c].centroids, uv)
                self.partner[c, c2][:, l] = partner
            self.done[l] = True

    def reward(self, pair, segs, labels) -> np.ndarray:
        """``min(0, m - K)`` for (segment, label) pairs; 0 for out-of-view."""
        self.ensure(labels)
        m = self.cost[pair][segs, labels]
        return np.where(np.isnan(m), 0.0, np.minimum(0.0, m - self.data.params.K))

    def partners(self, pair, segs, labels) -> np.ndarray:
        self.ensure(labels)
        return self.partner[pair][segs, labels]


def energy_terms(labeling: Labeling, data: MultiviewData) -> tuple[float, float]:
    """(matching component, discontinuity component) of the total energy."""
    K = data.params.K
    match = 0.0
    for c, c2 in data.view_pairs():
        lab = labeling.labels[c]
        uv, partner = correspondences(data, c, c2, lab)
        m = window_costs(data, c, c2, data.segmentations[c].centroids, uv)
        ok = partner >= 0
        same = np.zeros(len(lab), dtype=bool)
        same[ok] = labeling.labels[c2][partner[ok]] == lab[ok]
        match += float(np.where(same, np.minimum(0.0, m - K), 0.0).sum())
    smooth = 0.0
    for c, seg in enumerate(data.segmentations):
        lab = labeling.labels[c]
        # each unordered adjacent pair appears twice in the double sum
        smooth += 2.0 * float((data.betas[c] * np.abs(lab[seg.edges[:, 0]] - lab[seg.edges[:, 1]])).sum())
    return match, smooth


def total_energy(labeling: Labeling, data: MultiviewData) -> float:
    match, smooth = energy_terms(labeling, data)
    return match + smooth
