"""SNIC superpixels computed directly in YCbCr."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np

from .imageio import Frame

MIN_SEGMENT_SIZE = 4
_OFFSETS8 = np.array([(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
                     dtype=np.int64)


@dataclass(frozen=True)
class SegmentInfo:
    id: int
    centroid: np.ndarray      # (x, y) in pixels
    mean_color: np.ndarray    # (Y, Cb, Cr)
    pixel_count: int
    neighbors: frozenset
    anchor: tuple[int, int]   # member pixel (col, row) used for collocation


@dataclass(frozen=True, eq=False)
class Segmentation:
    label_map: np.ndarray     # (H, W) int32
    centroids: np.ndarray     # (n, 2) float64, (x, y)
    mean_colors: np.ndarray   # (n, 3) float64
    counts: np.ndarray        # (n,) int64
    edges: np.ndarray         # (E, 2) int64, s < t, 4-connected adjacency
    anchors: np.ndarray       # (n, 2) int64, (col, row)

    @property
    def count(self) -> int:
        return len(self.counts)

    @property
    def width(self) -> int:
        return self.label_map.shape[1]

    @property
    def height(self) -> int:
        return self.label_map.shape[0]

    @cached_property
    def neighbor_lists(self) -> list[np.ndarray]:
        nbrs: list[list[int]] = [[] for _ in range(self.count)]
        for s, t in self.edges:
            nbrs[s].append(int(t))
            nbrs[t].append(int(s))
        return [np.array(sorted(n), dtype=np.int64) for n in nbrs]

    def info(self, s: int) -> SegmentInfo:
        return SegmentInfo(s, self.centroids[s], self.mean_colors[s], int(self.counts[s]),
                           frozenset(int(t) for t in self.neighbor_lists[s]),
                           (int(self.anchors[s, 0]), int(self.anchors[s, 1])))

    @property
    def segments(self) -> list[SegmentInfo]:
        return [self.info(s) for s in range(self.count)]

    @classmethod
    def from_label_map(cls, label_map, frame: Frame | np.ndarray) -> "Segmentation":
        """Derive per-segment statistics from a dense label map (ids 0..n-1)."""
        labels = np.ascontiguousarray(label_map, dtype=np.int32)
        ycc = frame.ycc() if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
        h, w = labels.shape
        n = int(labels.max()) + 1
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n)
        if np.any(counts == 0):
            raise ValueError("label map has id gaps")
        rows, cols = np.divmod(np.arange(h * w), w)
        centroids = np.column_stack([np.bincount(flat, cols, n), np.bincount(flat, rows, n)]) / counts[:, None]
        colors = ycc.reshape(-1, 3)
        means = np.column_stack([np.bincount(flat, colors[:, i], n) for i in range(3)]) / counts[:, None]

        pairs = [np.column_stack([labels[:, :-1].ravel(), labels[:, 1:].ravel()]),
                 np.column_stack([labels[:-1, :].ravel(), labels[1:, :].ravel()])]
        pairs = np.concatenate(pairs)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        pairs = np.sort(pairs, axis=1).astype(np.int64)
        edges = np.unique(pairs, axis=0) if len(pairs) else np.zeros((0, 2), dtype=np.int64)

        anchors = _anchors(labels, centroids)
        for arr in (labels, centroids, means, counts, edges, anchors):
            arr.setflags(write=False)
        return cls(labels, centroids, means, counts.astype(np.int64), edges, anchors)


def _anchors(labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    h, w = labels.shape
    n = len(centroids)
    # same half-up rounding as the matching lookup
    col = np.clip(np.floor(centroids[:, 0] + 0.5 + 1e-9).astype(np.int64), 0, w - 1)
    row = np.clip(np.floor(centroids[:, 1] + 0.5 + 1e-9).astype(np.int64), 0, h - 1)
    anchors = np.column_stack([col, row])
    outside = np.flatnonzero(labels[row, col] != np.arange(n))
    if len(outside):
        flat = labels.ravel()
        idx = np.flatnonzero(np.isin(flat, outside))
        r, c = np.divmod(idx, w)
        seg = flat[idx]
        d2 = (c - centroids[seg, 0]) ** 2 + (r - centroids[seg, 1]) ** 2
        order = np.lexsort((idx, d2, seg))
        first = order[np.r_[True, seg[order][1:] != seg[order][:-1]]]
        anchors[seg[first]] = np.column_stack([c[first], r[first]])
    return anchors


def grid_shape(width: int, height: int, requested: int) -> tuple[int, int]:
    """Seed grid (nx, ny) with nx*ny close to ``requested`` and near-square cells."""
    g = math.sqrt(width * height / requested)
    best = None
    for ny in range(max(1, math.floor(height / g) - 2), math.ceil(height / g) + 3):
        if ny > height:
            break
        nx = min(max(1, round(requested / ny)), width)
        key = (abs(nx * ny - requested), abs(math.log((width / nx) / (height / ny))))
        if best is None or key < best[0]:
            best = (key, nx, ny)
    return best[1], best[2]


def seed_positions(width: int, height: int, requested: int) -> np.ndarray:
    nx, ny = grid_shape(width, height, requested)
    xs = ((np.arange(nx) + 0.5) * width / nx).astype(np.int64)
    ys = ((np.arange(ny) + 0.5) * height / ny).astype(np.int64)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


@numba.njit(cache=True)
def _heap_push(hd, hk, hi, size, d, k, i):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        pd, pk, pi = hd[parent], hk[parent], hi[parent]
        if pd < d or (pd == d and (pk < k or (pk == k and pi < i))):
            break
        hd[pos], hk[pos], hi[pos] = pd, pk, pi
        pos = parent
    hd[pos], hk[pos], hi[pos] = d, k, i
    return size + 1


@numba.njit(cache=True)
def _heap_pop(hd, hk, hi, size):
    d, k, i = hd[0], hk[0], hi[0]
    size -= 1
    ld, lk, li = hd[size], hk[size], hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size:
            cd, ck, ci = hd[child + 1], hk[child + 1], hi[child + 1]
            if cd < hd[child] or (cd == hd[child] and (ck < hk[child] or (ck == hk[child] and ci < hi[child]))):
                child += 1
        cd, ck, ci = hd[child], hk[child], hi[child]
        if ld < cd or (ld == cd and (lk < ck or (lk == ck and li <= ci))):
            break
        hd[pos], hk[pos], hi[pos] = cd, ck, ci
        pos = child
    hd[pos], hk[pos], hi[pos] = ld, lk, li
    return d, k, i, size


@numba.njit(cache=True)
def _snic(ycc, seeds, spatial_weight, offsets):
    h, w, _ = ycc.shape
    n = seeds.shape[0]
    labels = np.full(h * w, -1, dtype=np.int32)
    sums = np.zeros((n, 5))
    counts = np.zeros(n)
    cap = offsets.shape[0] * h * w + n
    hd = np.empty(cap)
    hk = np.empty(cap, dtype=np.int64)
    hi = np.empty(cap, dtype=np.int64)
    size = 0
    for k in range(n):
        size = _heap_push(hd, hk, hi, size, 0.0, k, seeds[k, 1] * w + seeds[k, 0])
    sw2 = spatial_weight * spatial_weight
    while size > 0:
        d, k, i, size = _heap_pop(hd, hk, hi, size)
        if labels[i] >= 0:
            continue
        labels[i] = k
        y, x = i // w, i % w
        sums[k, 0] += x
        sums[k, 1] += y
        sums[k, 2] += ycc[y, x, 0]
        sums[k, 3] += ycc[y, x, 1]
        sums[k, 4] += ycc[y, x, 2]
        counts[k] += 1.0
        cx = sums[k, 0] / counts[k]
        cy = sums[k, 1] / counts[k]
        c0 = sums[k, 2] / counts[k]
        c1 = sums[k, 3] / counts[k]
        c2 = sums[k, 4] / counts[k]
        for o in range(offsets.shape[0]):
            xx = x + offsets[o, 0]
            yy = y + offsets[o, 1]
            if xx < 0 or yy < 0 or xx >= w or yy >= h:
                continue
            j = yy * w + xx
            if labels[j] >= 0:
                continue
            e0 = ycc[yy, xx, 0] - c0
            e1 = ycc[yy, xx, 1] - c1
            e2 = ycc[yy, xx, 2] - c2
            dx = xx - cx
            dy = yy - cy
            dist = math.sqrt(e0 * e0 + e1 * e1 + e2 * e2 + sw2 * (dx * dx + dy * dy))
            size = _heap_push(hd, hk, hi, size, dist, k, j)
    return labels.reshape(h, w)


def _merge_small(labels: np.ndarray, ycc: np.ndarray, min_size: int) -> np.ndarray:
    """Merge segments below ``min_size`` pixels into their most similar 4-neighbor."""
    if min_size <= 1:
        return labels
    seg = Segmentation.from_label_map(_compact(labels), ycc)
    labels = seg.label_map.copy()
    parent = np.arange(seg.count)
    counts = seg.counts.copy()
    sums = seg.mean_colors * counts[:, None]

    def root(s):
        while parent[s] != s:
            s = parent[s]
        return s

    nbrs = seg.neighbor_lists
    for s in np.argsort(counts, kind="stable"):
        if counts[root(s)] >= min_size or root(s) != s:
            continue
        cands = sorted({root(t) for t in nbrs[s]} - {s})
        if not cands:
            continue
        mean_s = sums[s] / counts[s]
        dist = [np.abs(sums[t] / counts[t] - mean_s).sum() for t in cands]
        t = cands[int(np.argmin(dist))]
        parent[s] = t
        counts[t] += counts[s]
        sums[t] += sums[s]
        # s's neighbors become t's neighbors
        nbrs[t] = np.union1d(nbrs[t], nbrs[s])
    roots = np.array([root(s) for s in range(seg.count)])
    return roots[labels]


def _compact(labels: np.ndarray) -> np.ndarray:
    """Renumber ids to 0..n-1 in order of first appearance in raster order."""
    flat = labels.ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse].reshape(labels.shape).astype(np.int32)


def snic_segment(frame: Frame, requested_segments: int, compactness: float = 5.0) -> Segmentation:
    """Segment ``frame`` into roughly ``requested_segments`` 8-connected superpixels."""
    w, h = frame.width, frame.height
    if not 1 <= requested_segments <= w * h:
        raise ValueError(f"requested_segments must lie in [1, {w * h}], got {requested_segments}")
    ycc = frame.ycc()
    seeds = seed_positions(w, h, requested_segments)
    step = math.sqrt(w * h / requested_segments)
    labels = _snic(ycc, seeds, compactness / step, _OFFSETS8)
    # no merging when segments are expected to be tiny anyway
    min_size = min(MIN_SEGMENT_SIZE, (w * h) // (4 * requested_segments))
    labels = _merge_small(labels, ycc, min_size)
    return Segmentation.from_label_map(_compact(labels), ycc)


def collocated_segment(seg: SegmentInfo, other: Segmentation) -> int:
    """Segment of ``other`` covering the anchor pixel of ``seg``."""
    col = min(max(seg.anchor[0], 0), other.width - 1)
    row = min(max(seg.anchor[1], 0), other.height - 1)
    return int(other.label_map[row, col])


def collocated_segments(seg: Segmentation, other: Segmentation) -> np.ndarray:
    """Vectorized :func:`collocated_segment` over every segment of ``seg``."""
    col = np.clip(seg.anchors[:, 0], 0, other.width - 1)
    row = np.clip(seg.anchors[:, 1], 0, other.height - 1)
    return other.label_map[row, col].astype(np.int64)


def boundary_mask(label_map: np.ndarray) -> np.ndarray:
    b = np.zeros(label_map.shape, dtype=bool)
    b[:, 1:] |= label_map[:, 1:] != label_map[:, :-1]
    b[1:, :] |= label_map[1:, :] != label_map[:-1, :]
    return b
