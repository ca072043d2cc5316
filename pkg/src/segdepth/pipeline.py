"""Frame-level orchestration: I/P temporal reuse, label-space parallelism, depth-map output."""
from __future__ import annotations

import csv
import logging
import math
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .config import EstimationConfig, InputError, MissingRequired
from .energy import DepthLabelSpace, EnergyParams, Labeling, MatchTables, MultiviewData, total_energy
from .graphcut import fuse_two, initial_labeling, run_alpha_expansion
from .imageio import DepthMapImage, Frame, count_yuv_frames, load_yuv_frame, write_depth_pgm
from .segmentation import Segmentation, collocated_segments, snic_segment

log = logging.getLogger(__name__)

STAGES = ("segment", "classify", "estimate", "merge", "render")


def partition_labels(levels: int, n: int, mode: str = "interleaved") -> list[np.ndarray]:
    if not 1 <= n <= levels:
        raise ValueError(f"need 1 <= n <= levels, got n={n}, levels={levels}")
    labels = np.arange(levels)
    if mode == "interleaved":
        return [labels[i::n] for i in range(n)]
    if mode == "blocks":
        size = math.ceil(levels / n)
        return [labels[i * size:(i + 1) * size] for i in range(n)]
    raise ValueError(f"unknown partition mode {mode!r}")


def merge_schedule(n: int) -> list[list[tuple[int, int]]]:
    """Pairings per merge cycle; indices refer to the previous cycle's results."""
    cycles = []
    while n > 1:
        cycles.append([(2 * j, 2 * j + 1) for j in range(n // 2)])
        n = (n + 1) // 2
    return cycles


def estimate_single(data: MultiviewData, label_subset, base: Labeling | None = None,
                    tables: MatchTables | None = None, max_cycles: int = 2,
                    stats: dict | None = None) -> Labeling:
    """Initialization plus expansion sweeps over ``label_subset`` for all views jointly.

    Frozen segments of ``base`` keep their labels and are left out of every graph.
    """
    label_subset = np.sort(np.asarray(label_subset, dtype=np.int64))
    if len(label_subset) == 0:
        raise ValueError("empty label subset")
    if base is not None and base.active_count == 0:
        if stats is not None:
            stats.update(moves=0, nodes=0)
        return base.copy()
    tables = tables or MatchTables(data)
    start = initial_labeling(data, tables, label_subset, base)
    history: list[float] = []
    result = run_alpha_expansion(start, data, tables, label_subset, max_cycles, history)
    if stats is not None:
        stats.update(moves=len(history) - 1, nodes=start.active_count,
                     energy_initial=history[0], energy_final=history[-1])
    return result


# worker processes inherit this through fork; nothing is pickled but labels
_SHARED: dict = {}


def _worker_estimate(subset):
    d = _SHARED
    return estimate_single(d["data"], subset, d["base"], max_cycles=d["max_cycles"])


def _worker_fuse(a: Labeling, b: Labeling) -> Labeling:
    data = _SHARED["data"]
    return fuse_two(a, b, data, MatchTables(data)).labeling


@dataclass
class ParallelResult:
    labeling: Labeling
    worker_results: list[Labeling]
    merge_cycles: int
    estimate_ms: float
    merge_ms: float
    truncations: int = 0


def estimate_parallel(data: MultiviewData, cfg: EstimationConfig, base: Labeling | None = None,
                      processes: bool | None = None) -> ParallelResult:
    """Split the label space over ``cfg.threads`` workers and merge pairwise.

    With ``processes`` (default: when more than one worker) the workers run
    in forked processes; the result does not depend on scheduling.
    """
    n = cfg.threads
    subsets = partition_labels(data.label_space.levels, n, cfg.partition)
    if processes is None:
        processes = n > 1
    t0 = time.perf_counter()
    if n == 1:
        out = estimate_single(data, subsets[0], base, max_cycles=cfg.max_cycles)
        return ParallelResult(out, [out], 0, 1000 * (time.perf_counter() - t0), 0.0)

    trunc = 0
    if processes:
        _SHARED.update(data=data, base=base, max_cycles=cfg.max_cycles)
        try:
            with ProcessPoolExecutor(max_workers=n, mp_context=mp.get_context("fork")) as pool:
                results = list(pool.map(_worker_estimate, subsets))
                t1 = time.perf_counter()
                current = results
                cycles = merge_schedule(n)
                for pairs in cycles:
                    fused = list(pool.map(_worker_fuse, [current[a] for a, _ in pairs],
                                          [current[b] for _, b in pairs]))
                    current = fused + current[2 * len(pairs):]
        finally:
            _SHARED.clear()
    else:
        tables = MatchTables(data)
        results = [estimate_single(data, s, base, tables, cfg.max_cycles) for s in subsets]
        t1 = time.perf_counter()
        current = results
        cycles = merge_schedule(n)
        for pairs in cycles:
            fused = []
            for a, b in pairs:
                res = fuse_two(current[a], current[b], data, tables)
                trunc += res.truncated
                fused.append(res.labeling)
            current = fused + current[2 * len(pairs):]
    t2 = time.perf_counter()
    return ParallelResult(current[0], results, len(cycles), 1000 * (t1 - t0), 1000 * (t2 - t1), trunc)


def temporal_classify(current: Segmentation, prev_p: tuple[Segmentation, np.ndarray],
                      i_ref: tuple[Segmentation, np.ndarray], t_p: float, t_l: float):
    """Frozen mask and adopted labels for one view of a P frame.

    A segment whose mean color is within ``t_l`` (every component) of its
    collocated segment in the I frame adopts that depth; failing that, within
    ``t_p`` of the collocated segment in the previous frame adopts that one.
    """
    frozen = np.zeros(current.count, dtype=bool)
    labels = np.zeros(current.count, dtype=np.int64)
    for ref_seg, ref_labels, thr in ((i_ref[0], i_ref[1], t_l), (prev_p[0], prev_p[1], t_p)):
        col = collocated_segments(current, ref_seg)
        diff = np.abs(current.mean_colors - ref_seg.mean_colors[col])
        hit = ~frozen & np.all(diff < thr, axis=1)
        labels[hit] = ref_labels[col[hit]]
        frozen |= hit
    return frozen, labels


def render_depth_map(labels, seg: Segmentation, label_space: DepthLabelSpace) -> DepthMapImage:
    depth = label_space.depth_of(np.asarray(labels)[seg.label_map])
    return DepthMapImage.from_depth(depth, label_space.z_near, label_space.z_far)


def frame_kinds(count: int, p_frames: int) -> list[str]:
    return ["I" if f % (p_frames + 1) == 0 else "P" for f in range(count)]


@dataclass
class FrameResult:
    index: int
    kind: str
    segmentations: tuple[Segmentation, ...]
    labeling: Labeling
    depth_maps: list[DepthMapImage]
    timings_ms: dict[str, float] = field(default_factory=dict)
    active_segments: int = 0
    total_segments: int = 0


def label_space_for(cfg: EstimationConfig) -> DepthLabelSpace:
    return DepthLabelSpace(cfg.depth_levels, cfg.z_near, cfg.z_far)


def estimate_frames(frame_source, rig: geo.Rig, cfg: EstimationConfig, count: int,
                    segmentations=None):
    """Yield a :class:`FrameResult` per frame.

    ``frame_source(f)`` returns the tuple of view frames for frame ``f``;
    ``segmentations`` optionally supplies precomputed per-frame segmentations.
    """
    ls = label_space_for(cfg)
    params = EnergyParams(cfg.beta0, cfg.K, cfg.window)
    i_state = prev_state = None
    for f, kind in enumerate(frame_kinds(count, cfg.p_frames)):
        t = {s: 0.0 for s in STAGES}
        t0 = time.perf_counter()
        frames = tuple(frame_source(f))
        if segmentations is not None:
            segs = tuple(segmentations[f])
        else:
            n_seg = cfg.segments_for(frames[0].width, frames[0].height)
            segs = tuple(snic_segment(fr, n_seg, cfg.compactness) for fr in frames)
        t1 = time.perf_counter()
        t["segment"] = 1000 * (t1 - t0)
        data = MultiviewData(frames, segs, rig, ls, params)

        base = None
        if kind == "P":
            frozen, adopted = [], []
            for v, seg in enumerate(segs):
                fz, lab = temporal_classify(seg, (prev_state[0][v], prev_state[1].labels[v]),
                                            (i_state[0][v], i_state[1].labels[v]), cfg.t_p, cfg.t_l)
                frozen.append(fz)
                adopted.append(lab)
            base = Labeling(adopted, frozen)
        t2 = time.perf_counter()
        t["classify"] = 1000 * (t2 - t1)

        res = estimate_parallel(data, cfg, base)
        t["estimate"], t["merge"] = res.estimate_ms, res.merge_ms
        labeling = res.labeling
        t3 = time.perf_counter()
        maps = [render_depth_map(labeling.labels[v], segs[v], ls) for v in range(len(segs))]
        t["render"] = 1000 * (time.perf_counter() - t3)

        active = labeling.active_count
        yield FrameResult(f, kind, segs, labeling, maps, t, active, sum(s.count for s in segs))
        state = (segs, Labeling(labeling.labels))
        if kind == "I":
            i_state = state
        prev_state = state


def load_rig(cfg: EstimationConfig) -> geo.Rig:
    try:
        cams = geo.load_cameras(cfg.resolve(cfg.cameras))
    except OSError as exc:
        raise InputError(f"cannot read camera file {cfg.resolve(cfg.cameras)}: {exc.strerror}") from None
    if len(cams) != len(cfg.views):
        raise InputError(f"{len(cfg.views)} views but {len(cams)} cameras")
    cams = [c.with_size(cfg.width, cfg.height) for c in cams]
    return geo.Rig(tuple(cams), cfg.center)


def require_size(cfg: EstimationConfig) -> None:
    if cfg.width is None or cfg.height is None:
        raise MissingRequired("width and height are required to read raw YUV input")


def available_frames(cfg: EstimationConfig) -> int:
    require_size(cfg)
    paths = [cfg.resolve(v) for v in cfg.views]
    for p in paths:
        if not p.exists():
            raise InputError(f"cannot read view file {p}")
    have = min(count_yuv_frames(p, cfg.width, cfg.height) for p in paths)
    return have if cfg.frames is None else cfg.frames


def view_reader(cfg: EstimationConfig):
    paths = [cfg.resolve(v) for v in cfg.views]
    return lambda f: tuple(load_yuv_frame(p, cfg.width, cfg.height, f) for p in paths)


def depth_path(out_dir: Path, view: int, frame: int) -> Path:
    return out_dir / f"depth_v{view}_f{frame}.pgm"


def run_sequence(cfg: EstimationConfig) -> list[FrameResult]:
    """Estimate every frame of the configured sequence and write depth maps plus ``timing.csv``."""
    require_size(cfg)
    rig = load_rig(cfg)
    count = available_frames(cfg)
    out_dir = cfg.resolve(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    with open(out_dir / "timing.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "kind", "stage", "ms"])
        for res in estimate_frames(view_reader(cfg), rig, cfg, count):
            for v, dmap in enumerate(res.depth_maps):
                write_depth_pgm(dmap, depth_path(out_dir, v, res.index))
            for stage in STAGES:
                writer.writerow([res.index, res.kind, stage, f"{res.timings_ms[stage]:.3f}"])
            fh.flush()
            log.info("frame %d (%s): %d/%d active segments, %s", res.index, res.kind,
                     res.active_segments, res.total_segments,
                     " ".join(f"{s}={res.timings_ms[s]:.0f}ms" for s in STAGES))
            # segmentations are needed later only as references
            results.append(FrameResult(res.index, res.kind, (), res.labeling, [], res.timings_ms,
                                       res.active_segments, res.total_segments))
    return results


def frame_energy(res: FrameResult, frames, rig, cfg: EstimationConfig) -> float:
    data = MultiviewData(frames, res.segmentations, rig, label_space_for(cfg),
                         EnergyParams(cfg.beta0, cfg.K, cfg.window))
    return total_energy(res.labeling, data)
