"""Energy, accuracy and wall-clock of label-space parallelism for several worker counts."""
import argparse
import os

from segdepth import evaluation as ev
from segdepth import pipeline as pl
from segdepth.energy import EnergyParams, MultiviewData, total_energy
from segdepth.segmentation import snic_segment
from synthetic_experiment import config_for


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("--segments", type=int, default=2000)
    args = ap.parse_args()
    spec = ev.two_plane_spec()
    scene = ev.generate_scene(spec)
    segs = tuple(snic_segment(f, args.segments) for f in scene.frames[0])
    data = MultiviewData(scene.frames[0], segs, scene.rig, scene.label_space, EnergyParams())
    print(f"# {os.cpu_count()} CPUs")
    print("threads,partition,energy,worker0_energy,pct_correct,estimate_ms,merge_ms")
    for n in args.threads:
        for mode in ("interleaved", "blocks") if n > 1 else ("interleaved",):
            cfg = config_for(spec, segments=args.segments, threads=n, partition=mode)
            res = pl.estimate_parallel(data, cfg)
            maps = [pl.render_depth_map(res.labeling.labels[v], segs[v], scene.label_space) for v in range(3)]
            _, _, pc = ev.frame_quality(scene.frames[0], maps, scene.depths[0], scene.rig, segs, scene.label_space)
            print(f"{n},{mode},{total_energy(res.labeling, data):.1f},"
                  f"{total_energy(res.worker_results[0], data):.1f},{pc:.4f},{res.estimate_ms:.0f},{res.merge_ms:.0f}")


if __name__ == "__main__":
    main()
