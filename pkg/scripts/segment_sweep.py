"""Accuracy and estimate time against segment count on the two-plane scene."""
import argparse

from segdepth import evaluation as ev
from segdepth import pipeline as pl
from segdepth.segmentation import snic_segment
from synthetic_experiment import config_for


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--counts", type=int, nargs="+", default=[200, 500, 800, 1200, 2000, 3000])
    args = ap.parse_args()
    spec = ev.two_plane_spec()
    scene = ev.generate_scene(spec)
    print("segments,pct_correct,median_err,estimate_ms")
    for n in args.counts:
        segs = tuple(snic_segment(f, n) for f in scene.frames[0])
        res = next(pl.estimate_frames(lambda f: scene.frames[f], scene.rig, config_for(spec, segments=n), 1, [segs]))
        _, med, pc = ev.frame_quality(scene.frames[0], res.depth_maps, scene.depths[0], scene.rig,
                                      segs, scene.label_space)
        print(f"{n},{pc:.4f},{med:g},{res.timings_ms['estimate']:.0f}")


if __name__ == "__main__":
    main()
