"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 input/config error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import geometry as geo
from .config import EstimationConfig, InputError, format_config, parse_overrides
from .imageio import (DepthMapImage, load_config, read_depth_pgm, write_depth_pgm, write_label_pgm,
                      write_ppm, write_yuv, ycc_to_rgb)
from .pipeline import (available_frames, depth_path, label_space_for, load_rig, run_sequence,
                       view_reader)
from .segmentation import boundary_mask, snic_segment

log = logging.getLogger("segdepth")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> EstimationConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(parse_overrides(args.set or []))


def cmd_estimate(args) -> int:
    cfg = _config(args)
    results = run_sequence(cfg)
    out = cfg.resolve(cfg.out_dir)
    print(f"wrote {len(results)} frame(s) x {len(cfg.views)} view(s) to {out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    cfg = _config(args)
    count = available_frames(cfg)
    if not 0 <= args.frame < count:
        raise InputError(f"frame {args.frame} not available ({count} frames)")
    frames = view_reader(cfg)(args.frame)
    out = Path(args.out_dir) if args.out_dir else cfg.resolve(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    views = range(len(frames)) if args.view is None else [args.view]
    for v in views:
        fr = frames[v]
        seg = snic_segment(fr, cfg.segments_for(fr.width, fr.height), cfg.compactness)
        write_label_pgm(seg.label_map, out / f"segments_v{v}_f{args.frame}.pgm")
        rgb = ycc_to_rgb(fr.ycc())
        rgb[boundary_mask(seg.label_map)] = (255, 0, 0)
        write_ppm(rgb, out / f"segments_v{v}_f{args.frame}.ppm")
        print(f"view {v}: {seg.count} segments")
    return EXIT_OK


def cmd_gen_scene(args) -> int:
    make = ev.PRESETS[args.preset]
    spec = make(frames=args.frames)
    scene = ev.generate_scene(spec)
    out = Path(args.out)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    views = []
    for v in range(spec.views):
        name = f"view_{v}.yuv"
        write_yuv([scene.frames[f][v] for f in range(spec.frames)], out / name)
        views.append(name)
        for f in range(spec.frames):
            write_depth_pgm(scene.depth_map(f, v), out / "gt" / f"depth_v{v}_f{f}.pgm")
    geo.save_cameras(scene.rig.cameras, out / "cameras.txt")
    cfg = EstimationConfig(views=tuple(views), cameras="cameras.txt", z_near=spec.z_near,
                           z_far=spec.z_far, width=spec.width, height=spec.height,
                           frames=spec.frames, depth_levels=spec.levels, segments=args.segments,
                           p_frames=args.p_frames, out_dir="out")
    (out / "estimate.cfg").write_text(format_config(cfg))
    (out / "scene.json").write_text(json.dumps({"preset": args.preset, "frames": spec.frames}) + "\n")
    print(f"wrote {args.preset} scene to {out}")
    return EXIT_OK


def _read_maps(directory: Path, views: int, frame: int) -> list[DepthMapImage]:
    return [read_depth_pgm(depth_path(directory, v, frame)) for v in range(views)]


def cmd_synthesize(args) -> int:
    cfg = _config(args)
    rig = load_rig(cfg)
    t = args.target
    if not 0 < t < len(rig) - 1:
        raise InputError(f"target view {t} needs a neighbor on each side")
    frames = view_reader(cfg)(args.frame)
    depth_dir = Path(args.depth_dir) if args.depth_dir else cfg.resolve(cfg.out_dir)
    maps = _read_maps(depth_dir, len(rig), args.frame)
    out = ev.synthesize_view(rig[t], (frames[t - 1], maps[t - 1], rig[t - 1]),
                             (frames[t + 1], maps[t + 1], rig[t + 1]), rig)
    write_yuv([out], args.out)
    print(f"psnr vs acquired view {t}: {ev.psnr_luma(out, frames[t]):.2f} dB")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    rig = load_rig(cfg)
    count = available_frames(cfg)
    gt_dir = Path(args.gt) if args.gt else cfg.resolve("gt")
    est_dir = cfg.resolve(cfg.out_dir)
    report_path = Path(args.report) if args.report else est_dir / "report.csv"
    read = view_reader(cfg)
    ls = label_space_for(cfg)
    rows = []
    for f in range(count):
        frames = read(f)
        maps = _read_maps(est_dir, len(rig), f)
        truth = [m.depth() for m in _read_maps(gt_dir, len(rig), f)]
        segs = [snic_segment(fr, cfg.segments_for(fr.width, fr.height), cfg.compactness) for fr in frames]
        rows.append((f, *ev.frame_quality(frames, maps, truth, rig, segs, ls)))
    with open(report_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "psnr", "medianLabelErr", "percentCorrect"])
        for f, p, med, pc in rows:
            w.writerow([f, "inf" if p == ev.INFINITE else f"{p:.4f}", f"{med:.4f}", f"{pc:.6f}"])
    psnr = [r[1] for r in rows]
    print(f"mean psnr {np.mean(psnr):.2f} dB, mean percentCorrect {np.mean([r[3] for r in rows]):.4f}"
          f" -> {report_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="segdepth", description="Segment-based multiview depth estimation.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override config keys; repeatable, comma-separated pairs allowed")
        return sp

    with_config(sub.add_parser("estimate", help="estimate depth maps for a sequence")).set_defaults(func=cmd_estimate)

    sp = with_config(sub.add_parser("segment", help="write superpixel label maps and overlays"))
    sp.add_argument("--frame", type=int, default=0)
    sp.add_argument("--view", type=int)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("gen-scene", help="render a synthetic multiview scene with ground truth")
    sp.add_argument("--out", required=True)
    sp.add_argument("--preset", choices=sorted(ev.PRESETS), default="two-plane")
    sp.add_argument("--frames", type=int, default=1)
    sp.add_argument("--segments", type=int, default=2000)
    sp.add_argument("--p-frames", type=int, default=0)
    sp.set_defaults(func=cmd_gen_scene)

    sp = with_config(sub.add_parser("synthesize", help="render a view from its two neighbors"))
    sp.add_argument("--target", type=int, required=True)
    sp.add_argument("--frame", type=int, default=0)
    sp.add_argument("--depth-dir")
    sp.add_argument("--out", required=True, help="output YUV 4:2:0 file")
    sp.set_defaults(func=cmd_synthesize)

    sp = with_config(sub.add_parser("evaluate", help="score estimated depth against ground truth"))
    sp.add_argument("--gt", help="ground-truth depth directory (default: <config dir>/gt)")
    sp.add_argument("--report", help="report path (default: <out_dir>/report.csv)")
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as exc:
        if argv:
            print(exc, file=sys.stderr)
        else:
            parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, geo.GeometryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
