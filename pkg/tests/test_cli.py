import csv

import pytest

from segdepth.cli import main


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    assert main(["gen-scene", "--out", str(d), "--preset", "two-plane"]) == 0
    return d


def pgm_bytes(out_dir):
    return {p.name: p.read_bytes() for p in sorted(out_dir.glob("depth_*.pgm"))}


def test_no_arguments_prints_usage(capsys):
    assert main([]) == 1
    err = capsys.readouterr().err.lower()
    assert err.count("usage:") == 1 and "estimate" in err


def test_missing_config_is_input_error(tmp_path, capsys):
    path = tmp_path / "missing.cfg"
    assert main(["estimate", "--config", str(path)]) == 2
    assert str(path) in capsys.readouterr().err


def test_unknown_override_key(scene_dir, capsys):
    assert main(["estimate", "--config", str(scene_dir / "estimate.cfg"), "--set", "bogus=1"]) == 2
    assert "bogus" in capsys.readouterr().err


def test_end_to_end_two_plane(scene_dir):
    cfg = str(scene_dir / "estimate.cfg")
    assert main(["estimate", "--config", cfg]) == 0
    assert main(["evaluate", "--config", cfg]) == 0
    with open(scene_dir / "out" / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["percentCorrect"]) >= 0.95
    assert float(rows[0]["psnr"]) > 30


def test_threads_override_and_determinism(scene_dir):
    cfg = str(scene_dir / "estimate.cfg")
    runs = []
    for name in ("a", "b"):
        assert main(["estimate", "--config", cfg, "--set", "threads=4,partition=interleaved",
                     "--set", f"out_dir=par_{name}"]) == 0
        runs.append(pgm_bytes(scene_dir / f"par_{name}"))
    assert runs[0] and runs[0] == runs[1]


def test_segment_and_synthesize(scene_dir):
    cfg = str(scene_dir / "estimate.cfg")
    seg_out = scene_dir / "segs"
    assert main(["segment", "--config", cfg, "--view", "1", "--out-dir", str(seg_out)]) == 0
    assert (seg_out / "segments_v1_f0.pgm").exists() and (seg_out / "segments_v1_f0.ppm").exists()
    out = scene_dir / "synth.yuv"
    assert main(["synthesize", "--config", cfg, "--target", "1", "--depth-dir", str(scene_dir / "gt"),
                 "--out", str(out)]) == 0
    assert out.stat().st_size == 320 * 240 * 3 // 2
