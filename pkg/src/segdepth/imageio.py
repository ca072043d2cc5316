"""Raw YUV 4:2:0 frames, 16-bit PGM depth maps and debug images."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EstimationConfig, InputError, parse_config

MIN_SIZE = 16


class TruncatedFile(InputError):
    pass


class BadDimensions(InputError):
    pass


class MalformedHeader(InputError):
    pass


class UnexpectedMaxval(InputError):
    pass


@dataclass(frozen=True, eq=False)
class Frame:
    """One full-resolution YCbCr frame (8-bit planes, shape ``(height, width)``)."""
    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray

    def __post_init__(self):
        shape = self.y.shape
        if self.cb.shape != shape or self.cr.shape != shape or len(shape) != 2:
            raise BadDimensions("Y, Cb and Cr planes must share one 2-D shape")
        if shape[0] < MIN_SIZE or shape[1] < MIN_SIZE:
            raise BadDimensions(f"frames must be at least {MIN_SIZE}x{MIN_SIZE}, got {shape[1]}x{shape[0]}")
        for name in ("y", "cb", "cr"):
            plane = np.ascontiguousarray(getattr(self, name), dtype=np.uint8)
            plane.setflags(write=False)
            object.__setattr__(self, name, plane)

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]

    def ycc(self) -> np.ndarray:
        """``(height, width, 3)`` float64 stack of Y, Cb, Cr."""
        return np.stack([self.y, self.cb, self.cr], axis=-1).astype(np.float64)

    @classmethod
    def from_ycc(cls, ycc) -> "Frame":
        arr = np.clip(np.rint(np.asarray(ycc, dtype=np.float64)), 0, 255).astype(np.uint8)
        return cls(arr[..., 0], arr[..., 1], arr[..., 2])

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return all(np.array_equal(getattr(self, p), getattr(other, p)) for p in ("y", "cb", "cr"))


def _check_dims(width: int, height: int) -> None:
    if width < MIN_SIZE or height < MIN_SIZE or width % 2 or height % 2:
        raise BadDimensions(f"4:2:0 frames need even dimensions >= {MIN_SIZE}, got {width}x{height}")


def yuv_frame_size(width: int, height: int) -> int:
    return width * height * 3 // 2


def count_yuv_frames(path, width: int, height: int) -> int:
    _check_dims(width, height)
    return Path(path).stat().st_size // yuv_frame_size(width, height)


def load_yuv_frame(path, width: int, height: int, frame_index: int) -> Frame:
    _check_dims(width, height)
    size = yuv_frame_size(width, height)
    with open(path, "rb") as fh:
        fh.seek(frame_index * size)
        data = fh.read(size)
    if frame_index < 0 or len(data) < size:
        raise TruncatedFile(f"{path}: frame {frame_index} is beyond the end of the file")
    buf = np.frombuffer(data, dtype=np.uint8)
    n = width * height
    y = buf[:n].reshape(height, width)
    cw, ch = width // 2, height // 2
    cb = buf[n:n + cw * ch].reshape(ch, cw)
    cr = buf[n + cw * ch:].reshape(ch, cw)
    up = lambda p: np.repeat(np.repeat(p, 2, axis=0), 2, axis=1)
    return Frame(y, up(cb), up(cr))


def encode_yuv_frame(frame: Frame) -> bytes:
    """Planar 4:2:0 bytes; chroma keeps the top-left sample of each 2x2 block."""
    _check_dims(frame.width, frame.height)
    return frame.y.tobytes() + frame.cb[::2, ::2].tobytes() + frame.cr[::2, ::2].tobytes()


def write_yuv(frames, path) -> None:
    with open(path, "wb") as fh:
        for frame in frames:
            fh.write(encode_yuv_frame(frame))


# -- depth maps ------------------------------------------------------------

MAXVAL = 65535


@dataclass(frozen=True, eq=False)
class DepthMapImage:
    values: np.ndarray
    z_near: float
    z_far: float

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.uint16)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_depth(cls, depth, z_near: float, z_far: float) -> "DepthMapImage":
        return cls(encode_depth(depth, z_near, z_far), z_near, z_far)

    def depth(self) -> np.ndarray:
        return decode_depth(self.values, self.z_near, self.z_far)

    def __eq__(self, other):
        if not isinstance(other, DepthMapImage):
            return NotImplemented
        return (self.z_near == other.z_near and self.z_far == other.z_far
                and np.array_equal(self.values, other.values))


def encode_depth(depth, z_near: float, z_far: float) -> np.ndarray:
    inv = (1.0 / np.asarray(depth, dtype=np.float64) - 1.0 / z_far) / (1.0 / z_near - 1.0 / z_far)
    return np.clip(np.rint(MAXVAL * inv), 0, MAXVAL).astype(np.uint16)


def decode_depth(values, z_near: float, z_far: float) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64) / MAXVAL
    return 1.0 / (v * (1.0 / z_near - 1.0 / z_far) + 1.0 / z_far)


def _pnm_bytes(magic: bytes, values: np.ndarray, maxval: int, comment: str | None) -> bytes:
    h, w = values.shape[:2]
    head = magic + b"\n"
    if comment:
        head += f"# {comment}\n".encode()
    head += f"{w} {h}\n{maxval}\n".encode()
    dtype = ">u2" if maxval > 255 else "u1"
    return head + np.ascontiguousarray(values, dtype=dtype).tobytes()


def write_depth_pgm(depth_map: DepthMapImage, path) -> None:
    comment = f"znear={depth_map.z_near!r} zfar={depth_map.z_far!r}"
    Path(path).write_bytes(_pnm_bytes(b"P5", depth_map.values, MAXVAL, comment))


def _read_header(data: bytes):
    """Parse a binary PNM header; returns (magic, width, height, maxval, comments, offset)."""
    pos, tokens, comments = 0, [], []
    while len(tokens) < 4:
        if pos >= len(data):
            raise MalformedHeader("header ends prematurely")
        ch = data[pos:pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise MalformedHeader("unterminated comment")
            comments.append(data[pos + 1:end].decode("ascii", "replace").strip())
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            m = re.match(rb"\S+", data[pos:pos + 32])
            tokens.append(m.group())
            pos += len(m.group())
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MalformedHeader("missing whitespace after maxval")
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedHeader(f"non-numeric header fields {tokens[1:]!r}") from None
    if width <= 0 or height <= 0 or not 0 < maxval <= 65535:
        raise MalformedHeader(f"bad header values {width}x{height} maxval {maxval}")
    return magic, width, height, maxval, comments, pos + 1


def read_pnm(path):
    data = Path(path).read_bytes()
    magic, width, height, maxval, comments, offset = _read_header(data)
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise MalformedHeader(f"{path}: unsupported magic {magic!r}")
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height * channels
    nbytes = count * np.dtype(dtype).itemsize
    if len(data) - offset < nbytes:
        raise TruncatedFile(f"{path}: expected {nbytes} sample bytes, found {len(data) - offset}")
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return arr.reshape(shape), maxval, comments


def read_depth_pgm(path) -> DepthMapImage:
    values, maxval, comments = read_pnm(path)
    if values.ndim != 2:
        raise MalformedHeader(f"{path}: depth maps must be single-channel P5")
    if maxval != MAXVAL:
        raise UnexpectedMaxval(f"{path}: depth maps need maxval {MAXVAL}, found {maxval}")
    z_near = z_far = None
    for c in comments:
        m = re.search(r"znear=(\S+)\s+zfar=(\S+)", c)
        if m:
            z_near, z_far = float(m.group(1)), float(m.group(2))
    if z_near is None:
        raise MalformedHeader(f"{path}: missing '# znear=<v> zfar=<v>' comment")
    return DepthMapImage(values.astype(np.uint16), z_near, z_far)


def write_label_pgm(label_map, path) -> None:
    labels = np.asarray(label_map)
    if labels.max(initial=0) > MAXVAL:
        raise ValueError("too many segments for a 16-bit label image")
    Path(path).write_bytes(_pnm_bytes(b"P5", labels.astype(np.uint16), MAXVAL, None))


def write_ppm(rgb, path) -> None:
    Path(path).write_bytes(_pnm_bytes(b"P6", np.asarray(rgb, dtype=np.uint8), 255, None))


def ycc_to_rgb(ycc) -> np.ndarray:
    """Full-range BT.601 conversion for debug images."""
    y, cb, cr = (np.asarray(ycc, dtype=np.float64)[..., i] for i in range(3))
    r = y + 1.402 * (cr - 128)
    g = y - 0.344136 * (cb - 128) - 0.714136 * (cr - 128)
    b = y + 1.772 * (cb - 128)
    return np.clip(np.rint(np.stack([r, g, b], axis=-1)), 0, 255).astype(np.uint8)


def load_config(path) -> EstimationConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)
