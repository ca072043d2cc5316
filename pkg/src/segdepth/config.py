"""Estimation configuration and its flat ``key = value`` file format."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class InputError(Exception):
    """Bad user input: unreadable files, malformed formats, invalid config."""


class ConfigError(InputError):
    pass


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


PARTITIONS = ("interleaved", "blocks")


@dataclass(frozen=True)
class EstimationConfig:
    views: tuple[str, ...] = ()
    cameras: str = ""
    z_near: float = 0.0
    z_far: float = 0.0
    width: int | None = None
    height: int | None = None
    frames: int | None = None
    depth_levels: int = 250
    segments: int | None = None      # None: chosen from the resolution
    window: int = 3
    beta0: float = 4.0
    K: float = 30.0
    p_frames: int = 0
    threads: int = 1
    partition: str = "interleaved"
    t_p: float = 3.0
    t_l: float = 1.0
    compactness: float = 5.0
    max_cycles: int = 2
    center: int | None = None
    out_dir: str = "out"
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        validate(self)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def segments_for(self, width: int, height: int) -> int:
        if self.segments is not None:
            return self.segments
        # roughly 20 samples per segment
        return max(1, round(width * height / 20))

    def with_overrides(self, overrides: dict[str, str]) -> "EstimationConfig":
        return replace(self, **{k: v for k, v in _convert(overrides).items()})


REQUIRED = ("views", "cameras", "z_near", "z_far")
_INT_KEYS = {"width", "height", "frames", "depth_levels", "segments", "window",
             "p_frames", "threads", "max_cycles", "center"}
_FLOAT_KEYS = {"z_near", "z_far", "beta0", "K", "t_p", "t_l", "compactness"}
KEYS = {f.name for f in fields(EstimationConfig)} - {"base_dir"}


def validate(cfg: EstimationConfig) -> None:
    def bad(msg):
        raise InvalidValue(msg)

    if cfg.depth_levels < 2:
        bad(f"depth_levels must be >= 2, got {cfg.depth_levels}")
    if cfg.window < 1 or cfg.window % 2 == 0:
        bad(f"window must be a positive odd integer, got {cfg.window}")
    if cfg.threads < 1:
        bad(f"threads must be >= 1, got {cfg.threads}")
    if cfg.threads > cfg.depth_levels:
        bad(f"threads ({cfg.threads}) cannot exceed depth_levels ({cfg.depth_levels})")
    if cfg.p_frames < 0:
        bad("p_frames must be >= 0")
    if cfg.partition not in PARTITIONS:
        bad(f"partition must be one of {PARTITIONS}, got {cfg.partition!r}")
    if cfg.t_l > cfg.t_p or cfg.t_l < 0:
        bad(f"need 0 <= t_l <= t_p, got t_l={cfg.t_l} t_p={cfg.t_p}")
    if cfg.beta0 <= 0 or cfg.K <= 0:
        bad("beta0 and K must be positive")
    if cfg.segments is not None and cfg.segments < 1:
        bad("segments must be >= 1")
    if cfg.max_cycles < 1:
        bad("max_cycles must be >= 1")
    if cfg.z_near or cfg.z_far:
        if not 0 < cfg.z_near < cfg.z_far:
            bad(f"need 0 < z_near < z_far, got {cfg.z_near}, {cfg.z_far}")
    for name in ("width", "height"):
        v = getattr(cfg, name)
        if v is not None and (v < 16 or v % 2):
            bad(f"{name} must be even and >= 16, got {v}")


def _convert(raw: dict[str, str]) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in KEYS:
            raise UnknownKey(f"unknown configuration key {key!r}")
        value = value.strip()
        try:
            if key == "views":
                out[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key in _INT_KEYS:
                out[key] = None if value.lower() in ("", "auto") else int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError:
            raise InvalidValue(f"bad value for {key!r}: {value!r}") from None
    return out


def parse_config(text: str, base_dir=".") -> EstimationConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value
    values = _convert(raw)
    missing = [k for k in REQUIRED if k not in values or values[k] in ((), "")]
    if missing:
        raise MissingRequired(f"missing required configuration keys: {', '.join(missing)}")
    return EstimationConfig(**values, base_dir=str(base_dir))


def parse_overrides(items) -> dict[str, str]:
    """Parse ``--set`` items such as ``threads=4,partition=blocks``.

    A comma-separated piece without ``=`` continues the previous value, so
    ``views=a.yuv,b.yuv`` stays one entry.
    """
    out: dict[str, str] = {}
    for item in items:
        last = None
        for piece in item.split(","):
            if "=" in piece:
                key, value = piece.split("=", 1)
                last = key.strip()
                out[last] = value
            elif last is not None:
                out[last] += "," + piece
            else:
                raise ConfigError(f"override {item!r} is not key=value")
    unknown = [k for k in out if k not in KEYS]
    if unknown:
        raise UnknownKey(f"unknown configuration key {unknown[0]!r}")
    return out


def format_config(cfg: EstimationConfig) -> str:
    lines = []
    for f in fields(EstimationConfig):
        if f.name == "base_dir":
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name == "views":
            value = ",".join(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
