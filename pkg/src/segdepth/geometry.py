"""Pinhole multi-camera geometry.

Extrinsics are world-to-camera: ``x_cam = R @ X + t``. Depth is always the
z-coordinate in the *center* camera's frame, so depth labels are shared by
every view of the rig.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ORTHO_TOL = 1e-9
EDGE_TOL = 1e-9
ROUND_TOL = 1e-9
PARALLEL_EPS = 1e-12
BEHIND_EPS = 1e-12


class GeometryError(ValueError):
    pass


class RayParallelToPlane(GeometryError):
    pass


class BehindCamera(GeometryError):
    pass


class CameraFileError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class CameraParams:
    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    name: str = ""
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64).reshape(3, 3)
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if abs(K[1, 0]) > 0 or abs(K[2, 0]) > 0 or abs(K[2, 1]) > 0:
            raise GeometryError("intrinsics must be upper triangular")
        if not (K[0, 0] > 0 and K[1, 1] > 0):
            raise GeometryError("focal lengths must be positive")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise GeometryError(f"rotation of camera {self.name!r} is not a proper rotation")
        for name, value in (("intrinsics", K), ("rotation", R), ("translation", t)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def center(self) -> np.ndarray:
        """Optical center in world coordinates."""
        return -self.rotation.T @ self.translation

    def with_size(self, width: int, height: int) -> "CameraParams":
        return CameraParams(self.intrinsics, self.rotation, self.translation,
                            self.name, width, height)

    def contains(self, uv: np.ndarray) -> np.ndarray:
        uv = np.asarray(uv, dtype=np.float64)
        if self.width is None or self.height is None:
            raise GeometryError(f"camera {self.name!r} has no image size")
        # round-off can push an exact border pixel to -1e-15
        return ((uv[..., 0] >= -EDGE_TOL) & (uv[..., 0] < self.width)
                & (uv[..., 1] >= -EDGE_TOL) & (uv[..., 1] < self.height))


@dataclass(frozen=True)
class Rig:
    cameras: tuple[CameraParams, ...]
    center_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if len(self.cameras) < 2:
            raise GeometryError("a rig needs at least two cameras")
        if self.center_index is None:
            object.__setattr__(self, "center_index", len(self.cameras) // 2)
        if not 0 <= self.center_index < len(self.cameras):
            raise GeometryError(f"center index {self.center_index} out of range")

    @property
    def center(self) -> CameraParams:
        return self.cameras[self.center_index]

    def __len__(self):
        return len(self.cameras)

    def __getitem__(self, i) -> CameraParams:
        return self.cameras[i]


@dataclass(frozen=True)
class NeighborTopology:
    """Nearest-left / nearest-right neighbors in rig order."""
    neighbors: tuple[tuple[int, ...], ...] = field(default_factory=tuple)

    @classmethod
    def from_rig(cls, rig: Rig | int) -> "NeighborTopology":
        n = rig if isinstance(rig, int) else len(rig)
        return cls(tuple(tuple(j for j in (i - 1, i + 1) if 0 <= j < n) for i in range(n)))

    def __getitem__(self, view: int) -> tuple[int, ...]:
        return self.neighbors[view]

    def __len__(self):
        return len(self.neighbors)


def center_plane_depth(point, rig: Rig):
    """Depth of world point(s) measured from the center camera's plane."""
    c = rig.center
    P = np.asarray(point, dtype=np.float64)
    return P @ c.rotation[2] + c.translation[2]


def unproject_many(pixels, view: CameraParams, depth, rig: Rig):
    """Vectorized unprojection onto center-plane depth.

    Returns ``(points, valid)``; invalid rows (parallel ray or a solution
    behind ``view``) hold NaN.
    """
    uv = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depth = np.broadcast_to(np.asarray(depth, dtype=np.float64), (uv.shape[0],))
    homog = np.column_stack([uv, np.ones(len(uv))])
    rays_cam = np.linalg.solve(view.intrinsics, homog.T).T
    rays = rays_cam @ view.rotation          # rows of R^T @ ray
    origin = view.center
    axis = rig.center.rotation[2]
    denom = rays @ axis
    numer = depth - origin @ axis - rig.center.translation[2]
    ok = np.abs(denom) >= PARALLEL_EPS
    lam = np.where(ok, numer / np.where(ok, denom, 1.0), np.nan)
    ok &= lam > 0
    pts = origin + lam[:, None] * rays
    pts[~ok] = np.nan
    return pts, ok


def unproject_at_depth(pixel, view: CameraParams, depth: float, rig: Rig) -> np.ndarray:
    uv = np.asarray(pixel, dtype=np.float64).reshape(2)
    homog = np.array([uv[0], uv[1], 1.0])
    ray = view.rotation.T @ np.linalg.solve(view.intrinsics, homog)
    axis = rig.center.rotation[2]
    denom = float(ray @ axis)
    if abs(denom) < PARALLEL_EPS:
        raise RayParallelToPlane(f"ray through {uv} never reaches depth {depth}")
    origin = view.center
    lam = (depth - origin @ axis - rig.center.translation[2]) / denom
    if lam <= 0:
        raise BehindCamera(f"depth {depth} lies behind camera {view.name!r} along {uv}")
    return origin + lam * ray


def project_many(points, view: CameraParams):
    """Vectorized projection; returns ``(uv, valid)`` with NaN where behind."""
    P = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = P @ view.rotation.T + view.translation
    z = cam[:, 2]
    ok = z > BEHIND_EPS
    img = cam @ view.intrinsics.T
    with np.errstate(invalid="ignore", divide="ignore"):
        uv = img[:, :2] / z[:, None]
    uv[~ok] = np.nan
    return uv, ok


def project(point, view: CameraParams) -> np.ndarray:
    P = np.asarray(point, dtype=np.float64).reshape(3)
    cam = view.rotation @ P + view.translation
    if cam[2] <= BEHIND_EPS:
        raise BehindCamera(f"point {P} is behind camera {view.name!r}")
    img = view.intrinsics @ cam
    return img[:2] / cam[2]


def correspond(pixel, from_view: CameraParams, to_view: CameraParams, depth: float, rig: Rig):
    """Pixel in ``to_view`` seeing the same point at ``depth``, or None if out of view."""
    try:
        uv = project(unproject_at_depth(pixel, from_view, depth, rig), to_view)
    except GeometryError:
        return None
    if not to_view.contains(uv):
        return None
    return uv


def correspond_many(pixels, from_view: CameraParams, to_view: CameraParams, depth, rig: Rig):
    """Vectorized :func:`correspond`; out-of-view rows are NaN."""
    pts, ok = unproject_many(pixels, from_view, depth, rig)
    uv, ok2 = project_many(pts, to_view)
    ok &= ok2
    ok &= to_view.contains(np.where(ok[:, None], uv, -1.0))
    uv[~ok] = np.nan
    return uv


def nearest_pixel(uv, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Round continuous in-view coordinates to integer (col, row) indices."""
    uv = np.asarray(uv, dtype=np.float64)
    # half-up with slack, so a .5 coordinate and its round-tripped copy agree
    col = np.minimum(np.floor(uv[..., 0] + 0.5 + ROUND_TOL).astype(np.int64), width - 1)
    row = np.minimum(np.floor(uv[..., 1] + 0.5 + ROUND_TOL).astype(np.int64), height - 1)
    return col, row


# -- camera file -----------------------------------------------------------

def _floats(line: str, count: int, what: str, name: str) -> list[float]:
    parts = line.split()
    if len(parts) != count:
        raise CameraFileError(f"camera {name!r}: expected {count} {what} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise CameraFileError(f"camera {name!r}: bad {what} value ({exc})") from None


def parse_cameras(text: str) -> list[CameraParams]:
    blocks: list[list[str]] = [[]]
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            if blocks[-1]:
                blocks.append([])
            continue
        blocks[-1].append(line)
    cams = []
    for block in (b for b in blocks if b):
        if len(block) != 4:
            raise CameraFileError(f"camera block starting {block[0]!r} has {len(block)} lines, expected 4")
        name = block[0]
        K = _floats(block[1], 9, "intrinsics", name)
        R = _floats(block[2], 9, "rotation", name)
        t = _floats(block[3], 3, "translation", name)
        cams.append(CameraParams(np.reshape(K, (3, 3)), np.reshape(R, (3, 3)), np.array(t), name))
    if not cams:
        raise CameraFileError("no cameras found")
    return cams


def load_cameras(path) -> list[CameraParams]:
    return parse_cameras(Path(path).read_text())


def format_cameras(cameras) -> str:
    out = ["# world-to-camera extrinsics: x_cam = R X + t"]
    for i, cam in enumerate(cameras):
        out.append(cam.name or f"cam{i}")
        out.append(" ".join(repr(float(v)) for v in cam.intrinsics.ravel()))
        out.append(" ".join(repr(float(v)) for v in cam.rotation.ravel()))
        out.append(" ".join(repr(float(v)) for v in cam.translation))
        out.append("")
    return "\n".join(out)


def save_cameras(cameras, path) -> None:
    Path(path).write_text(format_cameras(cameras))


def look_at_rotation(yaw: float) -> np.ndarray:
    """World-to-camera rotation for a camera turned by ``yaw`` radians about y."""
    c, s = np.cos(yaw), np.sin(yaw)
    cam_to_world = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return cam_to_world.T


def simple_camera(f: float, cx: float, cy: float, position=(0.0, 0.0, 0.0), yaw: float = 0.0,
                  name: str = "", width: int | None = None, height: int | None = None) -> CameraParams:
    """Camera at world ``position`` turned by ``yaw`` about the y axis."""
    K = np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])
    R = look_at_rotation(yaw)
    t = -R @ np.asarray(position, dtype=np.float64)
    return CameraParams(K, R, t, name, width, height)
