import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segdepth import geometry as geo


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def cam(f=100.0, cx=50.0, cy=50.0, R=np.eye(3), t=(0, 0, 0), w=100, h=100):
    K = np.array([[f, 0, cx], [0, f, cy], [0, 0, 1.0]])
    return geo.CameraParams(K, R, np.asarray(t, dtype=float), "c", w, h)


def homogeneous(c: geo.CameraParams):
    """3x4 projection matrix built the textbook way."""
    Rt = np.hstack([c.rotation, c.translation[:, None]])
    return c.intrinsics @ Rt


def rig_of(*cams, center=None):
    return geo.Rig(tuple(cams), center)


def random_camera(rng):
    R = rot_y(rng.uniform(-0.3, 0.3)) @ rot_x(rng.uniform(-0.2, 0.2))
    t = rng.uniform(-0.5, 0.5, 3)
    f = rng.uniform(200, 800)
    return cam(f, rng.uniform(100, 220), rng.uniform(80, 160), R, t, 320, 240)


# -- center plane depth ------------------------------------------------------

def test_center_plane_depth_identity():
    r = rig_of(cam(), cam(), center=0)
    assert geo.center_plane_depth([0, 0, 5], r) == pytest.approx(5)


def test_center_plane_depth_translated():
    c = cam(t=(0, 0, -2))
    assert geo.center_plane_depth([0, 0, 5], rig_of(c, cam(), center=0)) == pytest.approx(3)


def test_center_plane_depth_rotated_matches_4x4():
    c = cam(R=rot_y(np.pi / 2), t=(0.3, -0.1, 0.7))
    T = np.eye(4)
    T[:3, :3], T[:3, 3] = c.rotation, c.translation
    P = np.array([4.0, 0, 0, 1])
    expected = (T @ P)[2]
    assert geo.center_plane_depth(P[:3], rig_of(c, cam(), center=0)) == pytest.approx(expected, abs=1e-12)


# -- unprojection / projection --------------------------------------------------

def test_principal_ray():
    c = cam()
    p = geo.unproject_at_depth([50, 50], c, 4.0, rig_of(c, cam(), center=0))
    np.testing.assert_allclose(p, [0, 0, 4], atol=1e-12)


def test_projection_examples():
    c = cam()
    np.testing.assert_allclose(geo.project([0, 0, 2], c), [50, 50])
    np.testing.assert_allclose(geo.project([1, 0, 2], c), [100, 50])


def test_project_matches_matrix_oracle():
    rng = np.random.default_rng(1)
    for _ in range(10):
        c = random_camera(rng)
        P = homogeneous(c)
        pts = rng.uniform(-1, 1, (100, 3)) + [0, 0, 4]
        uv, ok = geo.project_many(pts, c)
        h = np.hstack([pts, np.ones((100, 1))]) @ P.T
        ref = h[:, :2] / h[:, 2:]
        np.testing.assert_allclose(uv[ok], ref[ok], atol=1e-9)
        for i in np.flatnonzero(ok)[:5]:
            np.testing.assert_allclose(geo.project(pts[i], c), ref[i], atol=1e-9)


def test_symbolic_plane_ray_intersection():
    # center camera at origin; the other sits 0.1 to the right, same orientation
    center = cam(f=100, cx=50, cy=50)
    right = cam(f=100, cx=50, cy=50, t=(-0.1, 0, 0))
    r = rig_of(center, right, center=0)
    # pixel (cx+10, cy) of the right camera: ray direction (0.1, 0, 1) from (0.1, 0, 0)
    p = geo.unproject_at_depth([60, 50], right, 2.0, r)
    np.testing.assert_allclose(p, [0.1 + 0.1 * 2.0, 0, 2.0], atol=1e-12)


def test_round_trip_1000_draws():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        views = [random_camera(rng) for _ in range(2)]
        r = rig_of(*views, center=int(rng.integers(0, 2)))
        v = views[int(rng.integers(0, 2))]
        px = rng.uniform([0, 0], [320, 240])
        d = rng.uniform(1.0, 10.0)
        back = geo.project(geo.unproject_at_depth(px, v, d, r), v)
        worst = max(worst, float(np.abs(back - px).max()))
    assert worst < 1e-6


def test_unproject_many_matches_scalar():
    rng = np.random.default_rng(3)
    a, b = random_camera(rng), random_camera(rng)
    r = rig_of(a, b)
    px = rng.uniform([0, 0], [320, 240], (50, 2))
    d = rng.uniform(1, 5, 50)
    pts, ok = geo.unproject_many(px, a, d, r)
    assert ok.all()
    for i in range(50):
        np.testing.assert_allclose(pts[i], geo.unproject_at_depth(px[i], a, d[i], r), atol=1e-12)


def test_unprojected_point_has_requested_depth():
    rng = np.random.default_rng(4)
    a, b, c = (random_camera(rng) for _ in range(3))
    r = rig_of(a, b, c)
    p = geo.unproject_at_depth([17.0, 33.0], a, 3.25, r)
    assert geo.center_plane_depth(p, r) == pytest.approx(3.25, abs=1e-12)


def test_behind_camera_errors():
    c = cam()
    r = rig_of(c, cam(), center=0)
    with pytest.raises(geo.BehindCamera):
        geo.project([0, 0, -1], c)
    with pytest.raises(geo.BehindCamera):
        geo.unproject_at_depth([50, 50], c, -1.0, r)


def test_parallel_ray_error():
    center = cam()
    side = cam(R=rot_y(np.pi / 2))
    r = rig_of(center, side, center=0)
    # the side camera's principal ray is parallel to the center plane
    with pytest.raises(geo.RayParallelToPlane):
        geo.unproject_at_depth([50, 50], side, 2.0, r)
    pts, ok = geo.unproject_many([[50, 50]], side, 2.0, r)
    assert not ok[0] and np.isnan(pts[0]).all()


# -- correspondence -------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(u=st.floats(0, 99.4), v=st.floats(0, 99.4), d=st.floats(0.5, 50))
def test_correspond_same_view_is_identity(u, v, d):
    c = cam()
    r = rig_of(c, cam(t=(-0.1, 0, 0)), center=0)
    out = geo.correspond([u, v], c, c, d, r)
    np.testing.assert_allclose(out, [u, v], atol=1e-6)


def test_rectified_disparity():
    f, b = 300.0, 0.1
    left = cam(f, 160, 120, w=320, h=240)
    right = cam(f, 160, 120, t=(-b, 0, 0), w=320, h=240)
    r = rig_of(left, right, center=0)
    for z in (0.8, 1.5, 3.0, 5.0):
        for u, v in ((200.0, 100.0), (170.5, 10.25)):
            out = geo.correspond([u, v], left, right, z, r)
            np.testing.assert_allclose(out, [u - f * b / z, v], atol=1e-6)
    px = np.array([[200.0, 100.0], [250.0, 30.0]])
    z = np.array([1.0, 2.0])
    out = geo.correspond_many(px, left, right, z, r)
    np.testing.assert_allclose(out[:, 0], px[:, 0] - f * b / z, atol=1e-9)


def test_converging_cameras_against_composition():
    a = cam(300, 160, 120, R=geo.look_at_rotation(np.radians(10)).copy(),
            t=-geo.look_at_rotation(np.radians(10)) @ [-0.2, 0, 0], w=320, h=240)
    b = cam(300, 160, 120, R=geo.look_at_rotation(np.radians(-10)).copy(),
            t=-geo.look_at_rotation(np.radians(-10)) @ [0.2, 0, 0], w=320, h=240)
    mid = cam(300, 160, 120, w=320, h=240)
    r = rig_of(a, mid, b)
    rng = np.random.default_rng(5)
    Pa, Pb = homogeneous(a), homogeneous(b)
    for _ in range(100):
        px = rng.uniform([40, 40], [280, 200])
        z = rng.uniform(1.5, 4.0)
        # oracle: intersect the back-projected ray with the plane z_world = z by solving Pa X = s [u v 1]
        A = np.vstack([Pa[:2, :3] - np.outer(px, Pa[2, :3]), [0, 0, 1]])
        rhs = np.r_[np.outer(px, Pa[2, 3])[:, 0] - Pa[:2, 3], z]
        X = np.linalg.solve(A, rhs)
        h = Pb @ np.r_[X, 1]
        ref = h[:2] / h[2]
        out = geo.correspond(px, a, b, z, r)
        if out is None:
            assert not (0 <= ref[0] < 320 and 0 <= ref[1] < 240)
        else:
            np.testing.assert_allclose(out, ref, atol=1e-6)


def test_out_of_view_is_none_and_nan():
    left = cam(100, 50, 50)
    right = cam(100, 50, 50, t=(-1.0, 0, 0))
    r = rig_of(left, right, center=0)
    assert geo.correspond([5, 50], left, right, 1.0, r) is None
    assert np.isnan(geo.correspond_many([[5, 50]], left, right, 1.0, r)).all()


def test_nearest_pixel_clamps():
    col, row = geo.nearest_pixel(np.array([[99.6, 0.4], [3.5, 2.5]]), 100, 100)
    assert col.tolist() == [99, 4] and row.tolist() == [0, 3]


def test_neighbor_topology():
    t = geo.NeighborTopology.from_rig(5)
    assert t[0] == (1,) and t[4] == (3,) and t[2] == (1, 3)


# -- validation and camera files ---------------------------------------------------

def test_invalid_cameras():
    with pytest.raises(geo.GeometryError):
        cam(R=np.diag([1, 1, -1.0]))
    with pytest.raises(geo.GeometryError):
        cam(R=np.eye(3) * 1.001)
    with pytest.raises(geo.GeometryError):
        cam(f=-1)
    K = np.eye(3)
    K[2, 0] = 1
    with pytest.raises(geo.GeometryError):
        geo.CameraParams(K, np.eye(3), np.zeros(3))


def test_rig_invariants():
    with pytest.raises(geo.GeometryError):
        geo.Rig((cam(),))
    with pytest.raises(geo.GeometryError):
        geo.Rig((cam(), cam()), 2)
    assert geo.Rig((cam(), cam(), cam())).center_index == 1
    assert geo.Rig((cam(),) * 4).center_index == 2


def test_camera_file_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    cams = [random_camera(rng) for _ in range(3)]
    path = tmp_path / "cams.txt"
    geo.save_cameras(cams, path)
    back = geo.load_cameras(path)
    for a, b in zip(cams, back):
        np.testing.assert_array_equal(a.intrinsics, b.intrinsics)
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.translation, b.translation)


@pytest.mark.parametrize("text", [
    "",
    "cam0\n1 0 0 0 1 0 0 0 1\n1 0 0 0 1 0 0 0 1\n",
    "cam0\n1 0 0 0 1 0 0 0\n1 0 0 0 1 0 0 0 1\n0 0 0\n",
    "cam0\n1 0 0 0 1 0 0 0 1\n1 0 0 0 1 0 0 0 x\n0 0 0\n",
])
def test_camera_file_errors(text):
    with pytest.raises(geo.CameraFileError):
        geo.parse_cameras(text)
