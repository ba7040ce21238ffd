import numpy as np
import pytest

from patchwave import (
    SurfaceError,
    fichera_corner,
    load_surface,
    partition_eval,
    quasi_random_points,
    surface_text,
    unit_cube,
)


def _volume(surface):
    # divergence theorem with F = x: 3V = sum over flat patches of (c . n) |F|
    total = 0.0
    for p in surface.patches:
        c = p.chart(0.5, 0.5)
        total += float(np.dot(c, p.normal)) * p.area
    return total / 3.0


def test_cube_layout(cube):
    assert cube.n_patches == 6
    assert cube.n_vertices == 8
    assert sum(p.area for p in cube.patches) == pytest.approx(6.0, abs=1e-12)
    for p in cube.patches:
        # faces are planar unit squares: no bilinear term, unit jacobian
        assert np.allclose(p.coeff_d, 0.0)
        assert p.jacobian_det(np.array(0.3), np.array(0.7)) == pytest.approx(1.0)
    assert _volume(cube) == pytest.approx(1.0, abs=1e-12)


def test_fichera_layout(fichera):
    assert fichera.n_patches == 24
    assert _volume(fichera) == pytest.approx(7.0, abs=1e-12)


def test_outward_normals(cube):
    center = np.array([0.5, 0.5, 0.5])
    for p in cube.patches:
        assert np.dot(p.chart(0.5, 0.5) - center, p.normal) > 0.49
        assert np.linalg.norm(p.normal) == pytest.approx(1.0)


def test_chart_corner_order_and_inverse(cube, rng):
    for p in cube.patches:
        for (s, t), corner in zip(((0, 0), (1, 0), (1, 1), (0, 1)), p.corners):
            assert np.allclose(p.chart(float(s), float(t)), corner)
        s, t = rng.uniform(0.05, 0.95, 2)
        s2, t2 = p.chart_inverse(p.chart(s, t))
        assert abs(s - s2) < 1e-12 and abs(t - t2) < 1e-12


def test_load_rejects_flipped_patch():
    desc = unit_cube()
    bad = dict(desc)
    bad["patches"] = [list(q) for q in desc["patches"]]
    bad["patches"][0] = bad["patches"][0][::-1]
    with pytest.raises(SurfaceError):
        load_surface(bad)


def test_load_rejects_open_surface():
    desc = unit_cube()
    bad = {"vertices": desc["vertices"], "patches": desc["patches"][:-1]}
    with pytest.raises(SurfaceError):
        load_surface(bad)


def test_load_rejects_nonconvex_quad():
    # a chevron: vertex 2 pulled inside the hull of the others
    desc = {
        "vertices": [[0, 0, 0], [1, 0, 0], [0.4, 0.4, 0], [0, 1, 0],
                     [0, 0, 1], [1, 0, 1], [0.4, 0.4, 1], [0, 1, 1]],
        "patches": [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4],
                    [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]],
    }
    with pytest.raises(SurfaceError):
        load_surface(desc)


def test_text_roundtrip(cube):
    again = load_surface(surface_text(cube))
    assert again.content_hash() == cube.content_hash()
    assert again.n_patches == cube.n_patches


def test_cone_structure(cube):
    for n in range(cube.n_vertices):
        faces = cube.cone_faces(n)
        assert len(faces) == 3
        # every cube corner opens three right-angle sectors
        assert np.allclose(cube.cone_angles(n), np.pi / 2)
        for f in faces:
            assert np.dot(f.e1, f.e2) == pytest.approx(0.0, abs=1e-12)
            y1, y2 = f.to_plane(f.to_3d(0.3, 0.2))
            assert (y1, y2) == pytest.approx((0.3, 0.2), abs=1e-12)


def test_partition_examples(cube, rou):
    # at a vertex the owning weight is 1, all others 0
    v = cube.vertices[0]
    for n in range(cube.n_vertices):
        expect = 1.0 if n == 0 else 0.0
        assert partition_eval(rou, n, v) == pytest.approx(expect, abs=1e-12)
    # midpoint of an edge splits evenly between the endpoints
    mid = 0.5 * (cube.vertices[0] + cube.vertices[1])
    w0 = partition_eval(rou, 0, mid)
    w1 = partition_eval(rou, 1, mid)
    assert w0 == pytest.approx(0.5, abs=1e-12)
    assert w1 == pytest.approx(0.5, abs=1e-12)
    # at a face barycenter the four face corners contribute equally and the
    # opposite-face vertices (distance sqrt(1.5) > r1) not at all
    bary = cube.patches[0].chart(0.5, 0.5)
    face = set(cube.patches[0].corner_ids)
    for n in range(cube.n_vertices):
        if n in face:
            assert partition_eval(rou, n, bary) == pytest.approx(0.25, abs=1e-12)
        else:
            assert partition_eval(rou, n, bary) == 0.0


def test_partition_sums_to_one(cube, rou):
    _, _, pts = quasi_random_points(cube, 200)
    total = rou.eval_all(pts).sum(axis=0)
    assert np.allclose(total, 1.0, atol=1e-12)


def test_partition_profile_shape(rou):
    r = np.linspace(0.0, 2.0, 50)
    vals = np.array([rou.profile(0, x) for x in r])
    assert vals[0] == 1.0
    assert np.all(vals <= 1.0) and np.all(vals >= 0.0)
    assert np.all(np.diff(vals) <= 1e-15)


def test_quasi_random_points_deterministic(cube):
    ids1, params1, pts1 = quasi_random_points(cube, 64)
    ids2, params2, pts2 = quasi_random_points(cube, 64)
    assert np.array_equal(ids1, ids2)
    assert np.array_equal(pts1, pts2)
    assert params1.shape == (64, 2)
    assert params1.min() >= 0.0 and params1.max() <= 1.0
    # every returned point sits on its owning patch
    for pid, (s, t), x in zip(ids1, params1, pts1):
        assert np.allclose(cube.patches[pid].chart(s, t), x)
