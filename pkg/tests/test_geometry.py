"""Convex-set primitive checks: representations, transforms, supports."""

import numpy as np
import pytest

from sepplan.geometry import (
    GeometryError,
    Ellipsoid,
    Hyperplane,
    Polytope,
    Pose,
    box2d,
    centroid,
    ellipsoid_boundary,
    ellipsoid_support,
    ellipsoid_support_gradient,
    ellipsoid_support_point,
    planar_rotation,
    planar_rotation_derivative,
    polygon_from_vertices,
    transform_ellipsoid,
    transform_polytope,
)

rng = np.random.default_rng(42)


def random_ellipsoid(n=2):
    M = rng.standard_normal((n, n))
    E = M @ M.T + 0.3 * np.eye(n)
    return Ellipsoid(E=E, e=rng.uniform(-3, 3, n))


def random_polygon(n_verts=6):
    # points on a random ellipse are always in convex position
    ang = np.sort(rng.uniform(0, 2 * np.pi, n_verts))
    circle = np.vstack([np.cos(ang), np.sin(ang)])
    M = rng.standard_normal((2, 2)) + 2.0 * np.eye(2)
    return polygon_from_vertices(M @ circle + rng.uniform(-4, 4, (2, 1)))


def test_box2d_forms_agree():
    p = box2d(-1.0, 2.0, 0.5, 3.0)
    assert p.n_faces == 4 and p.n_vertices == 4
    assert (p.A @ p.V <= p.b[:, None] + 1e-12).all()
    assert p.contains(np.array([[0.0], [1.0]])).all()
    assert not p.contains(np.array([[5.0], [1.0]])).any()


def test_polytope_rejects_inconsistent_forms():
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = np.ones(4)
    V_bad = np.array([[3.0], [0.0]])  # outside the face form
    with pytest.raises(GeometryError):
        Polytope(A=A, b=b, V=V_bad)


def test_polytope_rejects_too_few_faces():
    with pytest.raises(GeometryError):
        Polytope(A=np.array([[1.0, 0.0], [0.0, 1.0]]), b=np.ones(2),
                 V=np.zeros((2, 1)))


def test_ellipsoid_requires_spd():
    with pytest.raises(GeometryError):
        Ellipsoid(E=np.array([[1.0, 0.0], [0.0, -1.0]]), e=np.zeros(2))
    with pytest.raises(GeometryError):
        Ellipsoid(E=np.array([[1.0, 0.5], [0.0, 1.0]]), e=np.zeros(2))


def test_pose_rejects_improper_rotation():
    with pytest.raises(GeometryError):
        Pose(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]))  # reflection
    with pytest.raises(GeometryError):
        Pose(np.zeros(2), 2.0 * np.eye(2))


def test_planar_rotation_derivative_matches_fd():
    h = 1e-6
    for theta in rng.uniform(-np.pi, np.pi, 20):
        fd = (planar_rotation(theta + h) - planar_rotation(theta - h)) / (2 * h)
        assert np.abs(fd - planar_rotation_derivative(theta)).max() < 1e-8


def test_polygon_from_vertices_reconstructs_box():
    box = box2d(-1.0, 1.0, -2.0, 2.0)
    rebuilt = polygon_from_vertices(box.V[:, rng.permutation(4)])
    # same vertex set, and the face forms accept exactly the same grid
    assert rebuilt.n_vertices == 4
    grid = np.stack(np.meshgrid(np.linspace(-1.5, 1.5, 13),
                                np.linspace(-2.5, 2.5, 13))).reshape(2, -1)
    assert (box.contains(grid) == rebuilt.contains(grid)).all()


def test_transform_polytope_keeps_forms_consistent():
    for _ in range(30):
        p = random_polygon()
        pose = Pose.planar(*rng.uniform(-3, 3, 2), rng.uniform(-np.pi, np.pi))
        q = transform_polytope(p, pose)
        # construction revalidates; also check membership transported
        pts = p.V.mean(axis=1, keepdims=True)
        moved = pose.rotation @ pts + pose.position[:, None]
        assert q.contains(moved).all()


def test_transform_ellipsoid_preserves_level_values():
    for _ in range(30):
        ell = random_ellipsoid()
        pose = Pose.planar(*rng.uniform(-3, 3, 2), rng.uniform(-np.pi, np.pi))
        moved = transform_ellipsoid(ell, pose)
        pts = ell.e[:, None] + rng.uniform(-1, 1, (2, 8))
        lv = ell.level(pts)
        lv_moved = moved.level(pose.rotation @ pts + pose.position[:, None])
        assert np.abs(lv - lv_moved).max() < 1e-9


def test_ellipsoid_support_matches_boundary_max():
    for _ in range(40):
        ell = random_ellipsoid()
        lam = rng.standard_normal(2)
        lam /= np.linalg.norm(lam)
        val = ellipsoid_support(ell, lam)
        bound = ellipsoid_boundary(ell, 4000)
        assert val >= (lam @ bound).max() - 1e-6
        assert val <= (lam @ bound).max() + 1e-3  # grid resolution slack


def test_ellipsoid_support_point_attains_value():
    for _ in range(40):
        ell = random_ellipsoid()
        lam = rng.standard_normal(2)
        p = ellipsoid_support_point(ell, lam)
        assert abs(float(ell.level(p[:, None])[0]) - 1.0) < 1e-9
        assert abs(lam @ p - ellipsoid_support(ell, lam)) < 1e-9


def test_ellipsoid_support_gradient_matches_fd():
    h = 1e-6
    for _ in range(40):
        ell = random_ellipsoid()
        lam = rng.standard_normal(2)
        lam /= np.linalg.norm(lam)
        g = ellipsoid_support_gradient(ell, lam)
        for i in range(2):
            d = np.zeros(2)
            d[i] = h
            fd = (ellipsoid_support(ell, lam + d) - ellipsoid_support(ell, lam - d)) / (2 * h)
            assert abs(fd - g[i]) < 1e-6


def test_centroid():
    assert np.allclose(centroid(box2d(0.0, 2.0, 0.0, 4.0)), [1.0, 2.0])
    ell = Ellipsoid(E=np.eye(2), e=np.array([3.0, -1.0]))
    assert np.allclose(centroid(ell), [3.0, -1.0])


def test_hyperplane_guards_degenerate_normal():
    with pytest.raises(GeometryError):
        Hyperplane(lam=np.array([1e-6, 0.0]), mu=0.0)
    hp = Hyperplane(lam=np.array([1.0, 0.0]), mu=2.0)
    assert hp.side(np.array([[3.0], [0.0]]))[0] > 0
    assert hp.side(np.array([[1.0], [5.0]]))[0] < 0
