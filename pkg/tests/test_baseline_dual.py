"""Dual multiplier formulation: variable accounting and certificate checks."""

import numpy as np
import pytest

from sepplan.baseline_dual import (
    FormulationKind,
    UnsupportedCombinationError,
    count_aux_variables,
    dual_sep_poly_poly,
    dual_sep_poly_poly_jac,
)
from sepplan.geometry import (
    Ellipsoid,
    GeometryError,
    box2d,
    polygon_from_vertices,
)
from sepplan.verification import oracle_disjoint
from sepplan.witness import witness_dual_poly_poly

rng = np.random.default_rng(23)


def random_polygon(center, n_verts=5, radius=1.0):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n_verts))
    r = radius * rng.uniform(0.5, 1.0)
    pts = np.vstack([r * np.cos(ang), r * np.sin(ang)]) + np.asarray(center)[:, None]
    return polygon_from_vertices(pts)


def unit_ball(n):
    return Ellipsoid(E=np.eye(n), e=np.zeros(n))


def simplex3d():
    V = np.array([[0.0, 1.0, 0.0, 0.0],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
    A = np.array([[-1.0, 0.0, 0.0],
                  [0.0, -1.0, 0.0],
                  [0.0, 0.0, -1.0],
                  [1.0, 1.0, 1.0]])
    b = np.array([0.0, 0.0, 0.0, 1.0])
    from sepplan.geometry import Polytope
    return Polytope(A=A, b=b, V=V)


def cube3d():
    from sepplan.geometry import Polytope
    V = np.array([[x, y, z] for x in (0.0, 1.0)
                  for y in (0.0, 1.0) for z in (0.0, 1.0)]).T
    A = np.vstack([np.eye(3), -np.eye(3)])
    b = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    return Polytope(A=A, b=b, V=V)


def test_count_per_side_planar():
    pent = random_polygon(np.zeros(2), n_verts=5)
    square = box2d(0.0, 1.0, 0.0, 1.0)
    ball = unit_ball(2)
    # hyperplane always budgets a normal plus offset
    for pair in [(pent, square), (ball, ball), (pent, ball)]:
        assert count_aux_variables(FormulationKind.HYPERPLANE, *pair) == 3
    # dual: one multiplier per face, two blocks of N+1 for ellipsoid pairs,
    # N for the ellipsoid half of a mixed pair
    assert count_aux_variables(FormulationKind.DUAL, pent, square) == 9
    assert count_aux_variables(FormulationKind.DUAL, ball, ball) == 6
    assert count_aux_variables(FormulationKind.DUAL, pent, ball) == 7
    assert count_aux_variables(FormulationKind.DUAL, ball, square) == 6
    # farkas mirrors the dual face count for polytope pairs
    assert count_aux_variables(FormulationKind.FARKAS, pent, square) == 9


def test_count_per_side_spatial():
    tet = simplex3d()
    cube = cube3d()
    ball = unit_ball(3)
    assert count_aux_variables(FormulationKind.HYPERPLANE, tet, cube) == 4
    assert count_aux_variables(FormulationKind.HYPERPLANE, ball, ball) == 4
    assert count_aux_variables(FormulationKind.DUAL, tet, cube) == 10
    assert count_aux_variables(FormulationKind.DUAL, ball, ball) == 8
    assert count_aux_variables(FormulationKind.DUAL, cube, ball) == 9
    assert count_aux_variables(FormulationKind.FARKAS, tet, cube) == 10


def test_farkas_rejects_ellipsoids():
    pent = random_polygon(np.zeros(2))
    ball = unit_ball(2)
    for pair in [(pent, ball), (ball, pent), (ball, ball)]:
        with pytest.raises(UnsupportedCombinationError):
            count_aux_variables(FormulationKind.FARKAS, *pair)


def test_hyperplane_never_exceeds_dual():
    for _ in range(50):
        p1 = random_polygon(np.zeros(2), n_verts=int(rng.integers(3, 9)))
        p2 = random_polygon(np.ones(2), n_verts=int(rng.integers(3, 9)))
        hyp = count_aux_variables(FormulationKind.HYPERPLANE, p1, p2)
        dual = count_aux_variables(FormulationKind.DUAL, p1, p2)
        assert hyp < dual


def test_dual_witness_agrees_with_oracle():
    agree = sep_n = overlap_n = 0
    for _ in range(200):
        c1 = rng.uniform(-3, 3, 2)
        p1 = random_polygon(c1)
        p2 = random_polygon(c1 + rng.uniform(-2.2, 2.2, 2))
        verdict = oracle_disjoint(p1, p2)
        if abs(verdict.margin) < 1e-6:
            continue
        wit = witness_dual_poly_poly(p1, p2)
        assert wit.feasible == verdict.disjoint
        agree += 1
        sep_n += verdict.disjoint
        overlap_n += not verdict.disjoint
    assert sep_n >= 30 and overlap_n >= 30, (sep_n, overlap_n)


def test_dual_residual_on_hand_built_pair():
    # two unit squares with a gap of 1 in x; the classic certificate picks
    # the facing faces
    left = box2d(-2.0, -1.0, 0.0, 1.0)
    right = box2d(0.0, 1.0, 0.0, 1.0)
    wit = witness_dual_poly_poly(left, right)
    assert wit.feasible
    assert wit.margin == pytest.approx(1.0, abs=1e-9)
    res = dual_sep_poly_poly(left, right, wit.lam, wit.mu)
    assert np.abs(res.eq).max() <= 1e-9
    assert res.ineq.max() <= -1.0 + 1e-9  # separation slack shows up here


def test_dual_residual_validation():
    left = box2d(-2.0, -1.0, 0.0, 1.0)
    right = box2d(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(GeometryError):
        dual_sep_poly_poly(left, right, np.zeros(3), np.zeros(4))
    with pytest.raises(GeometryError):
        dual_sep_poly_poly(left, right, -np.ones(4), np.zeros(4))


def test_dual_infeasible_for_overlap():
    """No nonnegative multipliers satisfy the certificate on overlap."""
    a = box2d(-1.0, 1.0, -1.0, 1.0)
    b = box2d(0.0, 2.0, 0.0, 2.0)
    assert not witness_dual_poly_poly(a, b).feasible
    # scan a crude grid as a second, solver-free check
    for _ in range(2000):
        lam = rng.uniform(0, 2, 4)
        mu = rng.uniform(0, 2, 4)
        res = dual_sep_poly_poly(a, b, lam, mu)
        feas = np.abs(res.eq).max() <= 1e-6 and res.ineq.max() <= 1e-6
        assert not feas


def test_dual_jacobian_fd():
    h = 1e-6
    for _ in range(30):
        p1 = random_polygon(rng.uniform(-2, 2, 2))
        p2 = random_polygon(rng.uniform(-2, 2, 2), n_verts=4)
        lam0 = rng.uniform(0.1, 2.0, p1.n_faces)
        mu0 = rng.uniform(0.1, 2.0, p2.n_faces)
        J_eq, J_ineq = dual_sep_poly_poly_jac(p1, p2, lam0, mu0)
        x0 = np.concatenate([lam0, mu0])
        for c in range(x0.shape[0]):
            xp, xm = x0.copy(), x0.copy()
            xp[c] += h
            xm[c] -= h
            rp = dual_sep_poly_poly(p1, p2, xp[:p1.n_faces], xp[p1.n_faces:])
            rm = dual_sep_poly_poly(p1, p2, xm[:p1.n_faces], xm[p1.n_faces:])
            fd_eq = (rp.eq - rm.eq) / (2 * h)
            fd_ineq = (rp.ineq - rm.ineq) / (2 * h)
            assert np.abs(J_eq[:, c] - fd_eq).max() <= 1e-5
            assert np.abs(J_ineq[:, c] - fd_ineq).max() <= 1e-6
