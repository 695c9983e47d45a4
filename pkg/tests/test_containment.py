"""Containment residuals against the sampling/support oracle.

Polytope-inner kinds are exact (vertex containment), so residual
feasibility must match the oracle verdict on every decisive instance.
The ellipsoid-in-ellipsoid kind goes through the multiplier search.
"""

import numpy as np
import pytest

from sepplan.containment import (
    ContainKind,
    FactorizationError,
    aux_count,
    contain_ell_in_ell,
    contain_ell_in_ell_jac,
    contain_ell_in_poly,
    contain_ell_in_poly_jac_center,
    contain_poly_in_ell,
    contain_poly_in_ell_jac,
    contain_poly_in_poly,
    contain_poly_in_poly_jac,
    g_matrix,
    g_matrix_dlam,
    psd_cholesky,
    tril_pack,
    tril_unpack,
)
from sepplan.geometry import (
    Ellipsoid,
    GeometryError,
    box2d,
    polygon_from_vertices,
)
from sepplan.verification import oracle_contained
from sepplan.witness import witness_contain_ell_in_ell

rng = np.random.default_rng(19)


def random_polygon(center, radius=1.0, n_verts=5):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n_verts))
    r = radius * rng.uniform(0.5, 1.0)
    pts = np.vstack([r * np.cos(ang), r * np.sin(ang)]) + np.asarray(center)[:, None]
    return polygon_from_vertices(pts)


def random_ellipsoid(center, scale=1.0):
    M = rng.standard_normal((2, 2))
    E = (M @ M.T + 0.5 * np.eye(2)) / scale ** 2
    return Ellipsoid(E=E, e=np.asarray(center, dtype=float))


def test_aux_counts():
    assert aux_count(ContainKind.POLY_IN_POLY, 2) == 0
    assert aux_count(ContainKind.POLY_IN_ELL, 2) == 0
    assert aux_count(ContainKind.ELL_IN_POLY, 2) == 0
    assert aux_count(ContainKind.ELL_IN_ELL, 2) == 7
    assert aux_count(ContainKind.ELL_IN_ELL, 3) == 11


def test_poly_in_poly_matches_oracle():
    canvas = box2d(-3.0, 3.0, -2.0, 2.0)
    agree = in_count = out_count = 0
    for _ in range(300):
        inner = random_polygon(rng.uniform(-4, 4, 2), radius=rng.uniform(0.3, 1.5))
        verdict = oracle_contained(inner, canvas)
        if abs(verdict.worst_violation) < 1e-9:
            continue
        feas = contain_poly_in_poly(inner.V, canvas).max() <= 0.0
        assert feas == verdict.contained
        agree += 1
        in_count += verdict.contained
        out_count += not verdict.contained
    assert in_count >= 20 and out_count >= 20, (in_count, out_count)


def test_poly_in_ell_matches_oracle():
    canvas = Ellipsoid(E=np.diag([1.0 / 9.0, 1.0 / 4.0]), e=np.zeros(2))
    in_count = out_count = 0
    for _ in range(300):
        inner = random_polygon(rng.uniform(-3.5, 3.5, 2), radius=rng.uniform(0.3, 1.2))
        verdict = oracle_contained(inner, canvas)
        if abs(verdict.worst_violation) < 1e-9:
            continue
        feas = contain_poly_in_ell(inner.V, canvas).max() <= 0.0
        assert feas == verdict.contained
        in_count += verdict.contained
        out_count += not verdict.contained
    assert in_count >= 20 and out_count >= 20, (in_count, out_count)


def test_ell_in_poly_matches_oracle():
    canvas = box2d(-3.0, 3.0, -2.5, 2.5)
    in_count = out_count = 0
    for _ in range(300):
        inner = random_ellipsoid(rng.uniform(-3.5, 3.5, 2), scale=rng.uniform(0.4, 1.4))
        verdict = oracle_contained(inner, canvas)
        if abs(verdict.worst_violation) < 1e-7:
            continue
        feas = contain_ell_in_poly(inner, canvas).max() <= 0.0
        assert feas == verdict.contained
        in_count += verdict.contained
        out_count += not verdict.contained
    assert in_count >= 20 and out_count >= 20, (in_count, out_count)


def test_ell_in_ell_matches_multiplier_search():
    in_count = out_count = 0
    for _ in range(150):
        outer = random_ellipsoid(rng.uniform(-0.5, 0.5, 2), scale=rng.uniform(2.0, 3.5))
        inner = random_ellipsoid(rng.uniform(-2.0, 2.0, 2), scale=rng.uniform(0.5, 1.2))
        verdict = oracle_contained(inner, outer)
        if abs(verdict.worst_violation) < 1e-5:
            continue
        ok, lam, L = witness_contain_ell_in_ell(inner, outer)
        assert ok == verdict.contained
        if ok:
            res = contain_ell_in_ell(inner, outer, lam, L)
            assert np.abs(res.eq).max() <= 1e-6
            assert res.ineq.max() <= 1e-9
            in_count += 1
        else:
            out_count += 1
    assert in_count >= 15 and out_count >= 15, (in_count, out_count)


def test_ell_in_ell_residual_soundness():
    """A feasible (lam, factor) pair never exists for escaping ellipsoids."""
    for _ in range(100):
        outer = random_ellipsoid(np.zeros(2), scale=2.0)
        inner = random_ellipsoid(rng.uniform(-3, 3, 2), scale=1.0)
        lam = rng.uniform(0.0, 4.0)
        L = np.tril(rng.standard_normal((3, 3)))
        res = contain_ell_in_ell(inner, outer, lam, L)
        if np.abs(res.eq).max() <= 1e-9 and res.ineq.max() <= 1e-9:
            assert oracle_contained(inner, outer).contained


def test_g_matrix_certifies_known_pairs():
    # concentric balls: radius 1 inside radius 2, the classic multiplier is
    # the squared radius ratio region; check a feasible value exists
    inner = Ellipsoid(E=np.eye(2), e=np.zeros(2))
    outer = Ellipsoid(E=0.25 * np.eye(2), e=np.zeros(2))
    ok, lam, L = witness_contain_ell_in_ell(inner, outer)
    assert ok and lam >= 0.0
    G = g_matrix(inner, outer, lam)
    assert np.linalg.eigvalsh(G)[0] >= -1e-9
    # and the reverse inclusion fails
    ok_rev, _, _ = witness_contain_ell_in_ell(outer, inner)
    assert not ok_rev


def test_tril_pack_roundtrip():
    M = np.tril(rng.standard_normal((4, 4)))
    assert np.allclose(tril_unpack(tril_pack(M), 4), M)
    with pytest.raises(GeometryError):
        tril_unpack(np.zeros(5), 3)


def test_psd_cholesky_reconstructs():
    for n in (2, 3, 5):
        for _ in range(20):
            A = rng.standard_normal((n, n))
            G = A @ A.T + 0.1 * np.eye(n)
            L = psd_cholesky(G)
            assert np.allclose(L, np.tril(L))
            assert np.diag(L).min() >= 0.0
            assert np.abs(L @ L.T - G).max() <= 1e-8 * max(1.0, np.abs(G).max())


def test_psd_cholesky_handles_rank_deficiency():
    v = rng.standard_normal(4)
    G = np.outer(v, v)  # rank one
    L = psd_cholesky(G)
    assert np.abs(L @ L.T - G).max() <= 1e-7 * max(1.0, np.abs(G).max())


def test_psd_cholesky_rejects_indefinite():
    G = np.diag([1.0, -0.5])
    with pytest.raises(FactorizationError):
        psd_cholesky(G)
    with pytest.raises(GeometryError):
        psd_cholesky(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_dimension_mismatch_rejected():
    canvas = box2d(-1, 1, -1, 1)
    with pytest.raises(GeometryError):
        contain_poly_in_poly(np.zeros((3, 4)), canvas)
    with pytest.raises(GeometryError):
        contain_poly_in_ell(np.zeros((3, 4)), random_ellipsoid(np.zeros(2)))


def test_poly_in_poly_jacobian_fd():
    h = 1e-7
    canvas = random_polygon(np.zeros(2), radius=3.0, n_verts=6)
    V = random_polygon(rng.uniform(-1, 1, 2)).V
    J = contain_poly_in_poly_jac(V, canvas)
    x0 = V.T.ravel()
    for c in range(x0.shape[0]):
        xp, xm = x0.copy(), x0.copy()
        xp[c] += h
        xm[c] -= h
        fd = (contain_poly_in_poly(xp.reshape(-1, 2).T, canvas)
              - contain_poly_in_poly(xm.reshape(-1, 2).T, canvas)) / (2 * h)
        assert np.abs(J[:, c] - fd).max() <= 1e-6


def test_poly_in_ell_jacobian_fd():
    h = 1e-6
    canvas = random_ellipsoid(np.zeros(2), scale=3.0)
    V = random_polygon(rng.uniform(-1, 1, 2)).V
    J = contain_poly_in_ell_jac(V, canvas)
    x0 = V.T.ravel()
    for c in range(x0.shape[0]):
        xp, xm = x0.copy(), x0.copy()
        xp[c] += h
        xm[c] -= h
        fd = (contain_poly_in_ell(xp.reshape(-1, 2).T, canvas)
              - contain_poly_in_ell(xm.reshape(-1, 2).T, canvas)) / (2 * h)
        assert np.abs(J[:, c] - fd).max() <= 1e-5


def test_ell_in_poly_center_jacobian_fd():
    h = 1e-6
    canvas = random_polygon(np.zeros(2), radius=3.0, n_verts=6)
    ell = random_ellipsoid(rng.uniform(-1, 1, 2))
    J = contain_ell_in_poly_jac_center(ell, canvas)
    for c in range(2):
        d = np.zeros(2)
        d[c] = h
        fp = contain_ell_in_poly(Ellipsoid(E=ell.E, e=ell.e + d), canvas)
        fm = contain_ell_in_poly(Ellipsoid(E=ell.E, e=ell.e - d), canvas)
        assert np.abs(J[:, c] - (fp - fm) / (2 * h)).max() <= 1e-6


def test_ell_in_ell_jacobian_fd():
    h = 1e-6
    inner = random_ellipsoid(rng.uniform(-0.5, 0.5, 2), scale=1.0)
    outer = random_ellipsoid(np.zeros(2), scale=2.5)
    lam0 = rng.uniform(0.1, 2.0)
    u0 = tril_pack(np.tril(rng.standard_normal((3, 3))))
    J_lam, J_ups = contain_ell_in_ell_jac(inner, outer, lam0, u0)
    fd_lam = (contain_ell_in_ell(inner, outer, lam0 + h, u0).eq
              - contain_ell_in_ell(inner, outer, lam0 - h, u0).eq) / (2 * h)
    assert np.abs(J_lam - fd_lam).max() <= 1e-6
    for c in range(u0.shape[0]):
        up, um = u0.copy(), u0.copy()
        up[c] += h
        um[c] -= h
        fd = (contain_ell_in_ell(inner, outer, lam0, up).eq
              - contain_ell_in_ell(inner, outer, lam0, um).eq) / (2 * h)
        assert np.abs(J_ups[:, c] - fd).max() <= 1e-5


def test_g_matrix_dlam_fd():
    h = 1e-6
    inner = random_ellipsoid(rng.uniform(-1, 1, 2))
    outer = random_ellipsoid(np.zeros(2), scale=2.0)
    D = g_matrix_dlam(inner)
    fd = (g_matrix(inner, outer, 1.0 + h) - g_matrix(inner, outer, 1.0 - h)) / (2 * h)
    assert np.abs(D - fd).max() <= 1e-6
