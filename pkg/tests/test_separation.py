"""Separating-plane residuals against the geometric oracles.

Soundness: a feasible residual vector certifies disjointness. Completeness:
for disjoint pairs the witness searches find a feasible point. Both run on
random planar instances; the full-size equivalence sweep lives in the
acceptance suite.
"""

import numpy as np
import pytest

from sepplan.geometry import (
    LAMBDA_MIN,
    Ellipsoid,
    GeometryError,
    centroid,
    polygon_from_vertices,
)
from sepplan.separation import (
    SepKind,
    aux_count,
    jacobian_of,
    residual_of,
    sep_point_poly_reduced,
    sep_poly_poly,
    sep_poly_poly_fixed_component,
    sep_poly_poly_normalized,
)
from sepplan.verification import oracle_disjoint
from sepplan.witness import (
    witness_ell_ell,
    witness_poly_ell,
    witness_poly_poly,
)

rng = np.random.default_rng(7)


def random_polygon(center, n_verts=5, radius=1.0):
    # constant radius keeps the sampled vertices in convex position
    ang = np.sort(rng.uniform(0, 2 * np.pi, n_verts))
    r = radius * rng.uniform(0.5, 1.0)
    pts = np.vstack([r * np.cos(ang), r * np.sin(ang)]) + np.asarray(center)[:, None]
    return polygon_from_vertices(pts)


def random_ellipsoid(center, scale=1.0):
    M = rng.standard_normal((2, 2))
    E = (M @ M.T + 0.5 * np.eye(2)) / scale ** 2
    return Ellipsoid(E=E, e=np.asarray(center, dtype=float))


def random_pair(kind):
    c1 = rng.uniform(-3, 3, 2)
    c2 = c1 + rng.uniform(-3.5, 3.5, 2)
    if kind == "poly_poly":
        return random_polygon(c1), random_polygon(c2)
    if kind == "ell_ell":
        return random_ellipsoid(c1), random_ellipsoid(c2)
    return random_polygon(c1), random_ellipsoid(c2)


def test_aux_counts():
    assert aux_count(SepKind.POLY_POLY, 2) == 3
    assert aux_count(SepKind.ELL_ELL, 2) == 3
    assert aux_count(SepKind.POLY_ELL, 3) == 4
    assert aux_count(SepKind.POINT_POLY, 2) == 3
    assert aux_count(SepKind.POINT_POLY_REDUCED, 2) == 2
    assert aux_count(SepKind.POLY_POLY_NORMALIZED, 2) == 2
    assert aux_count(SepKind.POLY_POLY_FIXED_COMPONENT, 2) == 2
    with pytest.raises(GeometryError):
        aux_count(SepKind.POLY_POLY_FIXED_COMPONENT, 3)


def test_witness_agrees_with_oracle_poly_poly():
    agree = 0
    skipped = 0
    for _ in range(150):
        p1, p2 = random_pair("poly_poly")
        verdict = oracle_disjoint(p1, p2)
        if abs(verdict.margin) < 1e-6:
            skipped += 1
            continue
        wit = witness_poly_poly(p1.V, p2.V)
        assert wit.feasible == verdict.disjoint
        if wit.feasible:
            res = sep_poly_poly(p1.V, p2.V, wit.lam, wit.mu)
            assert res.max() <= 1e-7
        agree += 1
    assert agree >= 100  # the sampler must actually produce decisive pairs


def test_witness_agrees_with_oracle_ell_ell():
    for _ in range(100):
        e1, e2 = random_pair("ell_ell")
        verdict = oracle_disjoint(e1, e2)
        if abs(verdict.margin) < 1e-6:
            continue
        wit = witness_ell_ell(e1, e2)
        assert wit.feasible == verdict.disjoint


def test_witness_agrees_with_oracle_poly_ell():
    for _ in range(100):
        p, e = random_pair("poly_ell")
        verdict = oracle_disjoint(p, e)
        if abs(verdict.margin) < 1e-6:
            continue
        wit = witness_poly_ell(p.V, e)
        assert wit.feasible == verdict.disjoint


def test_feasible_residual_implies_disjoint():
    """Soundness: any aux with residual <= 0 only happens for disjoint sets."""
    local = np.random.default_rng(11)
    hits = 0
    for trial in range(400):
        kind = ["poly_poly", "ell_ell", "poly_ell"][trial % 3]
        a, b = random_pair(kind)
        if trial % 2 == 0:
            lam = local.standard_normal(2)
            mu = local.standard_normal()
        else:
            # aim along the centroid axis so disjoint pairs actually certify
            d = centroid(a) - centroid(b)
            sign = -1.0 if kind == "ell_ell" else 1.0  # ellipsoid-first sits below
            lam = sign * d / max(np.linalg.norm(d), 1e-9)
            lam = lam + 0.1 * local.standard_normal(2)
            mu = lam @ (centroid(a) + centroid(b)) / 2.0
        sk = {"poly_poly": SepKind.POLY_POLY, "ell_ell": SepKind.ELL_ELL,
              "poly_ell": SepKind.POLY_ELL}[kind]
        first = a.V if kind != "ell_ell" else a
        second = b if kind != "poly_poly" else b.V
        res = residual_of(sk, first, second, np.append(lam, mu))
        if res.max() <= 0.0:
            assert oracle_disjoint(a, b).disjoint
            hits += 1
    # the aimed planes should separate genuinely disjoint pairs often
    assert hits >= 20


def test_guard_row_rejects_tiny_normals():
    p1, p2 = random_pair("poly_poly")
    res = sep_poly_poly(p1.V, p2.V, np.array([1e-4, 0.0]), 0.0)
    assert res[-1] > 0.0  # guard row active
    res = sep_poly_poly(p1.V, p2.V, np.array([1.0, 0.0]), 0.0)
    assert res[-1] <= 0.0
    assert res[-1] == pytest.approx(LAMBDA_MIN ** 2 - 1.0)


def test_side_convention_poly_poly():
    left = polygon_from_vertices(np.array([[-2.0, -1.0, -1.5], [0.0, 0.0, 1.0]]))
    right = polygon_from_vertices(np.array([[1.0, 2.0, 1.5], [0.0, 0.0, 1.0]]))
    lam = np.array([-1.0, 0.0])  # points toward the left body
    res = sep_poly_poly(left.V, right.V, lam, mu=0.5)
    assert res.max() <= 0.0  # body on the >= side
    res_flip = sep_poly_poly(right.V, left.V, lam, mu=0.5)
    assert res_flip.max() > 0.0


def test_reduced_and_normalized_are_sufficient():
    """Feasibility of the cheaper variants still certifies disjointness."""
    for _ in range(200):
        p1, p2 = random_pair("poly_poly")
        lam = rng.standard_normal(2)
        if sep_poly_poly_normalized(p1.V, p2.V, lam).max() <= 0.0:
            assert oracle_disjoint(p1, p2).disjoint
        p = rng.uniform(-4, 4, 2)
        if sep_point_poly_reduced(p, p2.V, lam).max() <= 0.0:
            assert not p2.contains(p[:, None]).any()


def test_fixed_component_pins_normal():
    # plane with normal (t, 1): separates sets stacked vertically, but the
    # guard insists on t != 0 (the free component is the normalizer)
    low = polygon_from_vertices(np.array([[0.0, 1.0, 0.5], [0.0, 0.0, 0.5]]))
    high = polygon_from_vertices(np.array([[0.0, 1.0, 0.5], [2.0, 2.0, 2.5]]))
    res = sep_poly_poly_fixed_component(high.V, low.V, lam_free=0.0, mu=1.0)
    assert res[:-1].max() <= 0.0 and res[-1] > 0.0
    res = sep_poly_poly_fixed_component(high.V, low.V, lam_free=0.01, mu=1.0)
    assert res.max() <= 0.0
    # a gap in x alone is not enough to defeat it: a steep tilt still works
    left = polygon_from_vertices(np.array([[-2.0, -1.0, -1.5], [0.0, 0.0, 1.0]]))
    right = polygon_from_vertices(np.array([[1.0, 2.0, 1.5], [0.0, 0.0, 1.0]]))
    res = sep_poly_poly_fixed_component(right.V, left.V, lam_free=50.0, mu=0.0)
    assert res.max() <= 0.0
    # but when the only weak separator is exactly vertical (shared edge),
    # no (t, mu) works: the shared vertices force mu = t and mu = t + 1
    touch_l = polygon_from_vertices(np.array([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]))
    touch_r = polygon_from_vertices(np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 1.0]]))
    worst = min(
        sep_poly_poly_fixed_component(touch_l.V, touch_r.V, t, mu).max()
        for t in np.linspace(-50, 50, 501)
        for mu in np.linspace(-50, 50, 101)
    )
    assert worst > 0.0
    # while the free-normal residual admits the touching certificate
    res = sep_poly_poly(touch_r.V, touch_l.V, np.array([1.0, 0.0]), mu=1.0)
    assert res.max() <= 0.0


@pytest.mark.parametrize("kind", [
    SepKind.POLY_POLY, SepKind.ELL_ELL, SepKind.POLY_ELL, SepKind.POINT_POLY,
    SepKind.POINT_POLY_REDUCED, SepKind.POLY_POLY_NORMALIZED,
    SepKind.POLY_POLY_FIXED_COMPONENT,
])
def test_jacobians_match_fd(kind):
    h = 1e-6
    for _ in range(50):
        if kind in (SepKind.ELL_ELL,):
            first, second = random_pair("ell_ell")
        elif kind is SepKind.POLY_ELL:
            p, e = random_pair("poly_ell")
            first, second = p.V, e
        elif kind in (SepKind.POINT_POLY, SepKind.POINT_POLY_REDUCED):
            first = rng.uniform(-4, 4, 2)
            second = random_polygon(rng.uniform(-3, 3, 2)).V
        else:
            p1, p2 = random_pair("poly_poly")
            first, second = p1.V, p2.V
        na = aux_count(kind, 2)
        aux = rng.standard_normal(na)
        if kind is not SepKind.POLY_POLY_FIXED_COMPONENT:
            aux[:2] += np.sign(aux[:2]) * 0.2  # keep |lam| off zero
        J = jacobian_of(kind, first, second, aux)
        for i in range(na):
            d = np.zeros(na)
            d[i] = h
            fd = (residual_of(kind, first, second, aux + d)
                  - residual_of(kind, first, second, aux - d)) / (2 * h)
            err = np.abs(fd - J[:, i]).max()
            assert err < 1e-6 * max(1.0, np.abs(fd).max()), (kind, i, err)
