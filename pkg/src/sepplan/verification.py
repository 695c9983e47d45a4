"""Formulation-independent collision oracles and trajectory certification.

These routines never look at separating-plane or dual-multiplier variables;
they decide disjointness/containment from the set geometry alone, so they
can arbitrate the differentiable constraint formulations.

Conventions: all sets are closed; touching counts as disjoint. Verdict
margins are signed (positive = clearance, negative = penetration). For
planar polytopes the positive margin is the exact Euclidean gap; penetration
magnitudes and ellipsoid overlap depths are consistent proxies that vanish
exactly at touching contact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq, linprog

from .dynamics import joint_angle_residual, model_deriv, rk4_step
from .geometry import (
    ConvexSet,
    Ellipsoid,
    GeometryError,
    Hyperplane,
    Polytope,
    ellipsoid_boundary,
    ellipsoid_support,
)

# Verdict boundary: |t| below this counts as touching (hence disjoint).
_TOUCH_TOL = 1e-9


@dataclass
class OracleVerdict:
    """Outcome of a disjointness query."""

    disjoint: bool
    margin: float
    witness_plane: Optional[Hyperplane] = None
    witness_point: Optional[np.ndarray] = None


@dataclass
class ContainmentVerdict:
    contained: bool
    worst_violation: float
    witness_point: Optional[np.ndarray] = None


def _ordered_vertices_2d(V: np.ndarray) -> np.ndarray:
    c = V.mean(axis=1)
    order = np.argsort(np.arctan2(V[1] - c[1], V[0] - c[0]))
    return V[:, order]


def _point_segment_closest(q: np.ndarray, p0: np.ndarray, p1: np.ndarray):
    d = p1 - p0
    denom = d @ d
    t = 0.0 if denom < 1e-16 else float(np.clip((q - p0) @ d / denom, 0.0, 1.0))
    c = p0 + t * d
    return c, float(np.linalg.norm(q - c))


def _poly_closest_point(poly: Polytope, q: np.ndarray) -> np.ndarray:
    """Closest point of a planar polytope to q."""
    if poly.contains(q[:, None]).all():
        return q.copy()
    V = _ordered_vertices_2d(poly.V)
    m = V.shape[1]
    best, best_d = None, np.inf
    for i in range(m):
        c, d = _point_segment_closest(q, V[:, i], V[:, (i + 1) % m])
        if d < best_d:
            best, best_d = c, d
    return best


def _ellipsoid_closest_point(ell: Ellipsoid, q: np.ndarray) -> np.ndarray:
    """Exact projection of q onto the ellipsoid via the secular equation."""
    lvl = float(ell.level(q[:, None])[0])
    if lvl <= 1.0:
        return q.copy()
    w, U = np.linalg.eigh(ell.E)
    z = U.T @ (q - ell.e)

    def phi(nu: float) -> float:
        return float(np.sum(w * z ** 2 / (1.0 + nu * w) ** 2) - 1.0)

    hi = 1.0
    while phi(hi) > 0.0:
        hi *= 4.0
        if hi > 1e18:
            raise GeometryError("projection secular equation failed to bracket")
    nu = brentq(phi, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return ell.e + U @ (z / (1.0 + nu * w))


def _min_quadratic_over_ellipsoid(e1, E1, ell2: Ellipsoid) -> np.ndarray:
    """argmin of (q-e1)^T E1 (q-e1) over q in ell2 (secular path)."""
    if float(ell2.level(e1[:, None])[0]) <= 1.0:
        return e1.copy()

    def point(nu: float) -> np.ndarray:
        return np.linalg.solve(E1 + nu * ell2.E, E1 @ e1 + nu * (ell2.E @ ell2.e))

    def phi(nu: float) -> float:
        return float(ell2.level(point(nu)[:, None])[0]) - 1.0

    hi = 1.0
    while phi(hi) > 0.0:
        hi *= 4.0
        if hi > 1e18:
            raise GeometryError("containment secular equation failed to bracket")
    nu = brentq(phi, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return point(nu)


def _alternating_closest_pair(project_a, project_b, start: np.ndarray,
                              max_iter: int = 800, tol: float = 1e-14):
    """Cheney-Goldstein alternating projections between two convex sets."""
    q = start.copy()
    p = project_a(q)
    for _ in range(max_iter):
        q_new = project_b(p)
        p_new = project_a(q_new)
        move = max(np.linalg.norm(q_new - q), np.linalg.norm(p_new - p))
        p, q = p_new, q_new
        if move < tol:
            break
    return p, q


def _plane_between(p: np.ndarray, q: np.ndarray) -> Optional[Hyperplane]:
    """Separating plane through the midpoint of a closest pair (p in set 1)."""
    d = p - q
    nrm = np.linalg.norm(d)
    if nrm < 1e-12:
        return None
    lam = d / nrm
    return Hyperplane(lam=lam, mu=float(lam @ (p + q) / 2.0))


def _normalized_rows(A: np.ndarray, b: np.ndarray):
    norms = np.linalg.norm(A, axis=1)
    return A / norms[:, None], b / norms


def _poly_poly_inflation(p1: Polytope, p2: Polytope) -> tuple[float, np.ndarray]:
    """Largest symmetric deflation t with a common point (Chebyshev-style LP).

    t > 0: interiors overlap and the returned point is strictly inside both;
    t = 0: touching; t < 0: disjoint (|t| is an inflation needed to touch).
    """
    A1, b1 = _normalized_rows(p1.A, p1.b)
    A2, b2 = _normalized_rows(p2.A, p2.b)
    n = p1.n_dim
    A_ub = np.hstack([np.vstack([A1, A2]),
                      np.ones((A1.shape[0] + A2.shape[0], 1))])
    res = linprog(c=np.r_[np.zeros(n), -1.0], A_ub=A_ub,
                  b_ub=np.concatenate([b1, b2]),
                  bounds=[(None, None)] * (n + 1), method="highs")
    if not res.success:
        raise GeometryError(f"inflation LP failed: {res.message}")
    return float(res.x[n]), res.x[:n]


def _poly_poly_distance_2d(p1: Polytope, p2: Polytope):
    """Exact planar gap and a realizing closest pair (disjoint sets)."""
    best = (np.inf, None, None)
    for a, bset in ((p1, p2), (p2, p1)):
        for i in range(a.n_vertices):
            v = a.V[:, i]
            c = _poly_closest_point(bset, v)
            d = float(np.linalg.norm(v - c))
            if d < best[0]:
                best = (d, v, c) if a is p1 else (d, c, v)
    return best


def oracle_disjoint(s1: ConvexSet, s2: ConvexSet) -> OracleVerdict:
    """Decide disjointness of two closed convex sets (touching = disjoint)."""
    if s1.n_dim != s2.n_dim:
        raise GeometryError("operands live in different dimensions")
    if isinstance(s1, Polytope) and isinstance(s2, Polytope):
        return _oracle_poly_poly(s1, s2)
    if isinstance(s1, Ellipsoid) and isinstance(s2, Ellipsoid):
        return _oracle_ell_ell(s1, s2)
    if isinstance(s1, Polytope) and isinstance(s2, Ellipsoid):
        return _oracle_poly_ell(s1, s2)
    if isinstance(s1, Ellipsoid) and isinstance(s2, Polytope):
        v = _oracle_poly_ell(s2, s1)
        if v.witness_plane is not None:
            v.witness_plane = Hyperplane(lam=-v.witness_plane.lam,
                                         mu=-v.witness_plane.mu)
        return v
    raise GeometryError(
        f"unsupported operand types {type(s1).__name__}/{type(s2).__name__}")


def _oracle_poly_poly(p1: Polytope, p2: Polytope) -> OracleVerdict:
    t, x = _poly_poly_inflation(p1, p2)
    if t > _TOUCH_TOL:
        return OracleVerdict(disjoint=False, margin=-t, witness_point=x)
    if p1.n_dim == 2:
        d, a, b = _poly_poly_distance_2d(p1, p2)
        plane = _plane_between(a, b)
    else:
        d, plane = -t, None
    return OracleVerdict(disjoint=True, margin=float(d), witness_plane=plane)


def _ell_depth_proxy(e1: Ellipsoid, e2: Ellipsoid, q: np.ndarray) -> float:
    """Contact-consistent overlap depth estimate of e1's boundary past q."""
    lvl = max(float(e1.level(q[:, None])[0]), 0.0)
    lam_max = float(np.linalg.eigvalsh(e1.E)[-1])
    return (1.0 - np.sqrt(lvl)) / np.sqrt(lam_max)


def _oracle_ell_ell(e1: Ellipsoid, e2: Ellipsoid) -> OracleVerdict:
    q12 = _min_quadratic_over_ellipsoid(e1.e, e1.E, e2)
    lvl = float(e1.level(q12[:, None])[0])
    if lvl <= 1.0 + _TOUCH_TOL and lvl < 1.0 - _TOUCH_TOL:
        q21 = _min_quadratic_over_ellipsoid(e2.e, e2.E, e1)
        depth = max(_ell_depth_proxy(e1, e2, q12),
                    _ell_depth_proxy(e2, e1, q21))
        return OracleVerdict(disjoint=False, margin=-max(depth, 0.0),
                             witness_point=q12)
    if lvl <= 1.0 + _TOUCH_TOL:
        # touching within tolerance
        return OracleVerdict(disjoint=True, margin=0.0,
                             witness_plane=None, witness_point=q12)
    p, q = _alternating_closest_pair(
        lambda x: _ellipsoid_closest_point(e1, x),
        lambda x: _ellipsoid_closest_point(e2, x),
        start=e2.e)
    d = float(np.linalg.norm(p - q))
    return OracleVerdict(disjoint=True, margin=d, witness_plane=_plane_between(p, q))


def _min_ell_level_over_polygon(poly: Polytope, ell: Ellipsoid):
    """Exact min of the ellipsoid level over a planar polytope."""
    if poly.contains(ell.e[:, None]).all():
        return 0.0, ell.e.copy()
    V = _ordered_vertices_2d(poly.V)
    m = V.shape[1]
    best_val, best_pt = np.inf, None
    for i in range(m):
        p0, p1 = V[:, i], V[:, (i + 1) % m]
        d = p1 - p0
        # level(p0 + t d) is quadratic in t: minimize on [0, 1]
        Ed = ell.E @ d
        a = d @ Ed
        r0 = p0 - ell.e
        bq = 2.0 * (r0 @ Ed)
        t = 0.0 if a < 1e-16 else float(np.clip(-bq / (2.0 * a), 0.0, 1.0))
        for tc in {0.0, t, 1.0}:
            pt = p0 + tc * d
            val = float(ell.level(pt[:, None])[0])
            if val < best_val:
                best_val, best_pt = val, pt
    return best_val, best_pt


def _oracle_poly_ell(poly: Polytope, ell: Ellipsoid) -> OracleVerdict:
    if poly.n_dim != 2:
        raise GeometryError("polytope/ellipsoid oracle is planar only")
    lvl, pt = _min_ell_level_over_polygon(poly, ell)
    if lvl < 1.0 - _TOUCH_TOL:
        lam_max = float(np.linalg.eigvalsh(ell.E)[-1])
        depth = (1.0 - np.sqrt(max(lvl, 0.0))) / np.sqrt(lam_max)
        return OracleVerdict(disjoint=False, margin=-depth, witness_point=pt)
    if lvl <= 1.0 + _TOUCH_TOL:
        return OracleVerdict(disjoint=True, margin=0.0, witness_point=pt)
    p, q = _alternating_closest_pair(
        lambda x: _poly_closest_point(poly, x),
        lambda x: _ellipsoid_closest_point(ell, x),
        start=ell.e)
    d = float(np.linalg.norm(p - q))
    return OracleVerdict(disjoint=True, margin=d, witness_plane=_plane_between(p, q))


def oracle_contained(inner: ConvexSet, outer: ConvexSet,
                     tol: float = 1e-6, n_samples: int = 10000) -> ContainmentVerdict:
    """Decide inner ⊆ outer.

    Polytope inner: exact vertex check. Ellipsoid inner: dense boundary
    sampling plus a support check per outer face when the outer set is a
    polytope.
    """
    if inner.n_dim != outer.n_dim:
        raise GeometryError("operands live in different dimensions")
    if isinstance(inner, Polytope):
        pts = inner.V
    elif isinstance(inner, Ellipsoid):
        pts = ellipsoid_boundary(inner, n_samples)
    else:
        raise GeometryError(f"unsupported inner type {type(inner).__name__}")

    if isinstance(outer, Polytope):
        viol = outer.A @ pts - outer.b[:, None]
        worst = float(viol.max())
        idx = np.unravel_index(np.argmax(viol), viol.shape)[1]
        if isinstance(inner, Ellipsoid):
            # exact per-face support values dominate the sampling
            sup = np.array([ellipsoid_support(inner, outer.A[f])
                            for f in range(outer.n_faces)]) - outer.b
            worst = max(worst, float(sup.max()))
    elif isinstance(outer, Ellipsoid):
        lvl = outer.level(pts) - 1.0
        worst = float(lvl.max())
        idx = int(np.argmax(lvl))
    else:
        raise GeometryError(f"unsupported outer type {type(outer).__name__}")
    witness = pts[:, idx] if worst > tol else None
    return ContainmentVerdict(contained=worst <= tol,
                              worst_violation=worst, witness_point=witness)


@dataclass
class Violation:
    step: int
    kind: str
    magnitude: float
    detail: str


@dataclass
class CertificationReport:
    passed: bool
    violations: List[Violation] = field(default_factory=list)
    n_steps: int = 0
    max_defect: float = 0.0
    min_obstacle_margin: float = np.inf
    max_canvas_violation: float = -np.inf

    def to_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "n_steps": int(self.n_steps),
            "max_defect": float(self.max_defect),
            "min_obstacle_margin": (None if not np.isfinite(self.min_obstacle_margin)
                                    else float(self.min_obstacle_margin)),
            "max_canvas_violation": (None if not np.isfinite(self.max_canvas_violation)
                                     else float(self.max_canvas_violation)),
            "violations": [
                {"step": v.step, "kind": v.kind,
                 "magnitude": float(v.magnitude), "detail": v.detail}
                for v in self.violations
            ],
        }


def certify_trajectory(scenario, states: np.ndarray, controls: np.ndarray,
                       tf: float, tol: float = 1e-6) -> CertificationReport:
    """Check a discrete trajectory against every scenario requirement.

    Verifies, at every step: body parts disjoint from every obstacle (at its
    step pose), body parts contained in every canvas part, dynamics defects
    under one RK4 step, state/input boxes, the articulation bound, and the
    boundary states. Entirely independent of how the trajectory was found.
    """
    from .ocp import body_world_set, obstacle_world_set  # no import cycle: ocp never imports this module

    states = np.asarray(states, dtype=float)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    model = scenario.model
    nx = model.n_states
    k_f = scenario.k_f
    rep = CertificationReport(passed=True, n_steps=k_f + 1)
    if states.shape != (k_f + 1, nx):
        raise GeometryError(
            f"states must have shape ({k_f + 1}, {nx}), got {states.shape}")
    if controls.shape != (k_f, 2):
        raise GeometryError(
            f"controls must have shape ({k_f}, 2), got {controls.shape}")
    if not (np.isfinite(states).all() and np.isfinite(controls).all()
            and np.isfinite(tf) and tf > 0):
        raise GeometryError("trajectory data must be finite with tf > 0")

    def add(step, kind, mag, detail):
        rep.violations.append(Violation(step, kind, float(mag), detail))
        rep.passed = False

    # boundary states
    start = scenario.start.as_array(model.has_trailer)
    goal = scenario.goal.as_array(model.has_trailer)
    d0 = float(np.abs(states[0] - start).max())
    d1 = float(np.abs(states[-1] - goal).max())
    if d0 > tol:
        add(0, "boundary", d0, "initial state mismatch")
    if d1 > tol:
        add(k_f, "boundary", d1, "final state mismatch")

    # dynamics defects
    deriv = model_deriv(model)
    h = (1.0 / k_f) if scenario.free_time else (tf / k_f)
    scale = tf if scenario.free_time else None
    pred = rk4_step(deriv, states[:-1], controls, h, model, tf_scale=scale)
    defects = np.abs(states[1:] - pred)
    rep.max_defect = float(defects.max())
    for k in np.nonzero(defects.max(axis=1) > tol)[0]:
        add(int(k), "defect", float(defects[k].max()),
            f"integration defect at step {k}->{k + 1}")

    # state and input boxes
    lo, up = model.state_lower(), model.state_upper()
    box_tol = 1e-9
    for k in range(k_f + 1):
        over = np.maximum(states[k] - up, lo - states[k]).max()
        if over > box_tol:
            add(k, "state_bounds", float(over), "state box violated")
    ulo, uup = model.input_lower(), model.input_upper()
    for k in range(k_f):
        over = np.maximum(controls[k] - uup, ulo - controls[k]).max()
        if over > box_tol:
            add(k, "input_bounds", float(over), "input box violated")

    # articulation bound
    if model.has_trailer and model.joint_angle_bound is not None:
        r = joint_angle_residual(states, model.joint_angle_bound)
        worst = r.max(axis=1)
        for k in np.nonzero(worst > tol)[0]:
            add(int(k), "joint_angle", float(worst[k]),
                "articulation angle bound violated")

    # collision and containment, every step
    for k in range(k_f + 1):
        for bi, part in enumerate(scenario.body_parts):
            body = body_world_set(part, states[k])
            for oi, obs in enumerate(scenario.obstacles):
                verdict = oracle_disjoint(body, obstacle_world_set(obs, k))
                rep.min_obstacle_margin = min(rep.min_obstacle_margin,
                                              verdict.margin)
                if (not verdict.disjoint) and verdict.margin < -tol:
                    add(k, "collision", verdict.margin,
                        f"body part {bi} intersects obstacle {oi}")
            for wi, canvas in enumerate(scenario.canvas):
                cv = oracle_contained(body, canvas, tol=tol)
                rep.max_canvas_violation = max(rep.max_canvas_violation,
                                               cv.worst_violation)
                if not cv.contained:
                    add(k, "containment", cv.worst_violation,
                        f"body part {bi} leaves canvas part {wi}")
    return rep
