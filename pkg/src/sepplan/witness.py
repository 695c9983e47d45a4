"""Feasibility searches over the constraint formulations' own variables.

Each search answers: do the differentiable residuals of a given kind admit a
feasible point (residuals <= 0) for this set pair? They return a concrete
witness when one exists, so tests can cross-validate the formulations
against the geometric oracles in both directions. Polytope searches are
exact LPs; ellipsoid searches scan the compact set of unit normals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .baseline_dual import dual_sep_poly_poly
from .containment import FactorizationError, g_matrix, psd_cholesky
from .geometry import LAMBDA_MIN, Ellipsoid, GeometryError, Polytope, ellipsoid_support


@dataclass
class WitnessResult:
    feasible: bool
    margin: float
    lam: Optional[np.ndarray] = None
    mu: Optional[float] = None


def witness_poly_poly(V1: np.ndarray, V2: np.ndarray,
                      feas_tol: float = 0.0) -> WitnessResult:
    """Max-margin separating plane for vertex sets (exact LP).

    Margin is measured under the ||lam||_inf = 1 normalization; its sign
    decides feasibility of the plane residuals (0 = touching, allowed).
    The normalization is enforced by pinning one normal component to +-1
    per subproblem (best of 2n pins wins); without a pin the zero plane
    is always LP-feasible and overlap would never report a negative
    margin.
    """
    V1 = np.asarray(V1, dtype=float)
    V2 = np.asarray(V2, dtype=float)
    n = V1.shape[0]
    n1, n2 = V1.shape[1], V2.shape[1]
    # variables: (lam, mu, t); maximize t
    A_ub = np.zeros((n1 + n2, n + 2))
    A_ub[:n1, :n] = -V1.T
    A_ub[:n1, n] = 1.0
    A_ub[:n1, n + 1] = 1.0
    A_ub[n1:, :n] = V2.T
    A_ub[n1:, n] = -1.0
    A_ub[n1:, n + 1] = 1.0
    span = max(1.0, float(np.abs(V1).max() + np.abs(V2).max()))
    box = (-10.0 * span, 10.0 * span)
    best = None
    for i in range(n):
        for sign in (1.0, -1.0):
            bounds = ([(-1.0, 1.0)] * n) + [box, box]
            bounds[i] = (sign, sign)
            res = linprog(c=np.r_[np.zeros(n + 1), -1.0], A_ub=A_ub,
                          b_ub=np.zeros(n1 + n2), bounds=bounds,
                          method="highs")
            if not res.success:
                raise GeometryError(f"separation LP failed: {res.message}")
            if best is None or res.x[n + 1] > best[n + 1]:
                best = res.x
    t = float(best[n + 1])
    lam, mu = best[:n], float(best[n])
    if t >= -abs(feas_tol):
        nrm = np.linalg.norm(lam)  # >= 1 thanks to the pinned component
        lam, mu = lam / nrm, mu / nrm  # homogeneous scaling, keeps feasibility
        return WitnessResult(feasible=True, margin=t, lam=lam, mu=mu)
    return WitnessResult(feasible=False, margin=t)


def _scan_unit_normals(gap, n_coarse: int = 720):
    """Minimize a smooth gap over planar unit normals (scan plus refine)."""
    phis = np.linspace(0.0, 2.0 * np.pi, n_coarse, endpoint=False)
    vals = np.array([gap(p) for p in phis])
    i = int(np.argmin(vals))
    step = 2.0 * np.pi / n_coarse
    res = minimize_scalar(gap, bounds=(phis[i] - step, phis[i] + step),
                          method="bounded",
                          options={"xatol": 1e-12, "maxiter": 200})
    if res.fun < vals[i]:
        return float(res.x), float(res.fun)
    return float(phis[i]), float(vals[i])


def witness_ell_ell(ell1: Ellipsoid, ell2: Ellipsoid) -> WitnessResult:
    """Search a plane with ell1 on the <= side, ell2 on the >= side."""
    if ell1.n_dim != 2:
        raise GeometryError("ellipsoid witness scan is planar only")

    def gap(phi: float) -> float:
        lam = np.array([np.cos(phi), np.sin(phi)])
        hi = ellipsoid_support(ell1, lam)
        lo = lam @ ell2.e - np.sqrt(lam @ ell2.E_inv @ lam)
        return hi - lo

    phi, val = _scan_unit_normals(gap)
    lam = np.array([np.cos(phi), np.sin(phi)])
    mu = float(ellipsoid_support(ell1, lam))
    return WitnessResult(feasible=val <= 0.0, margin=-val, lam=lam, mu=mu)


def witness_poly_ell(V: np.ndarray, ell: Ellipsoid) -> WitnessResult:
    """Search a plane with conv(V) on the >= side, the ellipsoid below."""
    V = np.asarray(V, dtype=float)
    if V.shape[0] != 2:
        raise GeometryError("ellipsoid witness scan is planar only")

    def gap(phi: float) -> float:
        lam = np.array([np.cos(phi), np.sin(phi)])
        return float(ellipsoid_support(ell, lam) - (lam @ V).min())

    phi, val = _scan_unit_normals(gap)
    lam = np.array([np.cos(phi), np.sin(phi)])
    mu = float(ellipsoid_support(ell, lam))
    return WitnessResult(feasible=val <= 0.0, margin=-val, lam=lam, mu=mu)


def witness_dual_poly_poly(body: Polytope, obstacle: Polytope) -> WitnessResult:
    """Best-margin dual certificate via LP (inf-norm normalization).

    The margin sign matches the Euclidean-normalized certificate, so
    margin >= 0 decides feasibility of the dual residuals at margin 0.
    Returns multipliers rescaled to the exact ||A1^T lam|| = 1 row when
    possible.
    """
    n = body.n_dim
    nf1, nf2 = body.n_faces, obstacle.n_faces
    A_eq = np.hstack([body.A.T, obstacle.A.T])
    A_ub = np.hstack([np.vstack([body.A.T, -body.A.T]),
                      np.zeros((2 * n, nf2))])
    res = linprog(c=np.concatenate([body.b, obstacle.b]),
                  A_eq=A_eq, b_eq=np.zeros(n),
                  A_ub=A_ub, b_ub=np.ones(2 * n),
                  bounds=[(0.0, None)] * (nf1 + nf2), method="highs")
    if not res.success:
        raise GeometryError(f"dual certificate LP failed: {res.message}")
    margin = -float(res.fun)
    lam, mu = res.x[:nf1], res.x[nf1:]
    w = body.A.T @ lam
    nrm = float(np.linalg.norm(w))
    if margin >= 0.0 and nrm > 1e-12:
        lam, mu = lam / nrm, mu / nrm
        check = dual_sep_poly_poly(body, obstacle, lam, mu)
        ok = (np.abs(check.eq).max() <= 1e-7) and (check.ineq.max() <= 1e-7)
        return WitnessResult(feasible=ok, margin=margin, lam=lam, mu=mu)
    return WitnessResult(feasible=False, margin=margin)


def witness_contain_ell_in_ell(inner: Ellipsoid, outer: Ellipsoid,
                               tol: float = 1e-9):
    """Search the scalar multiplier making the S-procedure matrix PSD.

    The smallest eigenvalue of G(lam) is concave in lam, so a coarse scan
    plus bounded refinement finds its maximizer.
    """

    def neg_min_eig(lam: float) -> float:
        return -float(np.linalg.eigvalsh(g_matrix(inner, outer, lam))[0])

    hi = 4.0
    while neg_min_eig(hi) < neg_min_eig(hi / 2.0) and hi < 1e9:
        hi *= 2.0
    grid = np.linspace(0.0, hi, 400)
    vals = np.array([neg_min_eig(g) for g in grid])
    i = int(np.argmin(vals))
    lo_b = grid[max(i - 1, 0)]
    hi_b = grid[min(i + 1, grid.shape[0] - 1)]
    res = minimize_scalar(neg_min_eig, bounds=(lo_b, hi_b), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 300})
    lam = float(res.x) if res.fun <= vals[i] else float(grid[i])
    best = -neg_min_eig(lam)
    if best < -tol:
        return False, lam, None
    G = g_matrix(inner, outer, lam)
    try:
        L = psd_cholesky(G, tol=max(tol, 1e-9))
    except FactorizationError:
        return False, lam, None
    return True, lam, L
