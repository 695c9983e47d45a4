"""Dual-multiplier collision constraints (face-form baseline) and the
per-block auxiliary-variable accounting shared by all formulations.

The dual certificate for two face-form polytopes {A1 s <= b1}, {A2 s <= b2}
is a nonnegative multiplier pair (lam, mu) with

    A1^T lam + A2^T mu = 0,     ||A1^T lam|| = 1,
    -b1^T lam - b2^T mu >= d_min  (margin, 0 here: touching allowed).

The norm row is kept as an equality: with the margin at zero, the zero
multiplier pair would otherwise satisfy everything regardless of collision.
"""

from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

from .geometry import ConvexSet, Ellipsoid, GeometryError, Polytope

DUAL_MARGIN = 0.0


class FormulationKind(enum.Enum):
    HYPERPLANE = "hyperplane"
    DUAL = "dual"
    FARKAS = "farkas"


class UnsupportedCombinationError(ValueError):
    """Formulation not defined for the given set-kind pair."""


def count_aux_variables(kind: FormulationKind, body: ConvexSet,
                        obstacle: ConvexSet, n_dim: int | None = None) -> int:
    """Auxiliary variables one (body, obstacle) pair needs per step.

    Hyperplane: N+1 regardless of set kinds. Dual: face multipliers for
    polytopes, N+1 per side for an ellipsoid pair, but only N for the
    ellipsoid in a mixed pair (its norm condition folds into the polytope
    side there). Farkas: face counts, polytopes only.
    """
    n = n_dim if n_dim is not None else body.n_dim
    if body.n_dim != obstacle.n_dim or body.n_dim != n:
        raise GeometryError("operand dimensions differ")
    for s in (body, obstacle):
        if not isinstance(s, (Polytope, Ellipsoid)):
            raise GeometryError(f"unsupported set type {type(s).__name__}")
    if kind is FormulationKind.HYPERPLANE:
        return n + 1
    if kind is FormulationKind.DUAL:
        if isinstance(body, Polytope) and isinstance(obstacle, Polytope):
            return body.n_faces + obstacle.n_faces
        if isinstance(body, Ellipsoid) and isinstance(obstacle, Ellipsoid):
            return 2 * (n + 1)
        poly = body if isinstance(body, Polytope) else obstacle
        return poly.n_faces + n
    if kind is FormulationKind.FARKAS:
        if isinstance(body, Polytope) and isinstance(obstacle, Polytope):
            return body.n_faces + obstacle.n_faces
        raise UnsupportedCombinationError(
            "farkas variables are defined for polytope pairs only")
    raise GeometryError(f"unknown formulation {kind}")


class DualResidual(NamedTuple):
    """eq rows must vanish, ineq rows must be <= 0; multipliers are >= 0
    by variable bounds (this helper also rejects negative inputs)."""

    eq: np.ndarray
    ineq: np.ndarray


def dual_sep_poly_poly(body: Polytope, obstacle: Polytope, lam, mu,
                       margin: float = DUAL_MARGIN) -> DualResidual:
    """Dual disjointness certificate residuals for two face-form polytopes.

    eq = [A1^T lam + A2^T mu (N rows), ||A1^T lam||^2 - 1]
    ineq = [margin + b1^T lam + b2^T mu]
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if lam.shape != (body.n_faces,):
        raise GeometryError(
            f"lam must have one entry per body face ({body.n_faces}), "
            f"got {lam.shape}")
    if mu.shape != (obstacle.n_faces,):
        raise GeometryError(
            f"mu must have one entry per obstacle face ({obstacle.n_faces}), "
            f"got {mu.shape}")
    if (lam < 0).any() or (mu < 0).any():
        raise GeometryError("dual multipliers must be nonnegative")
    w = body.A.T @ lam
    eq = np.concatenate([w + obstacle.A.T @ mu, [w @ w - 1.0]])
    ineq = np.array([margin + body.b @ lam + obstacle.b @ mu])
    return DualResidual(eq=eq, ineq=ineq)


def dual_sep_poly_poly_jac(body: Polytope, obstacle: Polytope, lam, mu):
    """Jacobians of (eq, ineq) w.r.t. [lam, mu]."""
    lam = np.asarray(lam, dtype=float)
    n = body.n_dim
    nf1, nf2 = body.n_faces, obstacle.n_faces
    J_eq = np.zeros((n + 1, nf1 + nf2))
    J_eq[:n, :nf1] = body.A.T
    J_eq[:n, nf1:] = obstacle.A.T
    J_eq[n, :nf1] = 2.0 * (body.A @ (body.A.T @ lam))
    J_ineq = np.concatenate([body.b, obstacle.b])[None, :]
    return J_eq, J_ineq
