"""Convex-set primitives: polytopes, ellipsoids, rigid poses, hyperplanes.

Sets live in R^N with N >= 2. A polytope carries both its face form
``A s <= b`` and its vertex matrix ``V`` (one vertex per column); the two
representations are validated against each other at construction time.
An ellipsoid is ``(s - e)^T E (s - e) <= 1`` with ``E`` symmetric positive
definite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# Construction-time consistency tolerance.
GEOM_TOL = 1e-7
# Smallest admissible separating-plane normal norm; keeps sqrt terms smooth.
LAMBDA_MIN = 1e-3
# Face counts beyond this are legal but condition the dual forms poorly.
_MANY_FACES = 64


class GeometryError(ValueError):
    """Malformed set, pose, or mismatched operands."""


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim != 2:
        raise GeometryError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _as_vector(x, name: str) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim != 1:
        raise GeometryError(f"{name} must be 1-D, got shape {a.shape}")
    return a


@dataclass
class Polytope:
    """Bounded convex polytope with joint face/vertex representation.

    Attributes
    ----------
    A : (n_faces, n) array
        Face normals, one per row.
    b : (n_faces,) array
        Face offsets; the set is ``{s : A s <= b}``.
    V : (n, n_vertices) array
        Vertices as columns. Every column must satisfy the face form.
    """

    A: np.ndarray
    b: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.A = _as_matrix(self.A, "A")
        self.b = _as_vector(self.b, "b")
        self.V = _as_matrix(self.V, "V")
        n = self.A.shape[1]
        if n < 2:
            raise GeometryError(f"polytope dimension must be >= 2, got {n}")
        if self.b.shape[0] != self.A.shape[0]:
            raise GeometryError(
                f"b has {self.b.shape[0]} entries for {self.A.shape[0]} faces")
        if self.V.shape[0] != n:
            raise GeometryError(
                f"vertex rows ({self.V.shape[0]}) != face columns ({n})")
        if self.A.shape[0] < n + 1:
            raise GeometryError(
                f"{self.A.shape[0]} faces cannot bound a polytope in R^{n}")
        if self.V.shape[1] < 1:
            raise GeometryError("polytope needs at least one vertex")
        if not (np.isfinite(self.A).all() and np.isfinite(self.b).all()
                and np.isfinite(self.V).all()):
            raise GeometryError("polytope data must be finite")
        slack = self.A @ self.V - self.b[:, None]
        worst = float(slack.max())
        if worst > GEOM_TOL:
            raise GeometryError(
                f"vertex/face forms disagree: a vertex violates a face by {worst:.3e}")
        if self.A.shape[0] > _MANY_FACES:
            warnings.warn(
                f"polytope with {self.A.shape[0]} faces; dual forms may "
                "condition poorly", stacklevel=2)

    @property
    def n_dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_faces(self) -> int:
        return self.A.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.V.shape[1]

    def contains(self, points: np.ndarray, tol: float = GEOM_TOL) -> np.ndarray:
        """Membership mask for points given as columns."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] != self.n_dim:
            pts = pts.T
        return (self.A @ pts - self.b[:, None] <= tol).all(axis=0)


@dataclass
class Ellipsoid:
    """Solid ellipsoid ``(s - e)^T E (s - e) <= 1``."""

    E: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        self.E = _as_matrix(self.E, "E")
        self.e = _as_vector(self.e, "e")
        n = self.E.shape[0]
        if n < 2 or self.E.shape[1] != n:
            raise GeometryError(f"E must be square with n >= 2, got {self.E.shape}")
        if self.e.shape[0] != n:
            raise GeometryError(
                f"center has {self.e.shape[0]} entries for E of size {n}")
        if not (np.isfinite(self.E).all() and np.isfinite(self.e).all()):
            raise GeometryError("ellipsoid data must be finite")
        if np.abs(self.E - self.E.T).max() > GEOM_TOL:
            raise GeometryError("E must be symmetric")
        self.E = 0.5 * (self.E + self.E.T)
        eigvals = np.linalg.eigvalsh(self.E)
        if eigvals[0] <= 0.0:
            raise GeometryError(
                f"E must be positive definite, min eigenvalue {eigvals[0]:.3e}")
        self._E_inv = np.linalg.inv(self.E)

    @property
    def n_dim(self) -> int:
        return self.E.shape[0]

    @property
    def E_inv(self) -> np.ndarray:
        return self._E_inv

    def level(self, points: np.ndarray) -> np.ndarray:
        """Quadratic level value per point column; <= 1 means inside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.ndim == 2 and pts.shape[0] != self.n_dim:
            pts = pts.T
        d = pts - self.e[:, None]
        return np.einsum("ik,ij,jk->k", d, self.E, d)

    def contains(self, points: np.ndarray, tol: float = GEOM_TOL) -> np.ndarray:
        return self.level(points) <= 1.0 + tol


ConvexSet = Union[Polytope, Ellipsoid]


@dataclass
class Pose:
    """Rigid transform: world point = rotation @ local + position."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        self.position = _as_vector(self.position, "position")
        self.rotation = _as_matrix(self.rotation, "rotation")
        n = self.position.shape[0]
        if self.rotation.shape != (n, n):
            raise GeometryError(
                f"rotation {self.rotation.shape} does not match position dim {n}")
        if not (np.isfinite(self.position).all() and np.isfinite(self.rotation).all()):
            raise GeometryError("pose data must be finite")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(n)).max()
        if err > 1e-6:
            raise GeometryError(f"rotation is not orthonormal (error {err:.3e})")
        if np.linalg.det(self.rotation) < 0.0:
            raise GeometryError("rotation must be proper (det +1)")

    @classmethod
    def planar(cls, x: float, y: float, theta: float) -> "Pose":
        return cls(np.array([x, y], dtype=float), planar_rotation(theta))

    @property
    def n_dim(self) -> int:
        return self.position.shape[0]


@dataclass
class Hyperplane:
    """Oriented plane ``{s : lam^T s = mu}`` with a non-degenerate normal."""

    lam: np.ndarray
    mu: float

    def __post_init__(self):
        self.lam = _as_vector(self.lam, "lam")
        self.mu = float(self.mu)
        if not (np.isfinite(self.lam).all() and np.isfinite(self.mu)):
            raise GeometryError("hyperplane data must be finite")
        if np.linalg.norm(self.lam) < LAMBDA_MIN:
            raise GeometryError(
                f"plane normal norm {np.linalg.norm(self.lam):.3e} "
                f"below the {LAMBDA_MIN} guard")

    def side(self, points: np.ndarray) -> np.ndarray:
        """Signed evaluation lam^T s - mu per point column."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] != self.lam.shape[0]:
            pts = pts.T
        return self.lam @ pts - self.mu


def planar_rotation(theta) -> np.ndarray:
    """2-D rotation matrix; batches over a leading angle axis."""
    c, s = np.cos(theta), np.sin(theta)
    out = np.array([[c, -s], [s, c]])
    return out if out.ndim == 2 else np.moveaxis(out, (0, 1), (-2, -1))


def planar_rotation_derivative(theta) -> np.ndarray:
    """d/dtheta of the 2-D rotation matrix; batches like planar_rotation."""
    c, s = np.cos(theta), np.sin(theta)
    out = np.array([[-s, -c], [c, -s]])
    return out if out.ndim == 2 else np.moveaxis(out, (0, 1), (-2, -1))


def transform_vertices(V0: np.ndarray, pose: Pose) -> np.ndarray:
    """Map local vertex columns through a rigid pose."""
    V0 = _as_matrix(V0, "V0")
    if V0.shape[0] != pose.n_dim:
        raise GeometryError(
            f"vertices in R^{V0.shape[0]} cannot take a pose in R^{pose.n_dim}")
    return pose.rotation @ V0 + pose.position[:, None]


def transform_polytope(poly: Polytope, pose: Pose) -> Polytope:
    """Rigidly displace a polytope, keeping both representations consistent.

    Face form: A (R^T (s - T)) <= b  ==>  (A R^T) s <= b + A R^T T.
    """
    if poly.n_dim != pose.n_dim:
        raise GeometryError("polytope/pose dimension mismatch")
    ART = poly.A @ pose.rotation.T
    return Polytope(A=ART, b=poly.b + ART @ pose.position,
                    V=transform_vertices(poly.V, pose))


def transform_ellipsoid(ell: Ellipsoid, pose: Pose) -> Ellipsoid:
    """Rigidly displace an ellipsoid: E -> R E R^T, e -> R e + T."""
    if ell.n_dim != pose.n_dim:
        raise GeometryError("ellipsoid/pose dimension mismatch")
    R = pose.rotation
    return Ellipsoid(E=R @ ell.E @ R.T, e=R @ ell.e + pose.position)


def centroid(s: ConvexSet) -> np.ndarray:
    """Vertex average for polytopes, center for ellipsoids."""
    if isinstance(s, Polytope):
        return s.V.mean(axis=1)
    if isinstance(s, Ellipsoid):
        return s.e.copy()
    raise GeometryError(f"unsupported set type {type(s).__name__}")


def ellipsoid_support(ell: Ellipsoid, lam: np.ndarray) -> float:
    """Support value max{lam^T s : s in ell} = sqrt(lam^T E^-1 lam) + lam^T e."""
    lam = _as_vector(lam, "lam")
    if lam.shape[0] != ell.n_dim:
        raise GeometryError(
            f"direction in R^{lam.shape[0]} for an ellipsoid in R^{ell.n_dim}")
    nrm = np.linalg.norm(lam)
    if not np.isfinite(nrm) or nrm < 1e-12:
        raise GeometryError("support direction is numerically zero")
    return float(np.sqrt(lam @ ell.E_inv @ lam) + lam @ ell.e)


def ellipsoid_support_gradient(ell: Ellipsoid, lam: np.ndarray) -> np.ndarray:
    """Gradient of the support value w.r.t. lam: E^-1 lam / sqrt(.) + e."""
    lam = _as_vector(lam, "lam")
    nrm = np.linalg.norm(lam)
    if not np.isfinite(nrm) or nrm < 1e-12:
        raise GeometryError("support direction is numerically zero")
    Ei_lam = ell.E_inv @ lam
    return Ei_lam / np.sqrt(lam @ Ei_lam) + ell.e


def ellipsoid_support_point(ell: Ellipsoid, lam: np.ndarray) -> np.ndarray:
    """Boundary point attaining the support value in direction lam."""
    lam = _as_vector(lam, "lam")
    Ei_lam = ell.E_inv @ lam
    q = lam @ Ei_lam
    if q < 1e-24:
        raise GeometryError("support direction is numerically zero")
    return ell.e + Ei_lam / np.sqrt(q)


def ellipsoid_boundary(ell: Ellipsoid, n_points: int) -> np.ndarray:
    """Deterministic boundary sample, points as columns.

    Uses the angle grid in 2-D and a fixed-seed sphere sample otherwise.
    """
    n = ell.n_dim
    if n == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
        sphere = np.vstack([np.cos(ang), np.sin(ang)])
    else:
        rng = np.random.default_rng(0)
        raw = rng.standard_normal((n, n_points))
        sphere = raw / np.linalg.norm(raw, axis=0, keepdims=True)
    # Map the unit sphere through E^{-1/2}.
    w, U = np.linalg.eigh(ell.E)
    half_inv = U @ np.diag(1.0 / np.sqrt(w)) @ U.T
    return half_inv @ sphere + ell.e[:, None]


def polygon_from_vertices(V: np.ndarray) -> Polytope:
    """Build a 2-D polytope (both forms) from unordered convex-hull vertices."""
    V = _as_matrix(V, "V")
    if V.shape[0] != 2:
        raise GeometryError("polygon_from_vertices only supports R^2")
    if V.shape[1] < 3:
        raise GeometryError("need at least 3 vertices for a 2-D polytope")
    c = V.mean(axis=1)
    order = np.argsort(np.arctan2(V[1] - c[1], V[0] - c[0]))
    Vo = V[:, order]
    m = Vo.shape[1]
    rows, offs = [], []
    for i in range(m):
        p, q = Vo[:, i], Vo[:, (i + 1) % m]
        edge = q - p
        if np.linalg.norm(edge) < 1e-12:
            raise GeometryError("degenerate polygon edge")
        normal = np.array([edge[1], -edge[0]])  # outward for ccw ordering
        normal /= np.linalg.norm(normal)
        rows.append(normal)
        offs.append(normal @ p)
    return Polytope(A=np.array(rows), b=np.array(offs), V=Vo)


def box2d(xmin: float, xmax: float, ymin: float, ymax: float) -> Polytope:
    """Axis-aligned rectangle as a polytope."""
    if not (xmax > xmin and ymax > ymin):
        raise GeometryError("box bounds must have positive extent")
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = np.array([xmax, -xmin, ymax, -ymin])
    V = np.array([[xmax, xmax, xmin, xmin],
                  [ymax, ymin, ymin, ymax]])
    return Polytope(A=A, b=b, V=V)
