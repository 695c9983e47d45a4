"""Geometric warm starts for the transcribed avoidance NLPs.

The state path is seeded from a coarse curve (bezier-plus-line for parking
with an interim pose, a quartic lateral profile for fixed-horizon passing,
a straight line otherwise) and every auxiliary plane from simple geometry
around that path.  Every slice of the decision vector is written exactly
once; a gap is a bug and raises.
"""

from __future__ import annotations

import numpy as np

from .containment import ContainKind, g_matrix, psd_cholesky, tril_pack, FactorizationError
from .geometry import LAMBDA_MIN, centroid
from .ocp import NlpProblem, Scenario, body_world_set, obstacle_world_set
from .separation import SepKind


class InitializationError(RuntimeError):
    pass


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _unwrap_mod_pi(raw, start):
    """Map tangent angles (defined mod pi) to a continuous yaw profile.

    Each raw angle is shifted by a multiple of pi so the result stays as
    close as possible to its predecessor; the chain starts at ``start``.
    This keeps yaw smooth across direction reversals.
    """
    out = np.empty_like(raw)
    prev = start
    for i, a in enumerate(raw):
        k = np.round((prev - a) / np.pi)
        out[i] = a + k * np.pi
        prev = out[i]
    return out


def _resample_by_arc(dense, n):
    """Pick n points at equal arc-length fractions plus unit tangents."""
    seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total < 1e-12:
        pts = np.repeat(dense[:1], n, axis=0)
        tang = np.tile(np.array([1.0, 0.0]), (n, 1))
        return pts, tang, 0.0
    targets = np.linspace(0.0, total, n)
    x = np.interp(targets, s, dense[:, 0])
    y = np.interp(targets, s, dense[:, 1])
    pts = np.stack([x, y], axis=1)
    # tangent from the dense curve at the matched parameter
    idx = np.clip(np.searchsorted(s, targets), 1, len(s) - 1)
    t = dense[idx] - dense[idx - 1]
    norms = np.linalg.norm(t, axis=1)
    norms[norms < 1e-12] = 1.0
    return pts, t / norms[:, None], total


def parking_path_guess(start_xy, heading, interim_xy, goal_xy, n_steps):
    """Bezier arc to the interim point, then a straight reversing leg.

    Returns (positions (n+1, 2), tangents (n+1, 2), arc_length).
    """
    start_xy = np.asarray(start_xy, dtype=float)
    interim_xy = np.asarray(interim_xy, dtype=float)
    goal_xy = np.asarray(goal_xy, dtype=float)
    h = np.array([np.cos(heading), np.sin(heading)])
    p1 = start_xy + 0.5 * np.linalg.norm(interim_xy - start_xy) * h
    u = np.linspace(0.0, 1.0, 1001)[:, None]
    bez = (1 - u) ** 2 * start_xy + 2 * u * (1 - u) * p1 + u**2 * interim_xy
    v = np.linspace(0.0, 1.0, 501)[1:, None]
    line = (1 - v) * interim_xy + v * goal_xy
    dense = np.vstack([bez, line])
    return _resample_by_arc(dense, n_steps + 1)


def quartic_path_guess(start_xy, theta0, goal_xy, theta1, n_steps):
    """Quartic lateral offset in the chord frame between the endpoints.

    The midpoint offset is the sagitta of the circular arc implied by the
    mean approach angle, which keeps the seed close to the smooth swerve
    the endpoint headings suggest.
    """
    start_xy = np.asarray(start_xy, dtype=float)
    goal_xy = np.asarray(goal_xy, dtype=float)
    d = goal_xy - start_xy
    c = np.linalg.norm(d)
    if c < 1e-9:
        pts = np.repeat(start_xy[None, :], n_steps + 1, axis=0)
        return pts, np.tile(np.array([1.0, 0.0]), (n_steps + 1, 1)), 0.0
    beta = np.arctan2(d[1], d[0])
    a0 = _wrap_angle(theta0 - beta)
    a1 = _wrap_angle(beta - theta1)
    if max(abs(a0), abs(a1)) > np.deg2rad(80.0):
        # too steep for a graph over the chord; fall back to the chord
        dense = np.linspace(0.0, 1.0, 2001)[:, None] * d + start_xy
        return _resample_by_arc(dense, n_steps + 1)
    sag = 0.5 * c * np.tan(0.25 * (a0 + a1))
    # y(0)=0 and y'(0)=tan a0 are free; solve the remaining three conditions
    M = np.array(
        [
            [c**4, c**3, c**2],
            [4 * c**3, 3 * c**2, 2 * c],
            [c**4 / 16.0, c**3 / 8.0, c**2 / 4.0],
        ]
    )
    rhs = np.array(
        [
            -np.tan(a0) * c,
            -np.tan(a1) - np.tan(a0),
            sag - np.tan(a0) * c / 2.0,
        ]
    )
    q4, q3, q2 = np.linalg.solve(M, rhs)
    xs = np.linspace(0.0, c, 2001)
    ys = q4 * xs**4 + q3 * xs**3 + q2 * xs**2 + np.tan(a0) * xs
    ca, sa = np.cos(beta), np.sin(beta)
    dense = np.stack([start_xy[0] + ca * xs - sa * ys, start_xy[1] + sa * xs + ca * ys], axis=1)
    return _resample_by_arc(dense, n_steps + 1)


def orthogonal_plane_guess(sample, obstacle_centroid, gamma):
    """Plane normal along the centroid-to-sample direction."""
    sample = np.asarray(sample, dtype=float)
    obstacle_centroid = np.asarray(obstacle_centroid, dtype=float)
    d = sample - obstacle_centroid
    n = np.linalg.norm(d)
    lam = d / n if n > 1e-9 else np.array([1.0, 0.0])
    mu = float(lam @ (gamma * sample + (1.0 - gamma) * obstacle_centroid))
    return lam, mu


def tangent_plane_guess(sample, heading, obstacle_centroid, gamma):
    """Plane parallel to the direction of travel, facing the sample."""
    sample = np.asarray(sample, dtype=float)
    obstacle_centroid = np.asarray(obstacle_centroid, dtype=float)
    lam = np.array([-np.sin(heading), np.cos(heading)])
    if lam @ (sample - obstacle_centroid) < 0.0:
        lam = -lam
    mu = float(lam @ (gamma * sample + (1.0 - gamma) * obstacle_centroid))
    return lam, mu


def _state_guess(scenario: Scenario):
    """Path-based seed: positions and yaw from a coarse path, rest zero.

    Speed is seeded linearly between the boundary speeds when the horizon
    is fixed; steering and the controls always start at zero.  Returns the
    state table, the zero control table, and the raw tangent angle used to
    orient plane guesses.
    """
    model = scenario.model
    kf = scenario.k_f
    x0 = scenario.start.as_array(model.has_trailer)
    xf = scenario.goal.as_array(model.has_trailer)
    p0, pf = x0[:2], xf[:2]
    if scenario.interim is not None:
        pts, tang, _ = parking_path_guess(p0, x0[2], scenario.interim, pf, kf)
        raw = np.arctan2(tang[:, 1], tang[:, 0])
        yaw = _unwrap_mod_pi(raw, x0[2])
    elif not scenario.free_time:
        pts, tang, _ = quartic_path_guess(p0, x0[2], pf, xf[2], kf)
        raw = np.arctan2(tang[:, 1], tang[:, 0])
        yaw = _unwrap_mod_pi(raw, x0[2])
    else:
        # straight chord with the yaw blended linearly between endpoints
        s = np.linspace(0.0, 1.0, kf + 1)
        pts = p0 + s[:, None] * (pf - p0)
        yaw = x0[2] + s * _wrap_angle(xf[2] - x0[2])
        raw = yaw.copy()
    nx = model.n_states
    X = np.zeros((kf + 1, nx))
    X[:, 0] = pts[:, 0]
    X[:, 1] = pts[:, 1]
    X[:, 2] = yaw
    if model.has_trailer:
        X[:, 3] = yaw
    if not scenario.free_time:
        X[:, -2] = np.linspace(x0[-2], xf[-2], kf + 1)
    lo, hi = model.state_lower(), model.state_upper()
    X = np.clip(X, lo[None, :], hi[None, :])
    X[0] = x0
    X[-1] = xf
    U = np.zeros((kf, 2))
    return X, U, raw


def assemble_guess(scenario: Scenario, nlp: NlpProblem, strategy: str = "geometry") -> np.ndarray:
    """Fill the full decision vector for one of the seeding strategies.

    ``geometry`` places each plane from the instantaneous body/obstacle
    layout along the seed path; ``constant`` writes one fixed plane
    everywhere and leaves the rest identical.
    """
    if strategy not in ("geometry", "constant"):
        raise InitializationError(f"unknown strategy {strategy!r}")
    T = nlp.meta["transcription"]
    if T.scenario is not scenario:
        raise InitializationError("guess requested for a different scenario")
    kf = scenario.k_f
    z = np.zeros(nlp.n_vars)
    filled = np.zeros(nlp.n_vars, dtype=bool)

    def put(name, vals):
        sl = nlp.var_map[name]
        if filled[sl].any():
            raise InitializationError(f"slice {name} written twice")
        z[sl] = vals
        filled[sl] = True

    X, U, tangents = _state_guess(scenario)
    for k in range(kf + 1):
        put(f"state[{k}]", X[k])
    for k in range(kf):
        put(f"control[{k}]", U[k])
    if "t_f" in nlp.var_map:
        put("t_f", scenario.tf_guess)

    # body sample points along the seed path, one per part per step
    samples = {}
    for pi, part in enumerate(scenario.body_parts):
        samples[pi] = np.stack(
            [centroid(body_world_set(part, X[k])) for k in range(kf + 1)]
        )

    for blk in T.sep_blocks:
        pi, oi = blk["pair"]
        obs = scenario.obstacles[oi]
        per = blk["aux_per_step"]
        vals = np.empty(kf * per)
        for k in range(1, kf + 1):
            if strategy == "constant":
                lam = np.array([1.0, 1.0]) / np.sqrt(2.0)
                mu = 0.0
            else:
                oc = centroid(obstacle_world_set(obs, k))
                if blk["kind"] == SepKind.ELL_ELL or (
                    blk["kind"] == SepKind.POLY_ELL and blk["body_on_plus_side"]
                ):
                    lam, mu = tangent_plane_guess(samples[pi][k], tangents[k], oc, scenario.gamma)
                else:
                    lam, mu = orthogonal_plane_guess(samples[pi][k], oc, scenario.gamma)
                if not blk["body_on_plus_side"]:
                    lam, mu = -lam, -mu
            if np.linalg.norm(lam) < LAMBDA_MIN:
                lam = np.array([1.0, 0.0])
            vals[(k - 1) * per : (k - 1) * per + 2] = lam
            vals[(k - 1) * per + 2] = mu
        put(f"sep_b{pi}o{oi}", vals)

    for blk in T.dual_blocks:
        pi, oi = blk["pair"]
        per = blk["aux_per_step"]
        put(f"dual_b{pi}o{oi}", np.full(kf * per, 0.1))

    for blk in T.contain_blocks:
        if blk["kind"] != ContainKind.ELL_IN_ELL:
            continue
        pi, wi = blk["pair"]
        outer = scenario.canvas[wi]
        per = blk["aux_per_step"]
        vals = np.zeros((kf + 1) * per)
        for k in range(kf + 1):
            inner = body_world_set(scenario.body_parts[pi], X[k])
            lam_c = 1.0
            try:
                L = psd_cholesky(g_matrix(inner, outer, lam_c))
                ups = tril_pack(L)
            except FactorizationError:
                ups = np.zeros(6)
            vals[k * per] = lam_c
            vals[k * per + 1 : (k + 1) * per] = ups
        put(f"contain_b{pi}w{wi}", vals)

    if not filled.all():
        holes = [name for name, sl in nlp.var_map.items() if not filled[sl].all()]
        raise InitializationError(f"guess left slices unfilled: {holes}")
    return np.clip(z, nlp.lower, nlp.upper)
