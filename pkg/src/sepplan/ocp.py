"""Transcription of planar avoidance OCPs into dense nonlinear programs.

The decision vector is laid out as

    [ states | controls | t_f? | separation aux | containment aux ]

with states stacked step-major, controls likewise, and one contiguous aux
slice per constraint block.  Residual callables return plain arrays; the
Jacobian callables fill dense matrices through precomputed index grids so a
full evaluation stays allocation-bound rather than Python-bound.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .baseline_dual import FormulationKind, UnsupportedCombinationError, count_aux_variables
from .containment import (
    ContainKind,
    contain_ell_in_ell,
    contain_ell_in_ell_jac,
    tril_pack,
)
from .dynamics import (
    VehicleModelParams,
    VehicleState,
    model_deriv,
    model_jacobians,
    rk4_step_with_jacobians,
)
from .geometry import (
    ConvexSet,
    Ellipsoid,
    Polytope,
    Pose,
    planar_rotation,
    planar_rotation_derivative,
    transform_ellipsoid,
    transform_polytope,
)
from .separation import SepKind, aux_count

ATTACHMENTS = ("tractor", "trailer")


class TranscriptionError(ValueError):
    """Raised when a scenario cannot be transcribed as requested."""


class EvaluationError(RuntimeError):
    """Raised by the checked evaluation helpers on non-finite values."""


@dataclass
class BodyPart:
    """One rigid convex piece of the vehicle, in its attachment frame.

    The local frame has its origin on the rear axle of the tractor (or the
    trailer axle) with x pointing forward, so a part is placed in the world
    by the pose (x, y, yaw) of whichever axle it is attached to.
    """

    shape: ConvexSet
    attachment: str = "tractor"

    def __post_init__(self):
        if self.attachment not in ATTACHMENTS:
            raise TranscriptionError(f"unknown attachment {self.attachment!r}")


@dataclass
class Obstacle:
    """A convex obstacle, either static (world frame) or moving.

    A moving obstacle carries one pose per time step; ``shape`` is then the
    local-frame set and the world set at step k is shape transformed by
    poses[k].
    """

    shape: ConvexSet
    poses: Optional[list] = None

    @property
    def moving(self) -> bool:
        return self.poses is not None


@dataclass
class Scenario:
    """Everything that defines one avoidance problem instance."""

    name: str
    model: VehicleModelParams
    body_parts: list
    obstacles: list
    canvas: list
    start: VehicleState
    goal: VehicleState
    k_f: int
    free_time: bool = True
    tf_guess: float = 10.0
    tf_fixed: Optional[float] = None
    weight_time: float = 1.0
    weight_inputs: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))
    formulation: FormulationKind = FormulationKind.HYPERPLANE
    interim: Optional[np.ndarray] = None
    gamma: float = 0.75

    def __post_init__(self):
        if self.k_f < 2:
            raise TranscriptionError("need at least two steps")
        if not self.body_parts:
            raise TranscriptionError("scenario has no body parts")
        if not self.canvas:
            raise TranscriptionError("scenario has no canvas sets")
        self.weight_inputs = np.asarray(self.weight_inputs, dtype=float)
        if self.weight_inputs.shape != (2,) or np.any(self.weight_inputs < 0):
            raise TranscriptionError("weight_inputs must be two nonnegative entries")
        if self.free_time:
            if self.weight_time <= 0:
                raise TranscriptionError("free final time needs a positive time weight")
        else:
            if self.tf_fixed is None or self.tf_fixed <= 0:
                raise TranscriptionError("fixed final time must be positive")
        if self.interim is not None:
            self.interim = np.asarray(self.interim, dtype=float).reshape(2)
        if not self.model.has_trailer:
            for part in self.body_parts:
                if part.attachment == "trailer":
                    raise TranscriptionError("trailer part on a trailer-less model")
        for obs in self.obstacles:
            if obs.moving and len(obs.poses) != self.k_f + 1:
                raise TranscriptionError(
                    f"moving obstacle has {len(obs.poses)} poses, wanted {self.k_f + 1}"
                )
        lo, hi = self.model.state_lower(), self.model.state_upper()
        for tag, state in (("start", self.start), ("goal", self.goal)):
            arr = state.as_array(self.model.has_trailer)
            if np.any(arr < lo - 1e-9) or np.any(arr > hi + 1e-9):
                raise TranscriptionError(f"{tag} state violates the model bounds")


def attachment_index(model: VehicleModelParams, attachment: str) -> int:
    """State index of the yaw angle that drives a given attachment."""
    if attachment == "trailer":
        if not model.has_trailer:
            raise TranscriptionError("model has no trailer yaw")
        return 3
    return 2


def body_world_set(part: BodyPart, state: np.ndarray) -> ConvexSet:
    """World-frame set of one body part at a full state vector."""
    state = np.asarray(state, dtype=float)
    yaw_idx = 3 if part.attachment == "trailer" else 2
    pose = Pose.planar(state[0], state[1], state[yaw_idx])
    if isinstance(part.shape, Polytope):
        return transform_polytope(part.shape, pose)
    return transform_ellipsoid(part.shape, pose)


def obstacle_world_set(obs: Obstacle, k: int) -> ConvexSet:
    """World-frame set of an obstacle at step k."""
    if not obs.moving:
        return obs.shape
    pose = obs.poses[k]
    if isinstance(obs.shape, Polytope):
        return transform_polytope(obs.shape, pose)
    return transform_ellipsoid(obs.shape, pose)


def _sep_kind_for(body: ConvexSet, obstacle: ConvexSet) -> tuple:
    """Separation kind plus whether the body sits on the plus side."""
    body_poly = isinstance(body, Polytope)
    obs_poly = isinstance(obstacle, Polytope)
    if body_poly and obs_poly:
        return SepKind.POLY_POLY, True
    if body_poly and not obs_poly:
        return SepKind.POLY_ELL, True
    if not body_poly and obs_poly:
        # reuse the mixed residual with the polytope first; the body then
        # lives on the minus side of the plane
        return SepKind.POLY_ELL, False
    return SepKind.ELL_ELL, True


def _contain_kind_for(body: ConvexSet, canvas: ConvexSet) -> ContainKind:
    body_poly = isinstance(body, Polytope)
    canvas_poly = isinstance(canvas, Polytope)
    if body_poly and canvas_poly:
        return ContainKind.POLY_IN_POLY
    if body_poly and not canvas_poly:
        return ContainKind.POLY_IN_ELL
    if not body_poly and canvas_poly:
        return ContainKind.ELL_IN_POLY
    return ContainKind.ELL_IN_ELL


@dataclass
class VariableCounts:
    """Decision-variable budget of one transcription."""

    formulation: FormulationKind
    n_state: int
    n_control: int
    n_time: int
    n_separation_aux: int
    n_containment_aux: int

    @property
    def total(self) -> int:
        return (
            self.n_state
            + self.n_control
            + self.n_time
            + self.n_separation_aux
            + self.n_containment_aux
        )

    def as_dict(self) -> dict:
        return {
            "formulation": self.formulation.value,
            "state": self.n_state,
            "control": self.n_control,
            "time": self.n_time,
            "separation_aux": self.n_separation_aux,
            "containment_aux": self.n_containment_aux,
            "total": self.total,
        }


def count_variables(
    scenario: Scenario, formulation: Optional[FormulationKind] = None
) -> VariableCounts:
    """Count decision variables without building residual machinery.

    Works for every formulation kind that admits the scenario's set types,
    including ones the builder itself refuses to transcribe.
    """
    if formulation is None:
        formulation = scenario.formulation
    nx = scenario.model.n_states
    kf = scenario.k_f
    n_sep = 0
    for part in scenario.body_parts:
        for obs in scenario.obstacles:
            per = count_aux_variables(formulation, part.shape, obs.shape, n_dim=2)
            n_sep += per * kf
    n_con = 0
    for part in scenario.body_parts:
        for canvas in scenario.canvas:
            kind = _contain_kind_for(part.shape, canvas)
            from .containment import aux_count as contain_aux_count

            n_con += contain_aux_count(kind, 2) * (kf + 1)
    return VariableCounts(
        formulation=formulation,
        n_state=nx * (kf + 1),
        n_control=2 * kf,
        n_time=1 if scenario.free_time else 0,
        n_separation_aux=n_sep,
        n_containment_aux=n_con,
    )


@dataclass
class NlpProblem:
    """A dense NLP: minimize cost subject to eq == 0, ineq <= 0, bounds.

    ``eq_families`` / ``ineq_families`` list (label, n_rows) pairs in the
    order the residual callables stack them, so diagnostics can name the
    block a bad row belongs to.
    """

    n_vars: int
    lower: np.ndarray
    upper: np.ndarray
    cost: Callable
    cost_grad: Callable
    eq_residuals: Callable
    eq_jacobian: Callable
    ineq_residuals: Callable
    ineq_jacobian: Callable
    eq_families: list
    ineq_families: list
    var_map: "collections.OrderedDict"
    meta: dict = field(default_factory=dict)
    full_eval: Optional[Callable] = None
    cost_hess: Optional[Callable] = None

    @property
    def n_eq(self) -> int:
        return sum(n for _, n in self.eq_families)

    @property
    def n_ineq(self) -> int:
        return sum(n for _, n in self.ineq_families)


def family_of_row(families: list, row: int) -> str:
    """Name of the residual family owning a stacked row index."""
    off = 0
    for label, n in families:
        if row < off + n:
            return label
        off += n
    return "unknown"


def eval_cost(nlp: NlpProblem, z: np.ndarray) -> float:
    v = float(nlp.cost(z))
    if not np.isfinite(v):
        raise EvaluationError("cost is not finite")
    return v


def eval_residuals(nlp: NlpProblem, z: np.ndarray) -> tuple:
    """Checked residual evaluation; raises naming the offending family."""
    ce = nlp.eq_residuals(z)
    ci = nlp.ineq_residuals(z)
    for tag, vals, fams in (("eq", ce, nlp.eq_families), ("ineq", ci, nlp.ineq_families)):
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            fam = family_of_row(fams, int(bad[0]))
            raise EvaluationError(f"non-finite {tag} residual in family {fam!r}")
    return ce, ci


# ---------------------------------------------------------------------------
# evaluation context: per-z cache of kinematic quantities shared by families


class _EvalContext:
    def __init__(self, T: "_Transcription", z: np.ndarray):
        z = np.asarray(z, dtype=float)
        if z.shape != (T.layout.n_vars,):
            raise TranscriptionError(
                f"decision vector has shape {z.shape}, wanted ({T.layout.n_vars},)"
            )
        self.z = z
        L = T.layout
        self.X = z[: L.n_state].reshape(T.kf + 1, T.nx)
        self.U = z[L.n_state : L.n_state + L.n_control].reshape(T.kf, 2)
        self.tf = z[L.tf_index] if L.tf_index is not None else T.scenario.tf_fixed
        self._parts = T.parts
        self._rot = {}
        self._part_poly = {}
        self._part_ell = {}

    def rotations(self, att_idx: int) -> tuple:
        """(R, dR) stacks over all k_f + 1 steps for one yaw channel."""
        hit = self._rot.get(att_idx)
        if hit is None:
            th = self.X[:, att_idx]
            hit = (planar_rotation(th), planar_rotation_derivative(th))
            self._rot[att_idx] = hit
        return hit

    def part_polygon(self, pi: int) -> tuple:
        """(W, dW): world vertices and their yaw derivative, (k_f+1, 2, nv)."""
        hit = self._part_poly.get(pi)
        if hit is None:
            part = self._parts[pi]
            R, dR = self.rotations(part["att_idx"])
            V0 = part["V0"]
            W = R @ V0 + self.X[:, :2][:, :, None]
            dW = dR @ V0
            hit = (W, dW)
            self._part_poly[pi] = hit
        return hit

    def part_ellipse(self, pi: int) -> dict:
        """World-frame ellipsoid data for an ellipsoidal part, batched."""
        hit = self._part_ell.get(pi)
        if hit is None:
            part = self._parts[pi]
            R, dR = self.rotations(part["att_idx"])
            E0i, e0, E0 = part["E0_inv"], part["e0"], part["E0"]
            Einv = R @ E0i @ R.transpose(0, 2, 1)
            dEinv = dR @ E0i @ R.transpose(0, 2, 1) + R @ E0i @ dR.transpose(0, 2, 1)
            E = R @ E0 @ R.transpose(0, 2, 1)
            dE = dR @ E0 @ R.transpose(0, 2, 1) + R @ E0 @ dR.transpose(0, 2, 1)
            e = (R @ e0) + self.X[:, :2]
            de = dR @ e0
            hit = {"Einv": Einv, "dEinv": dEinv, "E": E, "dE": dE, "e": e, "de": de}
            self._part_ell[pi] = hit
        return hit


# ---------------------------------------------------------------------------
# residual families


class _BoundaryFamily:
    label = "boundary"

    def __init__(self, T):
        self.T = T
        self.n_rows = 2 * T.nx
        self.x0 = T.scenario.start.as_array(T.scenario.model.has_trailer)
        self.xf = T.scenario.goal.as_array(T.scenario.model.has_trailer)

    def residuals(self, ctx):
        return np.concatenate([ctx.X[0] - self.x0, ctx.X[-1] - self.xf])

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        nx = T.nx
        rows = row0 + np.arange(2 * nx)
        cols = np.concatenate(
            [np.arange(nx), T.layout.n_state - nx + np.arange(nx)]
        )
        J[rows, cols] = 1.0


class _DefectFamily:
    label = "dynamics_defects"

    def __init__(self, T):
        self.T = T
        self.n_rows = T.kf * T.nx
        self.deriv = model_deriv(T.scenario.model)
        self.jac = model_jacobians(T.scenario.model)

    def _step(self, ctx):
        T = self.T
        if T.scenario.free_time:
            return 1.0 / T.kf, ctx.tf
        return T.scenario.tf_fixed / T.kf, None

    def residuals(self, ctx):
        T = self.T
        h, scale = self._step(ctx)
        x_next, _, _, _ = rk4_step_with_jacobians(
            self.deriv, self.jac, ctx.X[:-1], ctx.U, h, T.scenario.model, tf_scale=scale
        )
        return (ctx.X[1:] - x_next).ravel()

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        nx, kf = T.nx, T.kf
        h, scale = self._step(ctx)
        _, Jx, Ju, Jtf = rk4_step_with_jacobians(
            self.deriv, self.jac, ctx.X[:-1], ctx.U, h, T.scenario.model, tf_scale=scale
        )
        rows = row0 + (np.arange(kf) * nx)[:, None] + np.arange(nx)[None, :]
        # d/dx_k
        rgrid = rows[:, :, None]
        cgrid = (np.arange(kf) * nx)[:, None, None] + np.arange(nx)[None, None, :]
        J[rgrid, cgrid] = -Jx
        # d/dx_{k+1} is the identity
        diag_cols = (np.arange(1, kf + 1) * nx)[:, None] + np.arange(nx)[None, :]
        J[rows, diag_cols] = 1.0
        # d/du_k
        ucols = (
            T.layout.n_state
            + (np.arange(kf) * 2)[:, None, None]
            + np.arange(2)[None, None, :]
        )
        J[rgrid, ucols] = -Ju
        if Jtf is not None:
            J[rows.ravel(), T.layout.tf_index] = -Jtf.ravel()


class _JointAngleFamily:
    label = "joint_angle"

    def __init__(self, T):
        self.T = T
        self.n_rows = 2 * (T.kf + 1)
        self.bound = T.scenario.model.joint_angle_bound

    def residuals(self, ctx):
        d = ctx.X[:, 2] - ctx.X[:, 3]
        return np.stack([d - self.bound, -d - self.bound], axis=1).ravel()

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        steps = np.arange(T.kf + 1)
        rows_hi = row0 + 2 * steps
        rows_lo = rows_hi + 1
        c1 = steps * T.nx + 2
        c2 = steps * T.nx + 3
        J[rows_hi, c1] = 1.0
        J[rows_hi, c2] = -1.0
        J[rows_lo, c1] = -1.0
        J[rows_lo, c2] = 1.0


class _SepFamily:
    """Hyperplane separation rows for one (body part, obstacle) pair.

    Rows are step-major over k = 1..k_f; within a step the layout matches
    the standalone residual for the pair's kind.
    """

    def __init__(self, T, pi, oi, kind, plus_side, aux_offset):
        self.T = T
        self.pi, self.oi = pi, oi
        self.kind = kind
        self.plus_side = plus_side
        self.label = f"separation_b{pi}o{oi}"
        part = T.parts[pi]
        obs = T.obstacle_data[oi]
        self.body_is_poly = part["kind"] == "poly"
        self.obs_is_poly = obs["kind"] == "poly"
        self.nvb = part["V0"].shape[1] if self.body_is_poly else 0
        self.nvo = obs["V"].shape[2] if self.obs_is_poly else 0
        if kind == SepKind.POLY_POLY:
            self.rows_per_step = self.nvb + self.nvo + 1
        elif kind == SepKind.ELL_ELL:
            self.rows_per_step = 3
        else:  # POLY_ELL, either orientation
            npoly = self.nvb if self.plus_side else self.nvo
            self.rows_per_step = npoly + 2
        self.n_rows = T.kf * self.rows_per_step
        self.aux_offset = aux_offset
        self.aux_per_step = aux_count(kind, 2)
        kf = T.kf
        self.lam_cols = (
            aux_offset + (np.arange(kf) * self.aux_per_step)[:, None] + np.arange(2)[None, :]
        )
        self.mu_col = aux_offset + np.arange(kf) * self.aux_per_step + 2
        self.xy_cols = ((np.arange(1, kf + 1)) * T.nx)[:, None] + np.arange(2)[None, :]
        self.th_col = np.arange(1, kf + 1) * T.nx + part["att_idx"]

    def _aux(self, ctx):
        kf = self.T.kf
        a = ctx.z[self.aux_offset : self.aux_offset + kf * self.aux_per_step]
        a = a.reshape(kf, self.aux_per_step)
        return a[:, :2], a[:, 2]

    def _row_grid(self, row0):
        kf = self.T.kf
        return (
            row0
            + (np.arange(kf) * self.rows_per_step)[:, None]
            + np.arange(self.rows_per_step)[None, :]
        )

    def residuals(self, ctx):
        T = self.T
        lam, mu = self._aux(ctx)
        eps2 = T.eps_guard**2
        guard = eps2 - np.einsum("kd,kd->k", lam, lam)
        obs = T.obstacle_data[self.oi]
        out = np.empty((T.kf, self.rows_per_step))
        if self.kind == SepKind.POLY_POLY:
            W, _ = ctx.part_polygon(self.pi)
            Wk = W[1:]
            Vo = obs["V"][1:]
            lamW = np.einsum("kd,kdv->kv", lam, Wk)
            lamV = np.einsum("kd,kdv->kv", lam, Vo)
            out[:, : self.nvb] = mu[:, None] - lamW
            out[:, self.nvb : self.nvb + self.nvo] = lamV - mu[:, None]
            out[:, -1] = guard
        elif self.kind == SepKind.ELL_ELL:
            body = ctx.part_ellipse(self.pi)
            Einv_b = body["Einv"][1:]
            e_b = body["e"][1:]
            qb = np.einsum("kd,kde,ke->k", lam, Einv_b, lam)
            sup_b = np.sqrt(qb) + np.einsum("kd,kd->k", lam, e_b)
            Eo_inv = obs["E_inv"][1:]
            eo = obs["e"][1:]
            qo = np.einsum("kd,kde,ke->k", lam, Eo_inv, lam)
            low_o = np.einsum("kd,kd->k", lam, eo) - np.sqrt(qo)
            out[:, 0] = sup_b - mu
            out[:, 1] = mu - low_o
            out[:, 2] = guard
        elif self.plus_side:  # body polygon vs obstacle ellipsoid
            W, _ = ctx.part_polygon(self.pi)
            Wk = W[1:]
            lamW = np.einsum("kd,kdv->kv", lam, Wk)
            Eo_inv = obs["E_inv"][1:]
            eo = obs["e"][1:]
            q = np.einsum("kd,kde,ke->k", lam, Eo_inv, lam)
            sup_o = np.sqrt(q) + np.einsum("kd,kd->k", lam, eo)
            out[:, : self.nvb] = mu[:, None] - lamW
            out[:, self.nvb] = sup_o - mu
            out[:, -1] = guard
        else:  # body ellipsoid vs obstacle polygon: polytope rows first
            Vo = obs["V"][1:]
            lamV = np.einsum("kd,kdv->kv", lam, Vo)
            body = ctx.part_ellipse(self.pi)
            Einv_b = body["Einv"][1:]
            e_b = body["e"][1:]
            q = np.einsum("kd,kde,ke->k", lam, Einv_b, lam)
            sup_b = np.sqrt(q) + np.einsum("kd,kd->k", lam, e_b)
            out[:, : self.nvo] = mu[:, None] - lamV
            out[:, self.nvo] = sup_b - mu
            out[:, -1] = guard
        return out.ravel()

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        kf = T.kf
        lam, mu = self._aux(ctx)
        rows = self._row_grid(row0)
        obs = T.obstacle_data[self.oi]
        guard_rows = rows[:, -1]
        J[guard_rows[:, None], self.lam_cols] = -2.0 * lam
        if self.kind == SepKind.POLY_POLY:
            W, dW = ctx.part_polygon(self.pi)
            Wk, dWk = W[1:], dW[1:]
            Vo = obs["V"][1:]
            rb = rows[:, : self.nvb]
            ro = rows[:, self.nvb : self.nvb + self.nvo]
            J[rb[:, :, None], self.xy_cols[:, None, :]] = -lam[:, None, :]
            J[rb, self.th_col[:, None]] = -np.einsum("kd,kdv->kv", lam, dWk)
            J[rb[:, :, None], self.lam_cols[:, None, :]] = -Wk.transpose(0, 2, 1)
            J[rb, self.mu_col[:, None]] = 1.0
            J[ro[:, :, None], self.lam_cols[:, None, :]] = Vo.transpose(0, 2, 1)
            J[ro, self.mu_col[:, None]] = -1.0
        elif self.kind == SepKind.ELL_ELL:
            body = ctx.part_ellipse(self.pi)
            Einv_b, dEinv_b = body["Einv"][1:], body["dEinv"][1:]
            e_b, de_b = body["e"][1:], body["de"][1:]
            qb = np.einsum("kd,kde,ke->k", lam, Einv_b, lam)
            sb = np.sqrt(qb)
            r_sup = rows[:, 0]
            r_low = rows[:, 1]
            # support row of the body ellipsoid
            dlam = np.einsum("kde,ke->kd", Einv_b, lam) / sb[:, None] + e_b
            J[r_sup[:, None], self.lam_cols] = dlam
            J[r_sup[:, None], self.xy_cols] = lam
            dth = np.einsum("kd,kde,ke->k", lam, dEinv_b, lam) / (2 * sb)
            dth = dth + np.einsum("kd,kd->k", lam, de_b)
            J[r_sup, self.th_col] = dth
            J[r_sup, self.mu_col] = -1.0
            # lower-bound row of the obstacle ellipsoid
            Eo_inv = obs["E_inv"][1:]
            eo = obs["e"][1:]
            qo = np.einsum("kd,kde,ke->k", lam, Eo_inv, lam)
            so = np.sqrt(qo)
            dlam_o = eo - np.einsum("kde,ke->kd", Eo_inv, lam) / so[:, None]
            J[r_low[:, None], self.lam_cols] = -dlam_o
            J[r_low, self.mu_col] = 1.0
        elif self.plus_side:
            W, dW = ctx.part_polygon(self.pi)
            Wk, dWk = W[1:], dW[1:]
            rb = rows[:, : self.nvb]
            J[rb[:, :, None], self.xy_cols[:, None, :]] = -lam[:, None, :]
            J[rb, self.th_col[:, None]] = -np.einsum("kd,kdv->kv", lam, dWk)
            J[rb[:, :, None], self.lam_cols[:, None, :]] = -Wk.transpose(0, 2, 1)
            J[rb, self.mu_col[:, None]] = 1.0
            Eo_inv = obs["E_inv"][1:]
            eo = obs["e"][1:]
            q = np.einsum("kd,kde,ke->k", lam, Eo_inv, lam)
            s = np.sqrt(q)
            r_sup = rows[:, self.nvb]
            J[r_sup[:, None], self.lam_cols] = (
                np.einsum("kde,ke->kd", Eo_inv, lam) / s[:, None] + eo
            )
            J[r_sup, self.mu_col] = -1.0
        else:
            Vo = obs["V"][1:]
            ro = rows[:, : self.nvo]
            J[ro[:, :, None], self.lam_cols[:, None, :]] = -Vo.transpose(0, 2, 1)
            J[ro, self.mu_col[:, None]] = 1.0
            body = ctx.part_ellipse(self.pi)
            Einv_b, dEinv_b = body["Einv"][1:], body["dEinv"][1:]
            e_b, de_b = body["e"][1:], body["de"][1:]
            q = np.einsum("kd,kde,ke->k", lam, Einv_b, lam)
            s = np.sqrt(q)
            r_sup = rows[:, self.nvo]
            J[r_sup[:, None], self.lam_cols] = (
                np.einsum("kde,ke->kd", Einv_b, lam) / s[:, None] + e_b
            )
            J[r_sup[:, None], self.xy_cols] = lam
            dth = np.einsum("kd,kde,ke->k", lam, dEinv_b, lam) / (2 * s)
            J[r_sup, self.th_col] = dth + np.einsum("kd,kd->k", lam, de_b)
            J[r_sup, self.mu_col] = -1.0


class _ContainPolyFamily:
    """Canvas containment rows for a polygonal part, steps 0..k_f."""

    def __init__(self, T, pi, wi, kind):
        self.T = T
        self.pi, self.wi = pi, wi
        self.kind = kind
        self.label = f"containment_b{pi}w{wi}"
        part = T.parts[pi]
        self.nv = part["V0"].shape[1]
        canvas = T.scenario.canvas[wi]
        if kind == ContainKind.POLY_IN_POLY:
            self.A = canvas.A
            self.b = canvas.b
            self.rows_per_step = canvas.n_faces * self.nv
        else:
            self.E = canvas.E
            self.e = canvas.e
            self.rows_per_step = self.nv
        self.n_rows = (T.kf + 1) * self.rows_per_step
        kf = T.kf
        self.xy_cols = (np.arange(kf + 1) * T.nx)[:, None] + np.arange(2)[None, :]
        self.th_col = np.arange(kf + 1) * T.nx + part["att_idx"]

    def residuals(self, ctx):
        W, _ = ctx.part_polygon(self.pi)
        if self.kind == ContainKind.POLY_IN_POLY:
            vals = np.einsum("fd,kdv->kvf", self.A, W) - self.b[None, None, :]
            return vals.ravel()
        d = W - self.e[None, :, None]
        lvl = np.einsum("kdv,de,kev->kv", d, self.E, d)
        return (lvl - 1.0).ravel()

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        kf = T.kf
        W, dW = ctx.part_polygon(self.pi)
        rows = row0 + (np.arange(kf + 1) * self.rows_per_step)[:, None] + np.arange(
            self.rows_per_step
        )[None, :]
        if self.kind == ContainKind.POLY_IN_POLY:
            nf = self.A.shape[0]
            r3 = rows.reshape(kf + 1, self.nv, nf)
            # rows are vertex-major: d/dxy is the face normal
            J[r3[:, :, :, None], self.xy_cols[:, None, None, :]] = self.A[None, None, :, :]
            dth = np.einsum("fd,kdv->kvf", self.A, dW)
            J[r3, self.th_col[:, None, None]] = dth
        else:
            d = W - self.e[None, :, None]
            g = 2.0 * np.einsum("de,kev->kdv", self.E, d)
            J[rows[:, :, None], self.xy_cols[:, None, :]] = g.transpose(0, 2, 1)
            J[rows, self.th_col[:, None]] = np.einsum("kdv,kdv->kv", g, dW)


class _ContainEllInPolyFamily:
    """Canvas rows for an ellipsoidal part inside a polytope canvas."""

    def __init__(self, T, pi, wi):
        self.T = T
        self.pi, self.wi = pi, wi
        self.label = f"containment_b{pi}w{wi}"
        canvas = T.scenario.canvas[wi]
        self.A = canvas.A
        self.b = canvas.b
        self.rows_per_step = canvas.n_faces
        self.n_rows = (T.kf + 1) * self.rows_per_step
        kf = T.kf
        self.xy_cols = (np.arange(kf + 1) * T.nx)[:, None] + np.arange(2)[None, :]
        self.th_col = np.arange(kf + 1) * T.nx + T.parts[pi]["att_idx"]

    def residuals(self, ctx):
        body = ctx.part_ellipse(self.pi)
        Einv, e = body["Einv"], body["e"]
        q = np.einsum("fd,kde,fe->kf", self.A, Einv, self.A)
        return (np.sqrt(q) + e @ self.A.T - self.b[None, :]).ravel()

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        kf = T.kf
        body = ctx.part_ellipse(self.pi)
        Einv, dEinv, de = body["Einv"], body["dEinv"], body["de"]
        q = np.einsum("fd,kde,fe->kf", self.A, Einv, self.A)
        s = np.sqrt(q)
        rows = row0 + (np.arange(kf + 1) * self.rows_per_step)[:, None] + np.arange(
            self.rows_per_step
        )[None, :]
        J[rows[:, :, None], self.xy_cols[:, None, :]] = self.A[None, :, :]
        dth = np.einsum("fd,kde,fe->kf", self.A, dEinv, self.A) / (2 * s)
        J[rows, self.th_col[:, None]] = dth + de @ self.A.T


class _ContainEllInEllFamily:
    """Scaled-containment certificate rows for an ellipsoidal part in an
    ellipsoidal canvas; equality rows tie G(lam) to its factor."""

    def __init__(self, T, pi, wi, aux_offset):
        self.T = T
        self.pi, self.wi = pi, wi
        self.label = f"containment_b{pi}w{wi}"
        self.aux_offset = aux_offset
        self.aux_per_step = 7  # lam plus the packed 3x3 factor
        self.rows_per_step = 6
        self.n_rows = (T.kf + 1) * self.rows_per_step
        self.outer = T.scenario.canvas[wi]

    def _aux(self, ctx):
        kf = self.T.kf
        a = ctx.z[self.aux_offset : self.aux_offset + (kf + 1) * self.aux_per_step]
        a = a.reshape(kf + 1, self.aux_per_step)
        return a[:, 0], a[:, 1:]

    def residuals(self, ctx):
        T = self.T
        lam, ups = self._aux(ctx)
        body = ctx.part_ellipse(self.pi)
        out = np.empty((T.kf + 1, self.rows_per_step))
        for k in range(T.kf + 1):
            inner = Ellipsoid(body["E"][k], body["e"][k])
            res = contain_ell_in_ell(inner, self.outer, lam[k], ups[k])
            out[k] = res.eq
        return out.ravel()

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        lam, ups = self._aux(ctx)
        body = ctx.part_ellipse(self.pi)
        X = ctx.X
        nx = T.nx
        att = T.parts[self.pi]["att_idx"]
        for k in range(T.kf + 1):
            inner = Ellipsoid(body["E"][k], body["e"][k])
            J_lam, J_ups = contain_ell_in_ell_jac(inner, self.outer, lam[k], ups[k])
            r0 = row0 + k * self.rows_per_step
            rows = np.arange(r0, r0 + self.rows_per_step)
            a0 = self.aux_offset + k * self.aux_per_step
            J[rows, a0] = J_lam
            J[rows[:, None], a0 + 1 + np.arange(6)[None, :]] = J_ups
            # pose sensitivity of G(lam): only the inner-ellipsoid terms move
            E, dE = body["E"][k], body["dE"][k]
            e, de = body["e"][k], body["de"][k]
            lk = lam[k]
            # d/dxy enters through e only
            for d in range(2):
                step = np.zeros(2)
                step[d] = 1.0
                dG = np.zeros((3, 3))
                dG[:2, 2] = -lk * (E @ step)
                dG[2, :2] = dG[:2, 2]
                dG[2, 2] = lk * 2.0 * (step @ E @ e)
                J[rows, k * nx + d] = tril_pack(dG)
            dG = np.zeros((3, 3))
            dG[:2, :2] = lk * dE
            dG[:2, 2] = -lk * (dE @ e + E @ de)
            dG[2, :2] = dG[:2, 2]
            dG[2, 2] = lk * (de @ E @ e + e @ dE @ e + e @ E @ de)
            J[rows, k * nx + att] = tril_pack(dG)


class _DualEqFamily:
    """Equalities of the multiplier formulation for one pair: normal match
    (two rows) plus the unit-normal row, per step k = 1..k_f."""

    def __init__(self, T, pi, oi, aux_offset):
        self.T = T
        self.pi, self.oi = pi, oi
        self.label = f"dual_eq_b{pi}o{oi}"
        part = T.parts[pi]
        obs = T.obstacle_data[oi]
        self.A1 = part["A0"]
        self.nf1 = self.A1.shape[0]
        self.nf2 = obs["A"].shape[1]
        self.rows_per_step = 3
        self.n_rows = T.kf * 3
        self.aux_offset = aux_offset
        self.aux_per_step = self.nf1 + self.nf2
        self.M = self.A1 @ self.A1.T
        self.th_col = np.arange(1, T.kf + 1) * T.nx + part["att_idx"]

    def _aux(self, ctx):
        kf = self.T.kf
        a = ctx.z[self.aux_offset : self.aux_offset + kf * self.aux_per_step]
        a = a.reshape(kf, self.aux_per_step)
        return a[:, : self.nf1], a[:, self.nf1 :]

    def residuals(self, ctx):
        T = self.T
        lam, mu = self._aux(ctx)
        part = T.parts[self.pi]
        R, _ = ctx.rotations(part["att_idx"])
        obs = T.obstacle_data[self.oi]
        w = np.einsum("kde,fe,kf->kd", R[1:], self.A1, lam)
        v = np.einsum("kfd,kf->kd", obs["A"][1:], mu)
        norm_row = np.einsum("kf,fg,kg->k", lam, self.M, lam) - 1.0
        out = np.empty((T.kf, 3))
        out[:, :2] = w + v
        out[:, 2] = norm_row
        return out.ravel()

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        kf = T.kf
        lam, mu = self._aux(ctx)
        part = T.parts[self.pi]
        R, dR = ctx.rotations(part["att_idx"])
        obs = T.obstacle_data[self.oi]
        rows = row0 + (np.arange(kf) * 3)[:, None] + np.arange(3)[None, :]
        lam_cols = (
            self.aux_offset
            + (np.arange(kf) * self.aux_per_step)[:, None]
            + np.arange(self.nf1)[None, :]
        )
        mu_cols = (
            self.aux_offset
            + (np.arange(kf) * self.aux_per_step)[:, None]
            + self.nf1
            + np.arange(self.nf2)[None, :]
        )
        RA = np.einsum("kde,fe->kdf", R[1:], self.A1)
        J[rows[:, :2][:, :, None], lam_cols[:, None, :]] = RA
        J[rows[:, :2][:, :, None], mu_cols[:, None, :]] = obs["A"][1:].transpose(0, 2, 1)
        dw = np.einsum("kde,fe,kf->kd", dR[1:], self.A1, lam)
        J[rows[:, :2], self.th_col[:, None]] = dw
        J[rows[:, 2][:, None], lam_cols] = 2.0 * np.einsum("fg,kg->kf", self.M, lam)


class _DualIneqFamily:
    """Margin inequality of the multiplier formulation, one row per step."""

    def __init__(self, T, pi, oi, aux_offset, margin=0.0):
        self.T = T
        self.pi, self.oi = pi, oi
        self.label = f"dual_margin_b{pi}o{oi}"
        part = T.parts[pi]
        obs = T.obstacle_data[oi]
        self.A1 = part["A0"]
        self.b1 = part["b0"]
        self.nf1 = self.A1.shape[0]
        self.nf2 = obs["A"].shape[1]
        self.margin = margin
        self.rows_per_step = 1
        self.n_rows = T.kf
        self.aux_offset = aux_offset
        self.aux_per_step = self.nf1 + self.nf2
        self.th_col = np.arange(1, T.kf + 1) * T.nx + part["att_idx"]
        self.xy_cols = (np.arange(1, T.kf + 1) * T.nx)[:, None] + np.arange(2)[None, :]

    def _aux(self, ctx):
        kf = self.T.kf
        a = ctx.z[self.aux_offset : self.aux_offset + kf * self.aux_per_step]
        a = a.reshape(kf, self.aux_per_step)
        return a[:, : self.nf1], a[:, self.nf1 :]

    def residuals(self, ctx):
        T = self.T
        lam, mu = self._aux(ctx)
        part = T.parts[self.pi]
        R, _ = ctx.rotations(part["att_idx"])
        obs = T.obstacle_data[self.oi]
        t = ctx.X[1:, :2]
        w = np.einsum("kde,fe,kf->kd", R[1:], self.A1, lam)
        b2mu = np.einsum("kf,kf->k", obs["b"][1:], mu)
        return self.margin + lam @ self.b1 + np.einsum("kd,kd->k", t, w) + b2mu

    def fill_jacobian(self, ctx, J, row0):
        T = self.T
        kf = T.kf
        lam, mu = self._aux(ctx)
        part = T.parts[self.pi]
        R, dR = ctx.rotations(part["att_idx"])
        obs = T.obstacle_data[self.oi]
        t = ctx.X[1:, :2]
        rows = row0 + np.arange(kf)
        lam_cols = (
            self.aux_offset
            + (np.arange(kf) * self.aux_per_step)[:, None]
            + np.arange(self.nf1)[None, :]
        )
        mu_cols = (
            self.aux_offset
            + (np.arange(kf) * self.aux_per_step)[:, None]
            + self.nf1
            + np.arange(self.nf2)[None, :]
        )
        RA = np.einsum("kde,fe->kdf", R[1:], self.A1)
        J[rows[:, None], lam_cols] = self.b1[None, :] + np.einsum("kd,kdf->kf", t, RA)
        J[rows[:, None], mu_cols] = obs["b"][1:]
        w = np.einsum("kdf,kf->kd", RA, lam)
        J[rows[:, None], self.xy_cols] = w
        dw = np.einsum("kde,fe,kf->kd", dR[1:], self.A1, lam)
        J[rows, self.th_col] = np.einsum("kd,kd->k", t, dw)


# ---------------------------------------------------------------------------
# layout and transcription


@dataclass
class _Layout:
    n_state: int
    n_control: int
    tf_index: Optional[int]
    n_vars: int


class _Transcription:
    def __init__(self, scenario: Scenario, formulation: FormulationKind, eps_guard: float):
        self.scenario = scenario
        self.formulation = formulation
        self.eps_guard = eps_guard
        self.nx = scenario.model.n_states
        self.kf = scenario.k_f
        if formulation == FormulationKind.FARKAS:
            raise UnsupportedCombinationError(
                "the infeasibility-certificate formulation is counted but not transcribed"
            )

        self.parts = []
        for part in scenario.body_parts:
            att_idx = attachment_index(scenario.model, part.attachment)
            if isinstance(part.shape, Polytope):
                self.parts.append(
                    {
                        "kind": "poly",
                        "V0": part.shape.V,
                        "A0": part.shape.A,
                        "b0": part.shape.b,
                        "att_idx": att_idx,
                        "part": part,
                    }
                )
            else:
                self.parts.append(
                    {
                        "kind": "ell",
                        "E0": part.shape.E,
                        "E0_inv": part.shape.E_inv,
                        "e0": part.shape.e,
                        "att_idx": att_idx,
                        "part": part,
                    }
                )

        # obstacle world data per step (kf+1 leading axis, step 0 included so
        # indexing matches the state trajectory)
        self.obstacle_data = []
        for obs in scenario.obstacles:
            sets = [obstacle_world_set(obs, k) for k in range(self.kf + 1)]
            if isinstance(obs.shape, Polytope):
                self.obstacle_data.append(
                    {
                        "kind": "poly",
                        "V": np.stack([s.V for s in sets]),
                        "A": np.stack([s.A for s in sets]),
                        "b": np.stack([s.b for s in sets]),
                        "obstacle": obs,
                    }
                )
            else:
                self.obstacle_data.append(
                    {
                        "kind": "ell",
                        "E": np.stack([s.E for s in sets]),
                        "E_inv": np.stack([s.E_inv for s in sets]),
                        "e": np.stack([s.e for s in sets]),
                        "obstacle": obs,
                    }
                )

        var_map = collections.OrderedDict()
        nx, kf = self.nx, self.kf
        n_state = nx * (kf + 1)
        n_control = 2 * kf
        for k in range(kf + 1):
            var_map[f"state[{k}]"] = slice(k * nx, (k + 1) * nx)
        for k in range(kf):
            var_map[f"control[{k}]"] = slice(n_state + 2 * k, n_state + 2 * (k + 1))
        cursor = n_state + n_control
        tf_index = None
        if scenario.free_time:
            tf_index = cursor
            var_map["t_f"] = slice(cursor, cursor + 1)
            cursor += 1

        self.sep_blocks = []
        self.dual_blocks = []
        eq_families = [_BoundaryFamily(self), _DefectFamily(self)]
        ineq_families = []
        if scenario.model.has_trailer and scenario.model.joint_angle_bound is not None:
            ineq_families.append(_JointAngleFamily(self))

        for pi, part in enumerate(scenario.body_parts):
            for oi, obs in enumerate(scenario.obstacles):
                if formulation == FormulationKind.HYPERPLANE:
                    kind, plus = _sep_kind_for(part.shape, obs.shape)
                    per = aux_count(kind, 2)
                    fam = _SepFamily(self, pi, oi, kind, plus, cursor)
                    ineq_families.append(fam)
                    self.sep_blocks.append(
                        {
                            "pair": (pi, oi),
                            "kind": kind,
                            "body_on_plus_side": plus,
                            "aux_offset": cursor,
                            "aux_per_step": per,
                        }
                    )
                    var_map[f"sep_b{pi}o{oi}"] = slice(cursor, cursor + per * kf)
                    cursor += per * kf
                elif formulation == FormulationKind.DUAL:
                    if not (
                        isinstance(part.shape, Polytope) and isinstance(obs.shape, Polytope)
                    ):
                        raise UnsupportedCombinationError(
                            "the multiplier formulation needs polytopes on both sides"
                        )
                    per = part.shape.n_faces + obs.shape.n_faces
                    eq_families.append(_DualEqFamily(self, pi, oi, cursor))
                    ineq_families.append(_DualIneqFamily(self, pi, oi, cursor))
                    self.dual_blocks.append(
                        {
                            "pair": (pi, oi),
                            "aux_offset": cursor,
                            "aux_per_step": per,
                            "n_body_faces": part.shape.n_faces,
                        }
                    )
                    var_map[f"dual_b{pi}o{oi}"] = slice(cursor, cursor + per * kf)
                    cursor += per * kf

        self.contain_blocks = []
        for pi, part in enumerate(scenario.body_parts):
            for wi, canvas in enumerate(scenario.canvas):
                kind = _contain_kind_for(part.shape, canvas)
                if kind == ContainKind.ELL_IN_ELL:
                    fam = _ContainEllInEllFamily(self, pi, wi, cursor)
                    eq_families.append(fam)
                    self.contain_blocks.append(
                        {
                            "pair": (pi, wi),
                            "kind": kind,
                            "aux_offset": cursor,
                            "aux_per_step": fam.aux_per_step,
                        }
                    )
                    var_map[f"contain_b{pi}w{wi}"] = slice(
                        cursor, cursor + fam.aux_per_step * (kf + 1)
                    )
                    cursor += fam.aux_per_step * (kf + 1)
                else:
                    if kind == ContainKind.ELL_IN_POLY:
                        fam = _ContainEllInPolyFamily(self, pi, wi)
                    else:
                        fam = _ContainPolyFamily(self, pi, wi, kind)
                    ineq_families.append(fam)
                    self.contain_blocks.append(
                        {"pair": (pi, wi), "kind": kind, "aux_offset": None}
                    )

        self.layout = _Layout(
            n_state=n_state, n_control=n_control, tf_index=tf_index, n_vars=cursor
        )
        self.var_map = var_map
        self.eq_families = eq_families
        self.ineq_families = ineq_families
        self.n_eq = sum(f.n_rows for f in eq_families)
        self.n_ineq = sum(f.n_rows for f in ineq_families)
        self._build_bounds()

        counted = count_variables(scenario, formulation).total
        if counted != self.layout.n_vars:
            raise TranscriptionError(
                f"layout produced {self.layout.n_vars} variables, counting says {counted}"
            )

    def _build_bounds(self):
        scenario = self.scenario
        nx, kf = self.nx, self.kf
        lower = np.full(self.layout.n_vars, -np.inf)
        upper = np.full(self.layout.n_vars, np.inf)
        slo, shi = scenario.model.state_lower(), scenario.model.state_upper()
        ulo, uhi = scenario.model.input_lower(), scenario.model.input_upper()
        lower[: self.layout.n_state] = np.tile(slo, kf + 1)
        upper[: self.layout.n_state] = np.tile(shi, kf + 1)
        x0 = scenario.start.as_array(scenario.model.has_trailer)
        xf = scenario.goal.as_array(scenario.model.has_trailer)
        lower[:nx] = upper[:nx] = x0
        lower[self.layout.n_state - nx : self.layout.n_state] = xf
        upper[self.layout.n_state - nx : self.layout.n_state] = xf
        c0 = self.layout.n_state
        lower[c0 : c0 + 2 * kf] = np.tile(ulo, kf)
        upper[c0 : c0 + 2 * kf] = np.tile(uhi, kf)
        if self.layout.tf_index is not None:
            lower[self.layout.tf_index] = 1e-2
            # generous cap that keeps a bad basin from running off to huge
            # horizons where the integrator steps lose all meaning
            upper[self.layout.tf_index] = 20.0 * scenario.tf_guess
        for blk in self.dual_blocks:
            sl = self.var_map[f"dual_b{blk['pair'][0]}o{blk['pair'][1]}"]
            lower[sl] = 0.0
        for blk in self.contain_blocks:
            if blk["kind"] != ContainKind.ELL_IN_ELL:
                continue
            sl = self.var_map[f"contain_b{blk['pair'][0]}w{blk['pair'][1]}"]
            per = blk["aux_per_step"]
            base = np.arange(sl.start, sl.stop, per)
            lower[base] = 0.0  # the certificate scale
            # diagonal entries of the packed factor stay nonnegative
            for j, (r, c) in enumerate(zip(*np.tril_indices(3))):
                if r == c:
                    lower[base + 1 + j] = 0.0
        self.lower, self.upper = lower, upper

    # -- cost -------------------------------------------------------------

    def cost(self, z):
        ctx = _EvalContext(self, z)
        q = self.scenario.weight_inputs
        effort = float(np.sum(ctx.U**2 @ q))
        if self.scenario.free_time:
            dtau = 1.0 / self.kf
            return self.scenario.weight_time * ctx.tf + ctx.tf * dtau * effort
        return effort

    def cost_grad(self, z):
        ctx = _EvalContext(self, z)
        g = np.zeros(self.layout.n_vars)
        q = self.scenario.weight_inputs
        c0 = self.layout.n_state
        if self.scenario.free_time:
            dtau = 1.0 / self.kf
            g[c0 : c0 + 2 * self.kf] = (2.0 * ctx.tf * dtau * ctx.U * q[None, :]).ravel()
            g[self.layout.tf_index] = self.scenario.weight_time + dtau * float(
                np.sum(ctx.U**2 @ q)
            )
        else:
            g[c0 : c0 + 2 * self.kf] = (2.0 * ctx.U * q[None, :]).ravel()
        return g

    def cost_hess(self, z):
        """Dense cost Hessian; only control and horizon entries are nonzero."""
        ctx = _EvalContext(self, z)
        n = self.layout.n_vars
        H = np.zeros((n, n))
        q = self.scenario.weight_inputs
        c0 = self.layout.n_state
        idx = np.arange(c0, c0 + 2 * self.kf)
        if self.scenario.free_time:
            dtau = 1.0 / self.kf
            H[idx, idx] = np.tile(2.0 * ctx.tf * dtau * q, self.kf)
            cross = (2.0 * dtau * ctx.U * q[None, :]).ravel()
            ti = self.layout.tf_index
            H[idx, ti] = cross
            H[ti, idx] = cross
        else:
            H[idx, idx] = np.tile(2.0 * q, self.kf)
        return H

    # -- residual stacks ---------------------------------------------------

    def _residual_stack(self, families, z, ctx=None):
        if ctx is None:
            ctx = _EvalContext(self, z)
        if not families:
            return np.zeros(0)
        return np.concatenate([fam.residuals(ctx) for fam in families])

    def _jacobian_stack(self, families, n_rows, z, ctx=None):
        if ctx is None:
            ctx = _EvalContext(self, z)
        J = np.zeros((n_rows, self.layout.n_vars))
        off = 0
        for fam in families:
            fam.fill_jacobian(ctx, J, off)
            off += fam.n_rows
        return J

    def eq_residuals(self, z):
        return self._residual_stack(self.eq_families, z)

    def ineq_residuals(self, z):
        return self._residual_stack(self.ineq_families, z)

    def eq_jacobian(self, z):
        return self._jacobian_stack(self.eq_families, self.n_eq, z)

    def ineq_jacobian(self, z):
        return self._jacobian_stack(self.ineq_families, self.n_ineq, z)

    def full_eval(self, z, need_jac=True):
        """One-context evaluation of everything the solver needs."""
        ctx = _EvalContext(self, z)
        f = self.cost(z)
        ce = self._residual_stack(self.eq_families, z, ctx)
        ci = self._residual_stack(self.ineq_families, z, ctx)
        if not need_jac:
            return f, None, ce, None, ci, None
        g = self.cost_grad(z)
        Je = self._jacobian_stack(self.eq_families, self.n_eq, z, ctx)
        Ji = self._jacobian_stack(self.ineq_families, self.n_ineq, z, ctx)
        return f, g, ce, Je, ci, Ji


def build(
    scenario: Scenario,
    formulation: Optional[FormulationKind] = None,
    eps_guard: float = 1.0,
) -> NlpProblem:
    """Transcribe a scenario into a dense NLP.

    ``eps_guard`` sets the norm floor of each plane normal.  The default of
    one keeps the scale of the separation rows commensurate with geometry,
    so a feasibility tolerance on the residuals translates directly into a
    clearance tolerance in meters.  A vanishing normal would otherwise make
    every plane row vacuously small.
    """
    if formulation is None:
        formulation = scenario.formulation
    T = _Transcription(scenario, formulation, eps_guard)
    meta = {
        "scenario": scenario,
        "formulation": formulation,
        "layout": T.layout,
        "sep_blocks": T.sep_blocks,
        "dual_blocks": T.dual_blocks,
        "contain_blocks": T.contain_blocks,
        "transcription": T,
        "eps_guard": eps_guard,
    }
    return NlpProblem(
        n_vars=T.layout.n_vars,
        lower=T.lower,
        upper=T.upper,
        cost=T.cost,
        cost_grad=T.cost_grad,
        eq_residuals=T.eq_residuals,
        eq_jacobian=T.eq_jacobian,
        ineq_residuals=T.ineq_residuals,
        ineq_jacobian=T.ineq_jacobian,
        eq_families=[(f.label, f.n_rows) for f in T.eq_families],
        ineq_families=[(f.label, f.n_rows) for f in T.ineq_families],
        var_map=T.var_map,
        meta=meta,
        full_eval=T.full_eval,
        cost_hess=T.cost_hess,
    )


# ---------------------------------------------------------------------------
# unpack helpers


def unpack_states(nlp: NlpProblem, z: np.ndarray) -> np.ndarray:
    T = nlp.meta["transcription"]
    return np.asarray(z)[: T.layout.n_state].reshape(T.kf + 1, T.nx).copy()


def unpack_controls(nlp: NlpProblem, z: np.ndarray) -> np.ndarray:
    T = nlp.meta["transcription"]
    L = T.layout
    return np.asarray(z)[L.n_state : L.n_state + L.n_control].reshape(T.kf, 2).copy()


def unpack_tf(nlp: NlpProblem, z: np.ndarray) -> float:
    T = nlp.meta["transcription"]
    if T.layout.tf_index is None:
        return float(T.scenario.tf_fixed)
    return float(np.asarray(z)[T.layout.tf_index])


def unpack_pair_aux(nlp: NlpProblem, z: np.ndarray) -> dict:
    """Separating variables keyed by (part, obstacle), one row per step.

    Rows cover k = 1..k_f.  For the hyperplane formulation the value is
    (normal, offset) with shapes (k_f, 2) and (k_f, 1); for the multiplier
    formulation it is (body-face, obstacle-face) multiplier vectors.
    """
    T = nlp.meta["transcription"]
    z = np.asarray(z, dtype=float)
    out = {}
    for blk in nlp.meta["sep_blocks"]:
        a = z[blk["aux_offset"] : blk["aux_offset"] + T.kf * blk["aux_per_step"]]
        a = a.reshape(T.kf, blk["aux_per_step"])
        out[blk["pair"]] = (a[:, :2].copy(), a[:, 2:].copy())
    for blk in nlp.meta["dual_blocks"]:
        a = z[blk["aux_offset"] : blk["aux_offset"] + T.kf * blk["aux_per_step"]]
        a = a.reshape(T.kf, blk["aux_per_step"])
        nb = blk["n_body_faces"]
        out[blk["pair"]] = (a[:, :nb].copy(), a[:, nb:].copy())
    return out


def unpack_planes(nlp: NlpProblem, z: np.ndarray) -> list:
    """Per (pair, step) separating planes: (pi, oi, k, lam, mu)."""
    T = nlp.meta["transcription"]
    z = np.asarray(z)
    out = []
    for blk in T.sep_blocks:
        pi, oi = blk["pair"]
        per = blk["aux_per_step"]
        base = blk["aux_offset"]
        for k in range(1, T.kf + 1):
            a = z[base + (k - 1) * per : base + k * per]
            if blk["kind"] == SepKind.POLY_POLY_FIXED_COMPONENT:
                lam = np.array([a[0], 1.0])
                mu = float(a[1])
            elif blk["kind"] == SepKind.POLY_POLY_NORMALIZED:
                lam = a[:2].copy()
                mu = 1.0
            elif per >= 3:
                lam = a[:2].copy()
                mu = float(a[2])
            else:  # reduced point kind carries no offset
                lam = a[:2].copy()
                mu = 0.0
            out.append((pi, oi, k, lam, mu))
    return out


def unpack_duals(nlp: NlpProblem, z: np.ndarray) -> list:
    """Per (pair, step) multiplier vectors: (pi, oi, k, lam, mu)."""
    T = nlp.meta["transcription"]
    z = np.asarray(z)
    out = []
    for blk in T.dual_blocks:
        pi, oi = blk["pair"]
        per = blk["aux_per_step"]
        nb = blk["n_body_faces"]
        base = blk["aux_offset"]
        for k in range(1, T.kf + 1):
            a = z[base + (k - 1) * per : base + k * per]
            out.append((pi, oi, k, a[:nb].copy(), a[nb:].copy()))
    return out
