"""Augmented-Lagrangian solver over box constraints.

The outer loop follows the classic penalty/multiplier schedule: minimize
the bound-constrained augmented Lagrangian, update the multiplier
estimates, and raise the penalty only while feasibility is the
bottleneck.  An outer iteration is not allowed to exit with a worse
constraint violation than its predecessor unless both are already below
the feasibility tolerance; it retries with a stiffer penalty instead, so
the recorded feasibility trend is non-increasing down to that tolerance
on any run that converges.  Below it, exits are accepted as-is because
the inner solves only resolve the violation up to their own gradient
tolerance, and chasing noise there just inflates the penalty.  The default inner minimizer is a projected
Newton method
whose model Hessian is the exact cost curvature plus the Gauss-Newton
term of the penalty; a projected L-BFGS-B fallback is available via
``inner_method="lbfgs"``.

Everything is deterministic for a fixed seed; the only randomness is a
tiny one-shot perturbation used to escape a stalled line search.
"""

from __future__ import annotations

import csv
import enum
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import GeometryError
from .ocp import EvaluationError, NlpProblem


@dataclass
class SolverOptions:
    max_outer_iters: int = 40
    max_inner_iters: int = 400
    tol_feas: float = 1e-6
    tol_opt: float = 1e-5
    penalty_init: float = 0.1
    penalty_growth: float = 5.0
    penalty_max: float = 1e12
    inner_method: str = "newton"
    lbfgs_memory: int = 10
    armijo: float = 1e-4
    seed: int = 0
    derivative_check: bool = False


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    INFEASIBLE_STALL = "infeasible_stall"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass
class Solution:
    z: np.ndarray
    status: SolveStatus
    objective: float
    feas_norm: float
    opt_norm: float
    iterations: int
    outer_iterations: int
    wall_time: float
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED


def _full_eval_from_parts(nlp: NlpProblem) -> Callable:
    def full(z, need_jac=True):
        f = float(nlp.cost(z))
        ce = np.asarray(nlp.eq_residuals(z), dtype=float)
        ci = np.asarray(nlp.ineq_residuals(z), dtype=float)
        if not need_jac:
            return f, None, ce, None, ci, None
        g = np.asarray(nlp.cost_grad(z), dtype=float)
        Je = np.asarray(nlp.eq_jacobian(z), dtype=float)
        Ji = np.asarray(nlp.ineq_jacobian(z), dtype=float)
        return f, g, ce, Je, ci, Ji

    return full


class _AugmentedLagrangian:
    """Value/gradient of the AL merit for fixed multipliers and penalty."""

    def __init__(self, full_eval):
        self.full_eval = full_eval
        self.y_eq = None
        self.y_in = None
        self.rho = None
        self.evals = 0

    def set_state(self, y_eq, y_in, rho):
        self.y_eq, self.y_in, self.rho = y_eq, y_in, rho

    def value(self, z):
        try:
            f, _, ce, _, ci, _ = self.full_eval(z, need_jac=False)
        except (GeometryError, EvaluationError, FloatingPointError):
            return None
        self.evals += 1
        val = self._merit(f, ce, ci)
        return val if np.isfinite(val) else None

    def value_grad(self, z):
        try:
            f, g, ce, Je, ci, Ji = self.full_eval(z, need_jac=True)
        except (GeometryError, EvaluationError, FloatingPointError):
            return None, None
        self.evals += 1
        val = self._merit(f, ce, ci)
        rho = self.rho
        grad = g.copy()
        if ce.size:
            grad += Je.T @ (self.y_eq + rho * ce)
        if ci.size:
            grad += Ji.T @ np.maximum(0.0, self.y_in + rho * ci)
        if not (np.isfinite(val) and np.isfinite(grad).all()):
            return None, None
        return val, grad

    def value_grad_hess(self, z, cost_hess=None):
        """AL value, gradient and a Gauss-Newton model of its Hessian.

        The model is the exact cost Hessian plus rho J^T J over the rows
        whose penalty branch is active.  Constraint curvature is dropped,
        which keeps the model positive semidefinite; the damping in the
        Newton inner covers the rest.
        """
        try:
            f, g, ce, Je, ci, Ji = self.full_eval(z, need_jac=True)
        except (GeometryError, EvaluationError, FloatingPointError):
            return None, None, None
        self.evals += 1
        val = self._merit(f, ce, ci)
        rho = self.rho
        grad = g.copy()
        n = z.size
        if cost_hess is None:
            H = np.zeros((n, n))
        else:
            H = np.asarray(cost_hess(z), dtype=float).copy()
        if ce.size:
            grad += Je.T @ (self.y_eq + rho * ce)
            H += rho * (Je.T @ Je)
        if ci.size:
            q = self.y_in + rho * ci
            grad += Ji.T @ np.maximum(0.0, q)
            act = q > 0.0
            if act.any():
                Ja = Ji[act]
                H += rho * (Ja.T @ Ja)
        if not (np.isfinite(val) and np.isfinite(grad).all() and np.isfinite(H).all()):
            return None, None, None
        return val, grad, H

    def _merit(self, f, ce, ci):
        rho = self.rho
        val = f
        if ce.size:
            val += self.y_eq @ ce + 0.5 * rho * (ce @ ce)
        if ci.size:
            q = np.maximum(0.0, self.y_in + rho * ci)
            val += (q @ q - self.y_in @ self.y_in) / (2.0 * rho)
        return val


def _project(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def _minimize_box_lbfgs(merit, x0, scale, lower, upper, tol, max_iters, opts):
    """Bound-constrained minimization of the AL merit via L-BFGS-B.

    Works in variables scaled by ``scale`` so heterogeneous magnitudes
    (horizon length vs steering angles) do not wreck the quasi-Newton
    curvature estimates.  Non-finite merit values are mapped to a huge
    constant so the line search backs off instead of aborting.  Returns
    (x, n_iters, flag) with flag "stationary", "max_iters", "stalled",
    or "numeric".
    """
    from scipy.optimize import minimize

    def fun(w):
        val, grad = merit.value_grad(scale * w)
        if val is None:
            return 1e25, np.zeros_like(w)
        return val, scale * grad

    x0 = _project(np.asarray(x0, dtype=float).copy(), lower, upper)
    res = minimize(
        fun,
        x0 / scale,
        jac=True,
        method="L-BFGS-B",
        bounds=np.stack([lower / scale, upper / scale], axis=1),
        options={
            "maxiter": max_iters,
            "maxcor": opts.lbfgs_memory,
            "gtol": tol,
            "ftol": 1e-14,
            "maxls": 60,
        },
    )
    x = _project(scale * np.asarray(res.x, dtype=float), lower, upper)
    n_it = int(res.nit)
    if merit.value(x) is None:
        return x0, n_it, "numeric"
    if res.status == 0:
        return x, n_it, "stationary"
    if res.status == 1:
        return x, n_it, "max_iters"
    return x, n_it, "stalled"


def _minimize_box_newton(merit, cost_hess, x0, lower, upper, tol, max_iters, opts):
    """Projected Newton on the AL merit with a damped Gauss-Newton model.

    Variables sitting on a bound with the gradient pushing outward are
    frozen, the reduced system is solved by Cholesky with Marquardt-style
    diagonal damping, and the Armijo backtracking walks the projected arc.
    All the stiffness of the merit lives in rho J^T J, which the model
    carries exactly, so the step quality does not degrade as the penalty
    grows the way a quasi-Newton update does.
    """
    from scipy.linalg import cho_factor, cho_solve, LinAlgError

    x = _project(np.asarray(x0, dtype=float).copy(), lower, upper)
    val, grad, H = merit.value_grad_hess(x, cost_hess)
    if val is None:
        return x, 0, "numeric"
    damp = 1e-8
    n_it = 0
    for n_it in range(1, max_iters + 1):
        pg = float(np.max(np.abs(x - _project(x - grad, lower, upper))))
        if pg <= tol:
            return x, n_it, "stationary"
        fixed = (lower == upper)
        fixed |= (x <= lower + 1e-12) & (grad > 0.0)
        fixed |= (x >= upper - 1e-12) & (grad < 0.0)
        free = np.flatnonzero(~fixed)
        if free.size == 0:
            return x, n_it, "stationary"
        Hff = H[np.ix_(free, free)]
        gf = grad[free]
        diag = np.maximum(np.diag(Hff), 1e-8)
        step = None
        for _ in range(12):
            try:
                cf = cho_factor(Hff + damp * np.diag(diag), lower=True)
            except LinAlgError:
                damp = max(10.0 * damp, 1e-8)
                continue
            step = cho_solve(cf, -gf)
            break
        if step is None or not np.isfinite(step).all():
            return x, n_it, "stalled"
        p = np.zeros_like(x)
        p[free] = step
        alpha = 1.0
        accepted = False
        for _ in range(30):
            x_new = _project(x + alpha * p, lower, upper)
            dx = x_new - x
            slope = float(grad @ dx)
            v_new = merit.value(x_new)
            if v_new is not None and v_new <= val + opts.armijo * min(slope, 0.0):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            damp *= 100.0
            if damp > 1e10:
                return x, n_it, "stalled"
            continue
        out = merit.value_grad_hess(x_new, cost_hess)
        if out[0] is None:
            return x, n_it, "stalled"
        x = x_new
        val, grad, H = out
        if alpha == 1.0:
            damp = max(0.25 * damp, 1e-10)
        elif alpha < 0.25:
            damp = min(4.0 * damp, 1e8)
    return x, n_it, "max_iters"


def solve(
    nlp: NlpProblem,
    z0: np.ndarray,
    options: Optional[SolverOptions] = None,
    log_stream=None,
) -> Solution:
    """Run the augmented-Lagrangian loop from a warm start."""
    opts = options or SolverOptions()
    if opts.derivative_check:
        report = check_derivatives(nlp, z0, seed=opts.seed)
        if report["max_error"] > 1e-4:
            raise EvaluationError(
                f"derivative audit failed: worst family {report['worst_family']} "
                f"at {report['max_error']:.3e}"
            )
    t_start = time.perf_counter()
    full = nlp.full_eval or _full_eval_from_parts(nlp)
    merit = _AugmentedLagrangian(full)
    rng = np.random.default_rng(opts.seed)
    z = _project(np.asarray(z0, dtype=float).copy(), nlp.lower, nlp.upper)
    scale = np.maximum(1.0, np.abs(z))
    n_eq, n_in = nlp.n_eq, nlp.n_ineq
    y_eq = np.zeros(n_eq)
    y_in = np.zeros(n_in)
    y_cap = 1e9
    rho = opts.penalty_init
    omega = 1.0
    history = []
    total_inner = 0
    status = SolveStatus.MAX_ITERS
    message = "outer iteration budget exhausted"
    writer = None
    if log_stream is not None:
        writer = csv.writer(log_stream)
        writer.writerow(["outer", "inner_iters", "rho", "violation", "stationarity", "objective"])

    def run_inner(z_cur, tol):
        if opts.inner_method == "newton":
            return _minimize_box_newton(
                merit,
                getattr(nlp, "cost_hess", None),
                z_cur,
                nlp.lower,
                nlp.upper,
                tol,
                opts.max_inner_iters,
                opts,
            )
        # quasi-Newton iterations are two orders of magnitude cheaper,
        # so the shared budget is scaled up rather than exposed twice
        return _minimize_box_lbfgs(
            merit, z_cur, scale, nlp.lower, nlp.upper, tol,
            15 * opts.max_inner_iters, opts,
        )

    f = float("nan")
    viol = float("inf")
    pg_norm = float("inf")
    sigma_prev = float("inf")
    viol_exit = float("inf")
    stalls = 0
    fail = None
    for outer in range(opts.max_outer_iters):
        inner_tol = max(omega, 0.5 * opts.tol_opt)
        inner_iters = 0
        # an outer iteration only exits once its violation is no worse than
        # the previous exit; retries stiffen the penalty on unchanged
        # multipliers, keeping the recorded feasibility trend monotone
        for attempt in range(8):
            merit.set_state(y_eq, y_in, rho)
            z, n_it, flag = run_inner(z, inner_tol)
            inner_iters += n_it
            total_inner += n_it
            if flag == "numeric":
                fail = (SolveStatus.NUMERIC_FAILURE, "inner solve hit non-finite values")
                break
            if flag == "stalled":
                # nudge off the stalled point once; repeated stalls end the run
                stalls += 1
                if stalls > 3:
                    fail = (SolveStatus.NUMERIC_FAILURE, "inner solve stalled repeatedly")
                    break
                z = _project(
                    z + 1e-7 * (1.0 + np.abs(z)) * rng.standard_normal(z.size),
                    nlp.lower,
                    nlp.upper,
                )
            try:
                f, g, ce, Je, ci, Ji = full(z, need_jac=True)
            except (GeometryError, EvaluationError, FloatingPointError) as exc:
                fail = (SolveStatus.NUMERIC_FAILURE, f"evaluation failed after inner solve: {exc}")
                break
            if not np.isfinite(f):
                fail = (SolveStatus.NUMERIC_FAILURE, "objective became non-finite")
                break
            viol_eq = np.max(np.abs(ce)) if ce.size else 0.0
            viol_in = np.max(np.maximum(ci, 0.0)) if ci.size else 0.0
            viol = max(viol_eq, viol_in)
            if viol <= max(viol_exit + 1e-12, opts.tol_feas):
                break
            rho *= opts.penalty_growth
            if rho > opts.penalty_max:
                fail = (SolveStatus.INFEASIBLE_STALL, "penalty limit reached without feasibility")
                break
        if fail is not None:
            status, message = fail
            break
        viol_exit = min(viol_exit, viol)
        # progress measure that also accounts for complementarity slack
        sigma = viol_eq
        if ci.size:
            sigma = max(sigma, float(np.max(np.abs(np.maximum(ci, -y_in / rho)))))
        # first-order multiplier estimates, safeguarded
        y_eq = np.clip(y_eq + rho * ce, -y_cap, y_cap) if ce.size else y_eq
        y_in = np.clip(np.maximum(0.0, y_in + rho * ci), 0.0, y_cap) if ci.size else y_in
        gL = g.copy()
        if ce.size:
            gL += Je.T @ y_eq
        if ci.size:
            gL += Ji.T @ y_in
        pg_norm = float(np.max(np.abs(z - _project(z - gL, nlp.lower, nlp.upper))))
        comp = float(np.max(np.abs(y_in * ci))) if ci.size else 0.0
        history.append(
            {
                "outer": outer,
                "inner_iters": inner_iters,
                "rho": rho,
                "violation": viol,
                "stationarity": pg_norm,
                "objective": f,
            }
        )
        if writer:
            writer.writerow([outer, inner_iters, rho, viol, pg_norm, f])
        if viol <= opts.tol_feas and pg_norm <= opts.tol_opt and comp <= 10.0 * opts.tol_opt:
            status = SolveStatus.CONVERGED
            message = "feasible and stationary to tolerance"
            break
        # raise the penalty only while feasibility is the bottleneck: once
        # the violation reaches tolerance the multiplier updates finish the
        # job and a huge penalty would only wreck the inner conditioning
        if viol > opts.tol_feas and sigma > 0.5 * sigma_prev:
            rho *= opts.penalty_growth
            if rho > opts.penalty_max:
                status = SolveStatus.INFEASIBLE_STALL
                message = "penalty limit reached without feasibility"
                break
        sigma_prev = min(sigma, sigma_prev)
        omega = max(0.1 * omega, 0.5 * opts.tol_opt)
    wall = time.perf_counter() - t_start
    return Solution(
        z=z,
        status=status,
        objective=f,
        feas_norm=viol,
        opt_norm=pg_norm,
        iterations=total_inner,
        outer_iterations=len(history),
        wall_time=wall,
        message=message,
        history=history,
    )


def check_derivatives(
    nlp: NlpProblem,
    z0: np.ndarray,
    seed: int = 0,
    n_points: int = 200,
    step: float = 1e-6,
    spread: float = 1e-3,
) -> dict:
    """Directional finite-difference audit of every residual family.

    At each sampled point one random direction is probed with a central
    difference of the stacked residuals and compared against the assembled
    Jacobian-vector product.  Returns the worst relative error per family.
    """
    rng = np.random.default_rng(seed)
    z0 = np.asarray(z0, dtype=float)
    full = nlp.full_eval or _full_eval_from_parts(nlp)
    fam_errors = {label: 0.0 for label, _ in nlp.eq_families}
    fam_errors.update({label: 0.0 for label, _ in nlp.ineq_families})
    fam_errors["cost"] = 0.0

    def fam_slices(families):
        out = []
        off = 0
        for label, n in families:
            out.append((label, slice(off, off + n)))
            off += n
        return out

    eq_sl = fam_slices(nlp.eq_families)
    in_sl = fam_slices(nlp.ineq_families)
    checked = 0
    attempts = 0
    while checked < n_points and attempts < 20 * n_points:
        attempts += 1
        z = z0 + spread * rng.standard_normal(z0.size)
        d = rng.standard_normal(z0.size)
        d /= np.linalg.norm(d)
        try:
            _, g, ce0, Je, ci0, Ji = full(z, need_jac=True)
            fp, _, cep, _, cip, _ = full(z + step * d, need_jac=False)
            fm, _, cem, _, cim, _ = full(z - step * d, need_jac=False)
        except (GeometryError, EvaluationError, FloatingPointError):
            continue
        stack = [
            np.concatenate([[fp], cep, cip]),
            np.concatenate([[fm], cem, cim]),
        ]
        if not all(np.isfinite(s).all() for s in stack):
            continue
        checked += 1
        fd_cost = (fp - fm) / (2.0 * step)
        an_cost = g @ d
        fam_errors["cost"] = max(
            fam_errors["cost"],
            abs(fd_cost - an_cost) / max(1.0, abs(fd_cost), abs(an_cost)),
        )
        fd_eq = (cep - cem) / (2.0 * step)
        an_eq = Je @ d
        for label, sl in eq_sl:
            num = np.abs(fd_eq[sl] - an_eq[sl])
            den = np.maximum(1.0, np.maximum(np.abs(fd_eq[sl]), np.abs(an_eq[sl])))
            if num.size:
                fam_errors[label] = max(fam_errors[label], float(np.max(num / den)))
        fd_in = (cip - cim) / (2.0 * step)
        an_in = Ji @ d
        for label, sl in in_sl:
            num = np.abs(fd_in[sl] - an_in[sl])
            den = np.maximum(1.0, np.maximum(np.abs(fd_in[sl]), np.abs(an_in[sl])))
            if num.size:
                fam_errors[label] = max(fam_errors[label], float(np.max(num / den)))
    if checked < n_points:
        raise EvaluationError(
            f"derivative audit could only evaluate {checked} of {n_points} points"
        )
    worst = max(fam_errors, key=fam_errors.get)
    return {
        "per_family": fam_errors,
        "max_error": fam_errors[worst],
        "worst_family": worst,
        "n_points": checked,
    }
