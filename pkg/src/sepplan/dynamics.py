"""Vehicle kinematics (single car and tractor-trailer) and RK4 stepping.

State layouts, rear-axle reference point:

* single car:       (x, y, theta1, v, delta)           5 states
* tractor-trailer:  (x, y, theta1, theta2, v, delta)   6 states

with controls (a, omega) = (acceleration, steering rate). All functions
accept a single state vector or a batch of states stacked along the first
axis and return matching shapes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

RAD_PER_DEG = np.pi / 180.0
# Keep tan(delta) away from the vertical-steer singularity.
_STEER_SINGULARITY_MARGIN = 1e-9


class DynamicsError(ValueError):
    """Invalid model parameters, states, or controls."""


@dataclass
class VehicleModelParams:
    """Kinematic model constants and box bounds (SI units, radians)."""

    wheelbase: float
    trailer_length: Optional[float] = None
    yaw_bound: float = np.pi
    trailer_yaw_bound: float = np.pi
    v_min: float = -5.0 / 3.6
    v_max: float = 5.0 / 3.6
    steer_bound: float = 40.0 * RAD_PER_DEG
    a_min: float = -1.0
    a_max: float = 1.0
    steer_rate_bound: float = 5.0 * RAD_PER_DEG
    joint_angle_bound: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.wheelbase) and self.wheelbase > 0.0):
            raise DynamicsError(f"wheelbase must be positive, got {self.wheelbase}")
        if self.trailer_length is not None and self.trailer_length <= 0.0:
            raise DynamicsError(
                f"trailer_length must be positive, got {self.trailer_length}")
        if self.v_min >= self.v_max:
            raise DynamicsError("v_min must be below v_max")
        if self.a_min >= self.a_max:
            raise DynamicsError("a_min must be below a_max")
        for name in ("yaw_bound", "trailer_yaw_bound", "steer_bound",
                     "steer_rate_bound"):
            if getattr(self, name) <= 0.0:
                raise DynamicsError(f"{name} must be positive")
        if self.steer_bound >= np.pi / 2:
            raise DynamicsError("steer bound must stay below 90 deg")
        if self.joint_angle_bound is not None and self.joint_angle_bound <= 0.0:
            raise DynamicsError("joint_angle_bound must be positive")

    @property
    def has_trailer(self) -> bool:
        return self.trailer_length is not None

    @property
    def n_states(self) -> int:
        return 6 if self.has_trailer else 5

    def state_lower(self) -> np.ndarray:
        if self.has_trailer:
            return np.array([-np.inf, -np.inf, -self.yaw_bound,
                             -self.trailer_yaw_bound, self.v_min,
                             -self.steer_bound])
        return np.array([-np.inf, -np.inf, -self.yaw_bound, self.v_min,
                         -self.steer_bound])

    def state_upper(self) -> np.ndarray:
        if self.has_trailer:
            return np.array([np.inf, np.inf, self.yaw_bound,
                             self.trailer_yaw_bound, self.v_max,
                             self.steer_bound])
        return np.array([np.inf, np.inf, self.yaw_bound, self.v_max,
                         self.steer_bound])

    def input_lower(self) -> np.ndarray:
        return np.array([self.a_min, -self.steer_rate_bound])

    def input_upper(self) -> np.ndarray:
        return np.array([self.a_max, self.steer_rate_bound])


@dataclass
class VehicleState:
    """Named state for scenario endpoints; trailer yaw optional."""

    x: float
    y: float
    yaw: float
    speed: float
    steer: float
    trailer_yaw: Optional[float] = None

    def as_array(self, has_trailer: bool) -> np.ndarray:
        if has_trailer:
            if self.trailer_yaw is None:
                raise DynamicsError("tractor-trailer state needs trailer_yaw")
            return np.array([self.x, self.y, self.yaw, self.trailer_yaw,
                             self.speed, self.steer])
        return np.array([self.x, self.y, self.yaw, self.speed, self.steer])

    @classmethod
    def from_array(cls, xi: np.ndarray) -> "VehicleState":
        xi = np.asarray(xi, dtype=float)
        if xi.shape == (6,):
            return cls(x=xi[0], y=xi[1], yaw=xi[2], trailer_yaw=xi[3],
                       speed=xi[4], steer=xi[5])
        if xi.shape == (5,):
            return cls(x=xi[0], y=xi[1], yaw=xi[2], speed=xi[3], steer=xi[4])
        raise DynamicsError(f"state must have 5 or 6 entries, got {xi.shape}")


@dataclass
class ControlInput:
    """Acceleration and steering-rate pair."""

    a: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.omega])


def _batch(arr, width: int, name: str):
    a = np.asarray(arr, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != width:
        raise DynamicsError(f"{name} must have {width} entries, got {a.shape}")
    return a, single


def _check_steer(delta: np.ndarray):
    if np.any(np.abs(np.abs(delta) - np.pi / 2) < _STEER_SINGULARITY_MARGIN):
        raise DynamicsError("steer angle at the tan() singularity")


def single_car_deriv(state, control, params: VehicleModelParams) -> np.ndarray:
    """Kinematic car xdot = (v cos, v sin, v tan(delta)/L1, a, omega)."""
    s, single = _batch(state, 5, "state")
    u, _ = _batch(control, 2, "control")
    yaw, v, st = s[:, 2], s[:, 3], s[:, 4]
    _check_steer(st)
    out = np.stack([v * np.cos(yaw), v * np.sin(yaw),
                    v * np.tan(st) / params.wheelbase, u[:, 0], u[:, 1]], axis=1)
    return out[0] if single else out


def single_car_jacobians(state, control, params: VehicleModelParams):
    """(d xdot / d state, d xdot / d control), batched."""
    s, single = _batch(state, 5, "state")
    m = s.shape[0]
    yaw, v, st = s[:, 2], s[:, 3], s[:, 4]
    _check_steer(st)
    Jx = np.zeros((m, 5, 5))
    Ju = np.zeros((m, 5, 2))
    cos_y, sin_y = np.cos(yaw), np.sin(yaw)
    Jx[:, 0, 2] = -v * sin_y
    Jx[:, 0, 3] = cos_y
    Jx[:, 1, 2] = v * cos_y
    Jx[:, 1, 3] = sin_y
    Jx[:, 2, 3] = np.tan(st) / params.wheelbase
    Jx[:, 2, 4] = v / (np.cos(st) ** 2 * params.wheelbase)
    Ju[:, 3, 0] = 1.0
    Ju[:, 4, 1] = 1.0
    return (Jx[0], Ju[0]) if single else (Jx, Ju)


def tractor_trailer_deriv(state, control, params: VehicleModelParams) -> np.ndarray:
    """Articulated kinematics; trailer yaw driven by the hitch-angle term."""
    if not params.has_trailer:
        raise DynamicsError("params carry no trailer length")
    s, single = _batch(state, 6, "state")
    u, _ = _batch(control, 2, "control")
    yaw, tyaw, v, st = s[:, 2], s[:, 3], s[:, 4], s[:, 5]
    _check_steer(st)
    out = np.stack([
        v * np.cos(yaw),
        v * np.sin(yaw),
        v * np.tan(st) / params.wheelbase,
        v * np.sin(yaw - tyaw) / params.trailer_length,
        u[:, 0],
        u[:, 1],
    ], axis=1)
    return out[0] if single else out


def tractor_trailer_jacobians(state, control, params: VehicleModelParams):
    """(d xdot / d state, d xdot / d control), batched."""
    if not params.has_trailer:
        raise DynamicsError("params carry no trailer length")
    s, single = _batch(state, 6, "state")
    m = s.shape[0]
    yaw, tyaw, v, st = s[:, 2], s[:, 3], s[:, 4], s[:, 5]
    _check_steer(st)
    Jx = np.zeros((m, 6, 6))
    Ju = np.zeros((m, 6, 2))
    cos_y, sin_y = np.cos(yaw), np.sin(yaw)
    cos_d, sin_d = np.cos(yaw - tyaw), np.sin(yaw - tyaw)
    L1, L2 = params.wheelbase, params.trailer_length
    Jx[:, 0, 2] = -v * sin_y
    Jx[:, 0, 4] = cos_y
    Jx[:, 1, 2] = v * cos_y
    Jx[:, 1, 4] = sin_y
    Jx[:, 2, 4] = np.tan(st) / L1
    Jx[:, 2, 5] = v / (np.cos(st) ** 2 * L1)
    Jx[:, 3, 2] = v * cos_d / L2
    Jx[:, 3, 3] = -v * cos_d / L2
    Jx[:, 3, 4] = sin_d / L2
    Ju[:, 4, 0] = 1.0
    Ju[:, 5, 1] = 1.0
    return (Jx[0], Ju[0]) if single else (Jx, Ju)


def model_deriv(params: VehicleModelParams):
    """Derivative function matching the parameter set."""
    return tractor_trailer_deriv if params.has_trailer else single_car_deriv


def model_jacobians(params: VehicleModelParams):
    return tractor_trailer_jacobians if params.has_trailer else single_car_jacobians


def rk4_step(deriv, state, control, h: float, params: VehicleModelParams,
             tf_scale: Optional[float] = None) -> np.ndarray:
    """One classical RK4 step of xdot = s * f(x, u) with s = tf_scale or 1.

    With ``tf_scale`` set, ``h`` is a normalized-time step and the physical
    duration of the step is ``tf_scale * h``.
    """
    nx = 6 if params.has_trailer else 5
    x, single = _batch(state, nx, "state")
    u, _ = _batch(control, 2, "control")
    if not (np.isfinite(x).all() and np.isfinite(u).all()):
        raise DynamicsError("non-finite state or control")
    if not np.isfinite(h) or h <= 0.0:
        raise DynamicsError(f"step size must be positive, got {h}")
    s = 1.0 if tf_scale is None else float(tf_scale)
    k1 = s * deriv(x, u, params)
    k2 = s * deriv(x + 0.5 * h * k1, u, params)
    k3 = s * deriv(x + 0.5 * h * k2, u, params)
    k4 = s * deriv(x + h * k3, u, params)
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out[0] if single else out


def rk4_step_with_jacobians(deriv, jac, state, control, h: float,
                            params: VehicleModelParams,
                            tf_scale: Optional[float] = None):
    """RK4 step plus exact sensitivities, batched.

    Returns (x_next, J_state, J_control, J_tf) where J_tf is None unless
    ``tf_scale`` is given; shapes are (m, nx), (m, nx, nx), (m, nx, nu),
    (m, nx).
    """
    nx = 6 if params.has_trailer else 5
    x, single = _batch(state, nx, "state")
    u, _ = _batch(control, 2, "control")
    m = x.shape[0]
    s = 1.0 if tf_scale is None else float(tf_scale)
    eye = np.broadcast_to(np.eye(nx), (m, nx, nx))

    ks, As, Bs, ds = [], [], [], []
    # Stage states with chain-rule propagation of all three sensitivities.
    offsets = (0.0, 0.5 * h, 0.5 * h, h)
    for i, c in enumerate(offsets):
        if i == 0:
            xs, Jxs, Jus, dts = x, eye, 0.0, 0.0
        else:
            xs = x + c * ks[i - 1]
            Jxs = eye + c * As[i - 1]
            Jus = c * Bs[i - 1]
            dts = c * ds[i - 1]
        f = deriv(xs, u, params)
        fx, fu = jac(xs, u, params)
        ks.append(s * f)
        As.append(s * np.einsum("mij,mjk->mik", fx, Jxs))
        if i == 0:
            Bs.append(s * fu)
            ds.append(f)
        else:
            Bs.append(s * (np.einsum("mij,mjk->mik", fx, Jus) + fu))
            ds.append(f + s * np.einsum("mij,mj->mi", fx, dts))

    x_next = x + (h / 6.0) * (ks[0] + 2 * ks[1] + 2 * ks[2] + ks[3])
    J_state = eye + (h / 6.0) * (As[0] + 2 * As[1] + 2 * As[2] + As[3])
    J_control = (h / 6.0) * (Bs[0] + 2 * Bs[1] + 2 * Bs[2] + Bs[3])
    J_tf = None
    if tf_scale is not None:
        J_tf = (h / 6.0) * (ds[0] + 2 * ds[1] + 2 * ds[2] + ds[3])
    if single:
        return (x_next[0], J_state[0], J_control[0],
                None if J_tf is None else J_tf[0])
    return x_next, J_state, J_control, J_tf


def rollout(deriv, x0: np.ndarray, controls: np.ndarray, h: float,
            params: VehicleModelParams,
            tf_scale: Optional[float] = None) -> np.ndarray:
    """Integrate a control sequence; returns states stacked (k_f+1, nx)."""
    x0 = np.asarray(x0, dtype=float)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    out = np.empty((controls.shape[0] + 1, x0.shape[0]))
    out[0] = x0
    for k in range(controls.shape[0]):
        out[k + 1] = rk4_step(deriv, out[k], controls[k], h, params, tf_scale)
    return out


def joint_angle_residual(state, bound: float = np.pi / 3) -> np.ndarray:
    """Hitch-angle box |theta1 - theta2| <= bound as two <=0 rows."""
    s, single = _batch(state, 6, "state")
    d = s[:, 2] - s[:, 3]
    out = np.stack([d - bound, -d - bound], axis=1)
    return out[0] if single else out
