"""Vehicle kinematics: derivative values, sensitivities, and integration."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sepplan.dynamics import (
    DynamicsError,
    VehicleModelParams,
    VehicleState,
    joint_angle_residual,
    model_deriv,
    model_jacobians,
    rk4_step,
    rk4_step_with_jacobians,
    rollout,
    single_car_deriv,
    single_car_jacobians,
    tractor_trailer_deriv,
)

rng = np.random.default_rng(31)

CAR = VehicleModelParams(wheelbase=2.8)
TT = VehicleModelParams(wheelbase=2.8, trailer_length=6.1,
                        joint_angle_bound=np.pi / 3)


def random_state(params, spread=1.0):
    s = rng.uniform(-spread, spread, params.n_states)
    s[params.n_states - 1] = rng.uniform(-0.6, 0.6)  # steer well off 90 deg
    return s


def test_params_validation():
    with pytest.raises(DynamicsError):
        VehicleModelParams(wheelbase=0.0)
    with pytest.raises(DynamicsError):
        VehicleModelParams(wheelbase=2.8, trailer_length=-1.0)
    with pytest.raises(DynamicsError):
        VehicleModelParams(wheelbase=2.8, v_min=1.0, v_max=1.0)
    with pytest.raises(DynamicsError):
        VehicleModelParams(wheelbase=2.8, steer_bound=np.pi / 2)
    with pytest.raises(DynamicsError):
        VehicleModelParams(wheelbase=2.8, trailer_length=6.0,
                           joint_angle_bound=0.0)
    assert CAR.n_states == 5 and not CAR.has_trailer
    assert TT.n_states == 6 and TT.has_trailer


def test_bound_vectors_match_layout():
    lo, hi = CAR.state_lower(), CAR.state_upper()
    assert lo.shape == (5,) and hi.shape == (5,)
    assert lo[3] == CAR.v_min and hi[3] == CAR.v_max
    lo, hi = TT.state_lower(), TT.state_upper()
    assert lo.shape == (6,) and hi.shape == (6,)
    assert lo[4] == TT.v_min and hi[5] == TT.steer_bound
    assert np.all(CAR.input_lower() < CAR.input_upper())


def test_state_round_trip():
    st = VehicleState(x=1.0, y=2.0, yaw=0.3, speed=0.5, steer=-0.1)
    arr = st.as_array(has_trailer=False)
    assert arr.shape == (5,)
    assert VehicleState.from_array(arr) == st
    st2 = VehicleState(x=1.0, y=2.0, yaw=0.3, trailer_yaw=0.2,
                       speed=0.5, steer=-0.1)
    arr2 = st2.as_array(has_trailer=True)
    assert arr2.shape == (6,)
    assert VehicleState.from_array(arr2) == st2
    with pytest.raises(DynamicsError):
        st.as_array(has_trailer=True)
    with pytest.raises(DynamicsError):
        VehicleState.from_array(np.zeros(4))


def test_single_car_deriv_values():
    # straight ahead at unit speed
    xd = single_car_deriv(np.array([0, 0, 0, 1.0, 0]), np.array([0.2, -0.1]), CAR)
    assert np.allclose(xd, [1.0, 0.0, 0.0, 0.2, -0.1])
    # heading north, steering at 30 deg
    st = np.array([5.0, -2.0, np.pi / 2, 2.0, np.pi / 6])
    xd = single_car_deriv(st, np.zeros(2), CAR)
    assert xd[0] == pytest.approx(0.0, abs=1e-12)
    assert xd[1] == pytest.approx(2.0)
    assert xd[2] == pytest.approx(2.0 * np.tan(np.pi / 6) / 2.8)


def test_tractor_trailer_deriv_values():
    # aligned rig: no hitch motion
    st = np.array([0, 0, 0.4, 0.4, 1.5, 0.0])
    xd = tractor_trailer_deriv(st, np.zeros(2), TT)
    assert xd[3] == pytest.approx(0.0, abs=1e-12)
    # bent rig: trailer yaw rate = v sin(theta1 - theta2) / L2
    st = np.array([0, 0, 0.9, 0.4, 1.5, 0.0])
    xd = tractor_trailer_deriv(st, np.zeros(2), TT)
    assert xd[3] == pytest.approx(1.5 * np.sin(0.5) / 6.1)
    with pytest.raises(DynamicsError):
        tractor_trailer_deriv(st, np.zeros(2), CAR)


def test_batch_matches_single():
    for params in (CAR, TT):
        f = model_deriv(params)
        jac = model_jacobians(params)
        states = np.vstack([random_state(params) for _ in range(7)])
        controls = rng.uniform(-1, 1, (7, 2))
        batch = f(states, controls, params)
        Jx_b, Ju_b = jac(states, controls, params)
        for i in range(7):
            assert np.allclose(batch[i], f(states[i], controls[i], params))
            Jx, Ju = jac(states[i], controls[i], params)
            assert np.allclose(Jx_b[i], Jx) and np.allclose(Ju_b[i], Ju)


@pytest.mark.parametrize("params", [CAR, TT], ids=["car", "tt"])
def test_jacobians_match_fd(params):
    f = model_deriv(params)
    jac = model_jacobians(params)
    h = 1e-6
    for _ in range(40):
        x = random_state(params)
        u = rng.uniform(-1, 1, 2)
        Jx, Ju = jac(x, u, params)
        for c in range(x.shape[0]):
            d = np.zeros_like(x)
            d[c] = h
            fd = (f(x + d, u, params) - f(x - d, u, params)) / (2 * h)
            assert np.abs(Jx[:, c] - fd).max() <= 1e-6
        for c in range(2):
            d = np.zeros(2)
            d[c] = h
            fd = (f(x, u + d, params) - f(x, u - d, params)) / (2 * h)
            assert np.abs(Ju[:, c] - fd).max() <= 1e-6


@pytest.mark.parametrize("params", [CAR, TT], ids=["car", "tt"])
def test_rk4_against_reference_integrator(params):
    f = model_deriv(params)
    x0 = random_state(params, spread=0.5)
    u = np.array([0.4, 0.05])
    h = 0.05
    steps = 40
    traj = rollout(f, x0, np.tile(u, (steps, 1)), h, params)
    ref = solve_ivp(lambda t, x: f(x, u, params), (0.0, steps * h), x0,
                    rtol=1e-12, atol=1e-12, dense_output=True)
    for k in (10, 25, 40):
        assert np.abs(traj[k] - ref.sol(k * h)).max() <= 1e-8


def test_rk4_order():
    """Halving the step shrinks the one-step error about sixteenfold."""
    x0 = np.array([0.0, 0.0, 0.2, 1.0, 0.3])
    u = np.array([0.5, 0.1])
    ref = solve_ivp(lambda t, x: single_car_deriv(x, u, CAR), (0.0, 0.4), x0,
                    rtol=1e-13, atol=1e-13).y[:, -1]

    def err(h):
        steps = int(round(0.4 / h))
        return np.abs(rollout(single_car_deriv, x0, np.tile(u, (steps, 1)),
                              h, CAR)[-1] - ref).max()

    e1, e2 = err(0.1), err(0.05)
    assert 10.0 <= e1 / e2 <= 22.0


def test_tf_scale_matches_physical_step():
    """Scaling the field by s equals stepping s*h in physical time."""
    x0 = random_state(CAR, spread=0.5)
    u = np.array([0.3, -0.04])
    scaled = rk4_step(single_car_deriv, x0, u, 0.1, CAR, tf_scale=3.0)
    plain = rk4_step(single_car_deriv, x0, u, 0.3, CAR)
    assert np.allclose(scaled, plain, atol=1e-14)


@pytest.mark.parametrize("params", [CAR, TT], ids=["car", "tt"])
@pytest.mark.parametrize("tf_scale", [None, 2.5])
def test_rk4_jacobians_match_fd(params, tf_scale):
    f = model_deriv(params)
    jac = model_jacobians(params)
    h_fd = 1e-6
    x = random_state(params, spread=0.5)
    u = np.array([0.4, 0.06])
    x1, Jx, Ju, Jt = rk4_step_with_jacobians(f, jac, x, u, 0.2, params,
                                             tf_scale=tf_scale)
    assert np.allclose(x1, rk4_step(f, x, u, 0.2, params, tf_scale=tf_scale))
    for c in range(x.shape[0]):
        d = np.zeros_like(x)
        d[c] = h_fd
        fd = (rk4_step(f, x + d, u, 0.2, params, tf_scale=tf_scale)
              - rk4_step(f, x - d, u, 0.2, params, tf_scale=tf_scale)) / (2 * h_fd)
        assert np.abs(Jx[:, c] - fd).max() <= 1e-6
    for c in range(2):
        d = np.zeros(2)
        d[c] = h_fd
        fd = (rk4_step(f, x, u + d, 0.2, params, tf_scale=tf_scale)
              - rk4_step(f, x, u - d, 0.2, params, tf_scale=tf_scale)) / (2 * h_fd)
        assert np.abs(Ju[:, c] - fd).max() <= 1e-6
    if tf_scale is None:
        assert Jt is None
    else:
        fd = (rk4_step(f, x, u, 0.2, params, tf_scale=tf_scale + h_fd)
              - rk4_step(f, x, u, 0.2, params, tf_scale=tf_scale - h_fd)) / (2 * h_fd)
        assert np.abs(Jt - fd).max() <= 1e-6


def test_joint_angle_residual():
    bound = np.pi / 3
    inside = np.array([0, 0, 0.5, 0.2, 1.0, 0.0])
    assert joint_angle_residual(inside, bound).max() <= 0.0
    outside = np.array([0, 0, 1.5, 0.1, 1.0, 0.0])
    assert joint_angle_residual(outside, bound).max() > 0.0
    # symmetric in the sign of the hitch angle
    flipped = outside.copy()
    flipped[2], flipped[3] = outside[3], outside[2]
    assert np.allclose(np.sort(joint_angle_residual(outside, bound)),
                       np.sort(joint_angle_residual(flipped, bound)))


def test_invalid_inputs_rejected():
    x = np.zeros(5)
    with pytest.raises(DynamicsError):
        single_car_deriv(np.zeros(4), np.zeros(2), CAR)
    with pytest.raises(DynamicsError):
        single_car_deriv(np.array([0, 0, 0, 1.0, np.pi / 2]), np.zeros(2), CAR)
    with pytest.raises(DynamicsError):
        rk4_step(single_car_deriv, x, np.zeros(2), -0.1, CAR)
    with pytest.raises(DynamicsError):
        rk4_step(single_car_deriv, np.full(5, np.nan), np.zeros(2), 0.1, CAR)
    with pytest.raises(DynamicsError):
        single_car_jacobians(np.zeros((3, 4)), np.zeros((3, 2)), CAR)
