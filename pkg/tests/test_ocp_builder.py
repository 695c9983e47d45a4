"""Transcription layout, variable budgets, and residual wiring."""

from pathlib import Path

import numpy as np
import pytest

from sepplan.baseline_dual import FormulationKind, UnsupportedCombinationError
from sepplan.dynamics import VehicleModelParams, VehicleState
from sepplan.geometry import Ellipsoid, Pose, box2d
from sepplan.ocp import (
    BodyPart,
    Obstacle,
    Scenario,
    TranscriptionError,
    build,
    count_variables,
    eval_residuals,
    unpack_controls,
    unpack_pair_aux,
    unpack_states,
    unpack_tf,
)
from sepplan.scenario_io import load_scenario

rng = np.random.default_rng(41)
SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

CAR = VehicleModelParams(wheelbase=2.8)


def small_scenario(formulation=FormulationKind.HYPERPLANE, obstacle_shape=None,
                   free_time=True, k_f=4):
    if obstacle_shape is None:
        obstacle_shape = box2d(4.0, 6.0, -1.0, 1.0)
    return Scenario(
        name="unit",
        model=CAR,
        body_parts=[BodyPart(shape=box2d(-1.0, 3.0, -0.9, 0.9))],
        obstacles=[Obstacle(shape=obstacle_shape)],
        canvas=[box2d(-10.0, 14.0, -8.0, 8.0)],
        start=VehicleState(x=0.0, y=4.0, yaw=0.0, speed=0.0, steer=0.0),
        goal=VehicleState(x=8.0, y=4.0, yaw=0.0, speed=0.0, steer=0.0),
        k_f=k_f,
        free_time=free_time,
        tf_fixed=None if free_time else 12.0,
        tf_guess=10.0,
        formulation=formulation,
    )


def test_count_component_arithmetic():
    sc = small_scenario(k_f=6)
    counts = count_variables(sc)
    assert counts.n_state == 5 * 7
    assert counts.n_control == 2 * 6
    assert counts.n_time == 1
    assert counts.n_separation_aux == 3 * 6  # one plane per pair and step
    assert counts.n_containment_aux == 0
    assert counts.total == 35 + 12 + 1 + 18
    dual = count_variables(sc, FormulationKind.DUAL)
    assert dual.n_separation_aux == 8 * 6
    assert dual.total > counts.total


def test_count_fixed_time_drops_tf():
    sc = small_scenario(free_time=False)
    assert count_variables(sc).n_time == 0


def test_count_ell_in_ell_containment_aux():
    sc = small_scenario()
    sc.body_parts = [BodyPart(shape=Ellipsoid(E=np.eye(2) / 4.0, e=np.zeros(2)))]
    sc.canvas = [Ellipsoid(E=np.eye(2) / 100.0, e=np.zeros(2))]
    counts = count_variables(sc)
    assert counts.n_containment_aux == 7 * (sc.k_f + 1)


def test_parking_variable_budgets():
    """Variable totals for the shipped parking set, both formulations."""
    expect_hyp = {1: 306, 2: 396, 3: 486, 4: 576}
    expect_dual = {1: 456, 2: 696, 3: 936, 4: 1176}
    for n in (1, 2, 3, 4):
        sc = load_scenario(SCENARIO_DIR / f"parking_single_car_{n}obs.json")
        hyp = count_variables(sc, FormulationKind.HYPERPLANE).total
        dual = count_variables(sc, FormulationKind.DUAL).total
        assert hyp == expect_hyp[n], (n, hyp)
        assert dual == expect_dual[n], (n, dual)


def test_every_shipped_scenario_is_cheaper_with_planes():
    for path in sorted(SCENARIO_DIR.glob("*.json")):
        if path.name.startswith("suite"):
            continue
        sc = load_scenario(path)
        hyp = count_variables(sc, FormulationKind.HYPERPLANE)
        dual = count_variables(sc, FormulationKind.DUAL)
        assert hyp.n_separation_aux < dual.n_separation_aux, path.name
        assert hyp.total < dual.total, path.name


def test_build_layout_partitions_variables():
    sc = small_scenario()
    nlp = build(sc)
    assert nlp.n_vars == count_variables(sc).total
    covered = np.zeros(nlp.n_vars, dtype=int)
    for sl in nlp.var_map.values():
        covered[sl] += 1
    assert (covered == 1).all()
    # state and control bounds flow through to the variable box
    assert nlp.lower[3] == CAR.v_min and nlp.upper[3] == CAR.v_max
    tf_sl = nlp.var_map["t_f"]
    assert nlp.lower[tf_sl][0] > 0.0


def test_build_matches_count_for_dual():
    sc = small_scenario(formulation=FormulationKind.DUAL)
    nlp = build(sc)
    assert nlp.n_vars == count_variables(sc).total
    assert any(lbl.startswith("dual") for lbl, _ in nlp.eq_families)


def test_build_rejects_unsupported():
    ball = Ellipsoid(E=np.eye(2), e=np.array([5.0, 0.0]))
    with pytest.raises(UnsupportedCombinationError):
        build(small_scenario(formulation=FormulationKind.DUAL,
                             obstacle_shape=ball))
    with pytest.raises(UnsupportedCombinationError):
        build(small_scenario(formulation=FormulationKind.FARKAS))


def test_residual_shapes_and_family_totals():
    sc = small_scenario()
    nlp = build(sc)
    z = rng.uniform(-0.5, 0.5, nlp.n_vars)
    eq, ineq = eval_residuals(nlp, z)
    assert eq.shape == (nlp.n_eq,)
    assert ineq.shape == (nlp.n_ineq,)
    assert nlp.n_eq == sum(n for _, n in nlp.eq_families)
    assert nlp.n_ineq == sum(n for _, n in nlp.ineq_families)
    J_eq = nlp.eq_jacobian(z)
    J_ineq = nlp.ineq_jacobian(z)
    assert J_eq.shape == (nlp.n_eq, nlp.n_vars)
    assert J_ineq.shape == (nlp.n_ineq, nlp.n_vars)


@pytest.mark.parametrize("formulation",
                         [FormulationKind.HYPERPLANE, FormulationKind.DUAL])
def test_jacobians_match_fd_smoke(formulation):
    """Directional FD over every residual family on a few random points."""
    sc = small_scenario(formulation=formulation)
    nlp = build(sc)
    h = 1e-6
    for _ in range(5):
        z = rng.uniform(0.2, 0.8, nlp.n_vars)
        d = rng.standard_normal(nlp.n_vars)
        d /= np.linalg.norm(d)
        eq_p, ineq_p = eval_residuals(nlp, z + h * d)
        eq_m, ineq_m = eval_residuals(nlp, z - h * d)
        assert np.abs(nlp.eq_jacobian(z) @ d - (eq_p - eq_m) / (2 * h)).max() <= 1e-5
        assert np.abs(nlp.ineq_jacobian(z) @ d
                      - (ineq_p - ineq_m) / (2 * h)).max() <= 1e-5
        g = nlp.cost_grad(z)
        fd = (nlp.cost(z + h * d) - nlp.cost(z - h * d)) / (2 * h)
        assert abs(g @ d - fd) <= 1e-5


def test_boundary_rows_pin_endpoints():
    sc = small_scenario()
    nlp = build(sc)
    z = rng.uniform(-1, 1, nlp.n_vars)
    states = unpack_states(nlp, z)
    eq, _ = eval_residuals(nlp, z)
    nb = 2 * CAR.n_states
    start = sc.start.as_array(False)
    goal = sc.goal.as_array(False)
    assert np.allclose(eq[:nb], np.concatenate([states[0] - start,
                                                states[-1] - goal]))


def test_unpack_round_trip():
    sc = small_scenario()
    nlp = build(sc)
    z = rng.uniform(-1, 1, nlp.n_vars)
    states = unpack_states(nlp, z)
    controls = unpack_controls(nlp, z)
    assert states.shape == (sc.k_f + 1, 5)
    assert controls.shape == (sc.k_f, 2)
    assert np.allclose(states.ravel(), z[:25])
    assert unpack_tf(nlp, z) == z[nlp.var_map["t_f"]][0]
    aux = unpack_pair_aux(nlp, z)
    lam, mu = aux[(0, 0)]
    assert lam.shape == (sc.k_f, 2) and mu.shape == (sc.k_f, 1)
    sl = nlp.var_map["sep_b0o0"]
    assert np.allclose(np.hstack([lam, mu]).ravel(), z[sl])


def test_unpack_tf_fixed_time():
    sc = small_scenario(free_time=False)
    nlp = build(sc)
    z = rng.uniform(-1, 1, nlp.n_vars)
    assert unpack_tf(nlp, z) == sc.tf_fixed


def test_scenario_validation():
    with pytest.raises(TranscriptionError):
        small_scenario(k_f=1)
    sc = small_scenario()
    with pytest.raises(TranscriptionError):
        Scenario(**{**sc.__dict__, "body_parts": []})
    with pytest.raises(TranscriptionError):
        Scenario(**{**sc.__dict__, "canvas": []})
    with pytest.raises(TranscriptionError):
        Scenario(**{**sc.__dict__, "free_time": True, "weight_time": 0.0})
    with pytest.raises(TranscriptionError):
        Scenario(**{**sc.__dict__, "free_time": False, "tf_fixed": None})
    bad_goal = VehicleState(x=8.0, y=4.0, yaw=0.0, speed=99.0, steer=0.0)
    with pytest.raises(TranscriptionError):
        Scenario(**{**sc.__dict__, "goal": bad_goal})
    with pytest.raises(TranscriptionError):
        Scenario(**{**sc.__dict__, "body_parts": [
            BodyPart(shape=box2d(-1, 3, -1, 1), attachment="trailer")]})


def test_moving_obstacle_pose_count_checked():
    sc = small_scenario()
    poses = [Pose.planar(0.0, 0.0, 0.0)] * 3  # wants k_f + 1 = 5
    with pytest.raises(TranscriptionError):
        Scenario(**{**sc.__dict__, "obstacles": [
            Obstacle(shape=box2d(4, 6, -1, 1), poses=poses)]})
