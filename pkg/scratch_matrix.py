import numpy as np
from sepplan.geometry import Ellipsoid, Pose, Polytope, polygon_from_vertices
from sepplan.dynamics import VehicleModelParams, VehicleState
from sepplan.ocp import Scenario, BodyPart, Obstacle, build, unpack_states, unpack_controls, unpack_tf
from sepplan.baseline_dual import FormulationKind
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions
from sepplan.verification import certify_trajectory

CENTER = np.array([75.0, -100.0])
lane_outer = Ellipsoid(E=np.diag([1.0 / 129.5**2, 1.0 / 129.5**2]), e=CENTER)
lane_inner = Ellipsoid(E=np.diag([1.0 / 123.5**2, 1.0 / 123.5**2]), e=CENTER)
car_body = polygon_from_vertices(np.array([[3.6, 3.6, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]]))
lead_shape = polygon_from_vertices(np.array([[2.3, 2.3, -2.3, -2.3], [1.0, -1.0, -1.0, 1.0]]))

def lead_poses(kf, tf, phi0_deg=104.0, radius=127.8, rate_deg=1.32):
    poses = []
    for k in range(kf + 1):
        t = tf * k / kf
        phi = np.radians(phi0_deg - rate_deg * t)
        pos = CENTER + radius * np.array([np.cos(phi), np.sin(phi)])
        poses.append(Pose.planar(pos[0], pos[1], phi - np.pi / 2))
    return poses

ot_model = VehicleModelParams(
    wheelbase=2.6, yaw_bound=np.radians(85.0),
    v_min=5.0 / 3.6, v_max=60.0 / 3.6,
    steer_bound=np.radians(45.0), a_min=-1.0, a_max=2.0,
)

def overtaking(goal_speed):
    return Scenario(
        name="ot", model=ot_model,
        body_parts=[BodyPart(shape=car_body)],
        obstacles=[Obstacle(shape=lane_inner), Obstacle(shape=lead_shape, poses=lead_poses(40, 21.0))],
        canvas=[lane_outer],
        start=VehicleState(0.0, 0.0, np.radians(36.0), 25.0 / 3.6, 0.0),
        goal=VehicleState(150.0, 0.0, np.radians(-36.0), goal_speed, 0.0),
        k_f=40, free_time=False, tf_fixed=21.0,
        weight_time=1.0, weight_inputs=np.array([10.0, 20.0]), gamma=0.5,
    )

canvas = Polytope(
    A=np.array([[0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [-1.0, 0.0]]),
    b=np.array([10.0, 10.0, 10.0, 6.0]),
    V=np.array([[10.0, 10.0, -6.0, -6.0], [10.0, -10.0, -10.0, 10.0]]),
)
slab = polygon_from_vertices(np.array([[7.0, 7.0, -6.0, -6.0], [-3.0, -10.0, -10.0, -3.0]]))

def parking():
    return Scenario(
        name="p1", model=VehicleModelParams(wheelbase=2.6),
        body_parts=[BodyPart(shape=car_body)],
        obstacles=[Obstacle(shape=slab)], canvas=[canvas],
        start=VehicleState(0.0, 0.0, 0.0, 0.0, 0.0),
        goal=VehicleState(8.5, -7.0, np.pi / 2, 0.0, 0.0),
        k_f=30, free_time=True, tf_guess=50.0,
        weight_time=1.0, weight_inputs=np.array([100.0, 200.0]),
    )

def tractor():
    tr = polygon_from_vertices(np.array([[1.5, 1.5, -0.5, -0.5], [1.0, -1.0, -1.0, 1.0]]))
    tl = polygon_from_vertices(np.array([[0.5, 0.5, -5.0, -5.0], [1.0, -1.0, -1.0, 1.0]]))
    return Scenario(
        name="tt",
        model=VehicleModelParams(wheelbase=1.0, trailer_length=4.5, joint_angle_bound=np.radians(60.0)),
        body_parts=[BodyPart(shape=tr, attachment="tractor"), BodyPart(shape=tl, attachment="trailer")],
        obstacles=[Obstacle(shape=slab)], canvas=[canvas],
        start=VehicleState(0.0, 0.0, 0.0, 0.0, 0.0, trailer_yaw=0.0),
        goal=VehicleState(8.5, -4.5, np.pi / 2, 0.0, 0.0, trailer_yaw=np.pi / 2),
        k_f=30, free_time=True, tf_guess=50.0,
        weight_time=1.0, weight_inputs=np.array([100.0, 200.0]),
        interim=np.array([7.0, 7.5]),
    )

OPTS = SolverOptions(penalty_init=0.1, tol_feas=1e-8)

def run(label, scn, form=None, strat="geometry"):
    nlp = build(scn, formulation=form)
    z0 = assemble_guess(scn, nlp, strat)
    sol = solve(nlp, z0, OPTS)
    X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z)
    tf = unpack_tf(nlp, sol.z) if scn.free_time else scn.tf_fixed
    rep = certify_trajectory(scn, X, U, tf)
    ts = float(np.sum(U[:, 0] ** 2 + U[:, 1] ** 2))
    print(f"{label:24s} {sol.status.value:16s} obj={sol.objective:10.5f} tf={tf:7.3f} TS={ts:8.5f} "
          f"cert={rep.passed} wall={sol.wall_time:5.2f}s")

if __name__ == "__main__":
    run("parking hyper/geo", parking())
    run("parking dual/geo", parking(), form=FormulationKind.DUAL)
    run("parking hyper/const", parking(), strat="constant")
    run("tractor hyper/geo", tractor())
    run("overtake A geo", overtaking(30.0 / 3.6))
    run("overtake A const", overtaking(30.0 / 3.6), strat="constant")
    run("overtake B geo", overtaking(25.0 / 3.6))
    run("overtake B const", overtaking(25.0 / 3.6), strat="constant")
