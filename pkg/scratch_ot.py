import numpy as np
from sepplan.geometry import Ellipsoid, Pose, polygon_from_vertices
from sepplan.dynamics import VehicleModelParams, VehicleState
from sepplan.ocp import Scenario, BodyPart, Obstacle, build, unpack_states, unpack_controls
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions
from sepplan.verification import certify_trajectory

CENTER = np.array([75.0, -100.0])
lane_outer = Ellipsoid(E=np.diag([1.0 / 129.5**2, 1.0 / 129.5**2]), e=CENTER)
lane_inner = Ellipsoid(E=np.diag([1.0 / 123.5**2, 1.0 / 123.5**2]), e=CENTER)
body = polygon_from_vertices(np.array([[3.6, 3.6, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]]))
lead_shape = polygon_from_vertices(np.array([[2.3, 2.3, -2.3, -2.3], [1.0, -1.0, -1.0, 1.0]]))

K_F = 40
T_F = 21.0

def lead_poses(phi0_deg=104.0, radius=127.3, rate_deg=1.32):
    poses = []
    for k in range(K_F + 1):
        t = T_F * k / K_F
        phi = np.radians(phi0_deg - rate_deg * t)
        pos = CENTER + radius * np.array([np.cos(phi), np.sin(phi)])
        poses.append(Pose.planar(pos[0], pos[1], phi - np.pi / 2))
    return poses

model = VehicleModelParams(
    wheelbase=2.6, yaw_bound=np.radians(85.0),
    v_min=5.0 / 3.6, v_max=60.0 / 3.6,
    steer_bound=np.radians(45.0), a_min=-1.0, a_max=2.0,
)

def make(goal_speed):
    return Scenario(
        name="overtaking", model=model,
        body_parts=[BodyPart(shape=body)],
        obstacles=[Obstacle(shape=lane_inner), Obstacle(shape=lead_shape, poses=lead_poses())],
        canvas=[lane_outer],
        start=VehicleState(0.0, 0.0, np.radians(36.0), 25.0 / 3.6, 0.0),
        goal=VehicleState(150.0, 0.0, np.radians(-36.0), goal_speed, 0.0),
        k_f=K_F, free_time=False, tf_fixed=T_F,
        weight_time=1.0, weight_inputs=np.array([10.0, 20.0]),
        gamma=0.5,
    )

for label, goal_v in (("A", 30.0 / 3.6), ("B", 25.0 / 3.6)):
    scn = make(goal_v)
    nlp = build(scn)
    print(label, "n_vars:", nlp.n_vars, "n_eq:", nlp.n_eq, "n_ineq:", nlp.n_ineq)
    for strat in ("geometry", "constant"):
        z0 = assemble_guess(scn, nlp, strat)
        sol = solve(nlp, z0, SolverOptions())
        X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z)
        rep = certify_trajectory(scn, X, U, T_F)
        ts = float(np.sum(U[:, 0] ** 2 + U[:, 1] ** 2))
        print(f"  {label}/{strat:9s} {sol.status.value:16s} obj={sol.objective:10.5f} TS={ts:8.5f} "
              f"cert={rep.passed} wall={sol.wall_time:5.2f}s feas={sol.feas_norm:.1e} opt={sol.opt_norm:.1e}")
        if not rep.passed:
            for v in rep.violations[:4]:
                print("   viol:", v)
