import numpy as np
from sepplan.geometry import Polytope, polygon_from_vertices
from sepplan.dynamics import VehicleModelParams, VehicleState
from sepplan.ocp import Scenario, BodyPart, Obstacle, build, unpack_states, unpack_controls, unpack_tf
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions
from sepplan.verification import certify_trajectory

canvas = Polytope(
    A=np.array([[0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [-1.0, 0.0]]),
    b=np.array([10.0, 10.0, 10.0, 6.0]),
    V=np.array([[10.0, 10.0, -6.0, -6.0], [10.0, -10.0, -10.0, 10.0]]),
)
obstacle = polygon_from_vertices(np.array([[7.0, 7.0, -6.0, -6.0], [-3.0, -10.0, -10.0, -3.0]]))
body = polygon_from_vertices(np.array([[3.6, 3.6, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]]))
model = VehicleModelParams(wheelbase=2.6)

def make(interim):
    return Scenario(
        name="parking_1obs", model=model,
        body_parts=[BodyPart(shape=body)], obstacles=[Obstacle(shape=obstacle)],
        canvas=[canvas],
        start=VehicleState(0.0, 0.0, 0.0, 0.0, 0.0),
        goal=VehicleState(8.5, -7.0, np.pi / 2, 0.0, 0.0),
        k_f=30, free_time=True, tf_guess=50.0,
        weight_time=1.0, weight_inputs=np.array([100.0, 200.0]),
        interim=interim,
    )

def zero_rest(scn, nlp, z):
    z = z.copy()
    kf = scn.k_f
    for k in range(kf + 1):
        sl = nlp.var_map[f"state[{k}]"]
        z[sl.start + 3 : sl.stop] = 0.0
    for k in range(kf):
        sl = nlp.var_map[f"control[{k}]"]
        z[sl] = 0.0
    z[0:5] = scn.start.as_array(False)
    sl = nlp.var_map[f"state[{kf}]"]
    z[sl] = scn.goal.as_array(False)
    return z

def linear_states(scn, nlp, z):
    z = z.copy()
    kf = scn.k_f
    x0 = scn.start.as_array(False)
    xf = scn.goal.as_array(False)
    for k in range(kf + 1):
        sl = nlp.var_map[f"state[{k}]"]
        z[sl] = x0 + (xf - x0) * k / kf
    for k in range(kf):
        z[nlp.var_map[f"control[{k}]"]] = 0.0
    return z

def run(label, scn, z0):
    nlp = build(scn)
    sol = solve(nlp, z0, SolverOptions())
    X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z); tf = unpack_tf(nlp, sol.z)
    rep = certify_trajectory(scn, X, U, tf)
    print(f"{label:28s} {sol.status.value:16s} obj={sol.objective:9.4f} tf={tf:8.3f} "
          f"cert={rep.passed} wall={sol.wall_time:5.2f}s")
    return sol

scn = make(np.array([8.5, 1.0]))
nlp = build(scn)
z0 = assemble_guess(scn, nlp, "geometry")
run("interim kinematic", scn, z0)
run("interim zero-rest", scn, zero_rest(scn, nlp, z0))

scn2 = make(None)
nlp2 = build(scn2)
zg = assemble_guess(scn2, nlp2, "geometry")
run("line tangent-yaw kinematic", scn2, zg)
run("line linear-yaw zero (geo)", scn2, linear_states(scn2, nlp2, zg))
zc = assemble_guess(scn2, nlp2, "constant")
run("line linear-yaw zero (const)", scn2, linear_states(scn2, nlp2, zc))
