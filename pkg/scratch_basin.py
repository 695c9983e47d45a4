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

def make(interim, free=True, tff=None):
    return Scenario(
        name="parking_1obs", model=model,
        body_parts=[BodyPart(shape=body)], obstacles=[Obstacle(shape=obstacle)],
        canvas=[canvas],
        start=VehicleState(0.0, 0.0, 0.0, 0.0, 0.0),
        goal=VehicleState(8.5, -7.0, np.pi / 2, 0.0, 0.0),
        k_f=30, free_time=free, tf_guess=50.0, tf_fixed=tff,
        weight_time=1.0, weight_inputs=np.array([100.0, 200.0]),
        interim=interim,
    )

def run(label, scn, z0):
    nlp = build(scn)
    sol = solve(nlp, z0, SolverOptions())
    X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z)
    tf = unpack_tf(nlp, sol.z) if scn.free_time else scn.tf_fixed
    rep = certify_trajectory(scn, X, U, tf)
    print(f"{label:26s} {sol.status.value:16s} obj={sol.objective:9.4f} tf={tf:8.3f} "
          f"cert={rep.passed} wall={sol.wall_time:5.2f}s")
    return nlp, sol

for pt in [(7.0, 7.5), (7.0, 4.0), (5.0, 6.0), (8.5, 3.0)]:
    scn = make(np.array(pt))
    z0 = assemble_guess(scn, build(scn), "geometry")
    run(f"interim {pt}", scn, z0)

# two-phase: fixed tf=50 presolve from the best-known interim, then release
scn_fix = make(np.array([8.5, 1.0]), free=False, tff=50.0)
nlp_fix = build(scn_fix)
z_fix = assemble_guess(scn_fix, nlp_fix, "geometry")
nlp_fix2, sol_fix = run("phase1 fixed tf=50", scn_fix, z_fix)
scn_free = make(np.array([8.5, 1.0]))
nlp_free = build(scn_free)
ti = nlp_free.var_map["t_f"].start
z_warm = np.insert(sol_fix.z, ti, 50.0)
run("phase2 released", scn_free, z_warm)
