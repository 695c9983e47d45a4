import numpy as np
import time
from sepplan.geometry import Polytope, polygon_from_vertices
from sepplan.dynamics import VehicleModelParams, VehicleState
from sepplan.ocp import Scenario, BodyPart, Obstacle, build, unpack_states, unpack_controls, unpack_tf
from sepplan.baseline_dual import FormulationKind
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
scn = Scenario(
    name="parking_1obs",
    model=model,
    body_parts=[BodyPart(shape=body)],
    obstacles=[Obstacle(shape=obstacle)],
    canvas=[canvas],
    start=VehicleState(0.0, 0.0, 0.0, 0.0, 0.0),
    goal=VehicleState(8.5, -7.0, np.pi / 2, 0.0, 0.0),
    k_f=30,
    free_time=True,
    tf_guess=50.0,
    weight_time=1.0,
    weight_inputs=np.array([100.0, 200.0]),
    interim=np.array([8.5, 1.0]),
)

nlp = build(scn)
z0 = assemble_guess(scn, nlp, "geometry")
t0 = time.perf_counter()
sol = solve(nlp, z0, SolverOptions())
dt = time.perf_counter() - t0
print("status:", sol.status, "obj:", sol.objective, "feas:", sol.feas_norm, "opt:", sol.opt_norm)
print("inner iters:", sol.iterations, "outer:", sol.outer_iterations, "wall:", round(dt, 2), "s")
print("t_f:", unpack_tf(nlp, sol.z))
for h in sol.history:
    print(h)

X = unpack_states(nlp, sol.z)
U = unpack_controls(nlp, sol.z)
rep = certify_trajectory(scn, X, U, unpack_tf(nlp, sol.z))
print("certified:", rep.passed, "max defect:", rep.max_defect, "min margin:", rep.min_obstacle_margin)
for v in rep.violations[:8]:
    print(" viol:", v)
