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
tractor = polygon_from_vertices(np.array([[1.5, 1.5, -0.5, -0.5], [1.0, -1.0, -1.0, 1.0]]))
trailer = polygon_from_vertices(np.array([[0.5, 0.5, -5.0, -5.0], [1.0, -1.0, -1.0, 1.0]]))
model = VehicleModelParams(
    wheelbase=1.0, trailer_length=4.5,
    joint_angle_bound=np.radians(60.0),
)
scn = Scenario(
    name="parking_tt", model=model,
    body_parts=[BodyPart(shape=tractor, attachment="tractor"),
                BodyPart(shape=trailer, attachment="trailer")],
    obstacles=[Obstacle(shape=obstacle)],
    canvas=[canvas],
    start=VehicleState(0.0, 0.0, 0.0, 0.0, 0.0, trailer_yaw=0.0),
    goal=VehicleState(8.5, -4.5, np.pi / 2, 0.0, 0.0, trailer_yaw=np.pi / 2),
    k_f=30, free_time=True, tf_guess=50.0,
    weight_time=1.0, weight_inputs=np.array([100.0, 200.0]),
    interim=np.array([7.0, 7.5]),
)
nlp = build(scn)
print("n_vars:", nlp.n_vars, "n_eq:", nlp.n_eq, "n_ineq:", nlp.n_ineq)
z0 = assemble_guess(scn, nlp, "geometry")
sol = solve(nlp, z0, SolverOptions())
X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z); tf = unpack_tf(nlp, sol.z)
rep = certify_trajectory(scn, X, U, tf)
print(f"{sol.status.value} obj={sol.objective:.4f} tf={tf:.3f} cert={rep.passed} "
      f"wall={sol.wall_time:.2f}s outers={sol.outer_iterations} feas={sol.feas_norm:.2e} opt={sol.opt_norm:.2e}")
jmax = np.degrees(np.max(np.abs(X[:, 2] - X[:, 3])))
print(f"max joint angle: {jmax:.2f} deg")
for v in rep.violations[:6]:
    print(" viol:", v)
