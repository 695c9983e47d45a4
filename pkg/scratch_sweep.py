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

cands = [
    ("none", None),
    ("(8.5,1)", np.array([8.5, 1.0])),
    ("(2,2)", np.array([2.0, 2.0])),
    ("(4,1.5)", np.array([4.0, 1.5])),
    ("(6,0)", np.array([6.0, 0.0])),
    ("(0,-4)", np.array([0.0, -4.0])),
    ("(5,3)", np.array([5.0, 3.0])),
]
for name, interim in cands:
    scn = Scenario(
        name="parking_1obs", model=model,
        body_parts=[BodyPart(shape=body)], obstacles=[Obstacle(shape=obstacle)],
        canvas=[canvas],
        start=VehicleState(0.0, 0.0, 0.0, 0.0, 0.0),
        goal=VehicleState(8.5, -7.0, np.pi / 2, 0.0, 0.0),
        k_f=30, free_time=True, tf_guess=50.0,
        weight_time=1.0, weight_inputs=np.array([100.0, 200.0]),
        interim=interim,
    )
    nlp = build(scn)
    z0 = assemble_guess(scn, nlp, "geometry")
    sol = solve(nlp, z0, SolverOptions())
    X = unpack_states(nlp, sol.z)
    U = unpack_controls(nlp, sol.z)
    tf = unpack_tf(nlp, sol.z)
    rep = certify_trajectory(scn, X, U, tf)
    print(f"{name:10s} {sol.status.value:18s} obj={sol.objective:9.4f} tf={tf:7.3f} "
          f"cert={rep.passed} wall={sol.wall_time:5.2f}s outers={sol.outer_iterations}")
