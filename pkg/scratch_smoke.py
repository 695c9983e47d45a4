import numpy as np
from sepplan.geometry import Polytope, box2d, polygon_from_vertices
from sepplan.dynamics import VehicleModelParams, VehicleState
from sepplan.ocp import Scenario, BodyPart, Obstacle, build, count_variables
from sepplan.baseline_dual import FormulationKind
from sepplan.initializer import assemble_guess
from sepplan.solver import check_derivatives

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
    interim=np.array([-2.0, -4.0]),
)

for form, want in ((FormulationKind.HYPERPLANE, 306), (FormulationKind.DUAL, 456)):
    c = count_variables(scn, form)
    print(form.value, c.as_dict(), "OK" if c.total == want else f"WANT {want}")

nlp = build(scn)
print("hyperplane nlp:", nlp.n_vars, "eq:", nlp.n_eq, "ineq:", nlp.n_ineq)
print("eq families:", nlp.eq_families)
print("ineq families:", nlp.ineq_families)

z0 = assemble_guess(scn, nlp, "geometry")
print("guess filled, cost:", nlp.cost(z0))
ce = nlp.eq_residuals(z0)
ci = nlp.ineq_residuals(z0)
print("eq max |r|:", np.abs(ce).max(), "ineq max:", ci.max())

rep = check_derivatives(nlp, z0, seed=0, n_points=60)
print("derivative audit:", rep["max_error"], rep["worst_family"])
for k, v in sorted(rep["per_family"].items(), key=lambda kv: -kv[1]):
    print(f"  {k:28s} {v:.3e}")

nlp_d = build(scn, FormulationKind.DUAL)
zd = assemble_guess(scn, nlp_d, "geometry")
rep = check_derivatives(nlp_d, zd, seed=0, n_points=60)
print("dual audit:", rep["max_error"], rep["worst_family"])

import time
t0 = time.perf_counter()
for _ in range(20):
    nlp.full_eval(z0, need_jac=True)
print("full_eval ms:", (time.perf_counter() - t0) / 20 * 1e3)
