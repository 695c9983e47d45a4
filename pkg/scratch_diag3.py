import numpy as np
from scratch_matrix import overtaking
from sepplan.ocp import build
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions

scn = overtaking(30.0 / 3.6)
nlp = build(scn)
z0 = assemble_guess(scn, nlp, "constant")
sol1 = solve(nlp, z0, SolverOptions(penalty_init=1.0, tol_feas=1e-8))
print("stage1:", sol1.status.value, f"feas={sol1.feas_norm:.2e} obj={sol1.objective:.5f}")
for rho0 in (0.1, 1.0, 10.0):
    sol2 = solve(nlp, sol1.z, SolverOptions(penalty_init=rho0, tol_feas=1e-8))
    print(f"restart rho0={rho0:4.1f}:", sol2.status.value,
          f"feas={sol2.feas_norm:.2e} obj={sol2.objective:.5f} outers={sol2.outer_iterations}")
