import numpy as np
from scratch_basin import make
from sepplan.baseline_dual import FormulationKind
from sepplan.ocp import build, unpack_states, unpack_controls, unpack_tf
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions
from sepplan.verification import certify_trajectory

scn = make(np.array([8.5, 1.0]))
for form in (FormulationKind.HYPERPLANE, FormulationKind.DUAL):
    nlp = build(scn, formulation=form)
    z0 = assemble_guess(scn, nlp, "geometry")
    sol = solve(nlp, z0, SolverOptions())
    X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z); tf = unpack_tf(nlp, sol.z)
    rep = certify_trajectory(scn, X, U, tf)
    print(f"{form.value:12s} {sol.status.value:16s} obj={sol.objective:10.5f} tf={tf:8.3f} "
          f"cert={rep.passed} wall={sol.wall_time:5.2f}s outers={sol.outer_iterations} "
          f"feas={sol.feas_norm:.2e} opt={sol.opt_norm:.2e}")
