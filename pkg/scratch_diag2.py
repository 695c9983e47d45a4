import numpy as np
from scratch_matrix import overtaking, OPTS, run
from sepplan.ocp import build, unpack_states, unpack_controls
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions

for label, gs in [("A", 30.0/3.6), ("B", 25.0/3.6)]:
    scn = overtaking(gs)
    nlp = build(scn)
    z0 = assemble_guess(scn, nlp, "constant")
    for tol, rho0 in [(1e-6, 1.0), (1e-8, 0.1), (1e-8, 1.0)]:
        opts = SolverOptions(penalty_init=rho0, tol_feas=tol)
        sol = solve(nlp, z0, opts)
        print(f"{label}/const tol={tol:g} rho0={rho0:g}: {sol.status.value} "
              f"feas={sol.feas_norm:.2e} obj={sol.objective:.5f} outers={sol.outer_iterations}")
        for h in sol.history[::4]:
            print(f"   outer {h['outer']:2d} rho={h['rho']:.1e} viol={h['violation']:.2e} stat={h['stationarity']:.2e}")
