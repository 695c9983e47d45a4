import numpy as np
from scratch_ot import make, lead_poses
from sepplan.ocp import build, unpack_states, unpack_controls
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions
from sepplan.verification import certify_trajectory

for label, goal_v in (("A", 30.0 / 3.6), ("B", 25.0 / 3.6)):
    scn = make(goal_v)
    nlp = build(scn)
    for strat, opts in (
        ("geometry", SolverOptions(tol_feas=1e-8)),
        ("constant", SolverOptions(penalty_init=1.0, max_outer_iters=60)),
        ("constant", SolverOptions(penalty_init=100.0, max_outer_iters=60)),
    ):
        z0 = assemble_guess(scn, nlp, strat)
        sol = solve(nlp, z0, opts)
        X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z)
        rep = certify_trajectory(scn, X, U, 21.0)
        ts = float(np.sum(U[:, 0] ** 2 + U[:, 1] ** 2))
        print(f"{label}/{strat:9s} rho0={opts.penalty_init:5.1f} {sol.status.value:16s} "
              f"obj={sol.objective:10.5f} TS={ts:8.5f} cert={rep.passed} "
              f"wall={sol.wall_time:5.2f}s feas={sol.feas_norm:.1e}")
