import numpy as np
from scratch_ot import make
from sepplan.ocp import build, family_of_row
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions

scn = make(30.0 / 3.6)
nlp = build(scn)
z0 = assemble_guess(scn, nlp, "constant")
sol = solve(nlp, z0, SolverOptions(penalty_init=1.0, max_outer_iters=60))
print(sol.status.value, "feas", sol.feas_norm)
ce = nlp.eq_residuals(sol.z)
ci = nlp.ineq_residuals(sol.z)
for tag, vals, fams in (("eq", np.abs(ce), nlp.eq_families), ("ineq", np.maximum(ci, 0.0), nlp.ineq_families)):
    worst = np.argsort(vals)[::-1][:6]
    for r in worst:
        if vals[r] > 1e-7:
            print(f"{tag} row {r} fam={family_of_row(fams, int(r))} viol={vals[r]:.3e}")
hist = sol.history
for h in hist[::6]:
    print(h["outer"], f"rho={h['rho']:.1e} viol={h['violation']:.2e} stat={h['stationarity']:.2e}")
