import numpy as np, pathlib
from sepplan.scenario_io import load_scenario, load_document, parse_solver_options
from sepplan.ocp import build
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, _project

p = pathlib.Path("scenarios/parking_single_car_2obs.json")
scn = load_scenario(p)
opts = parse_solver_options(load_document(p))
nlp = build(scn)
z0 = assemble_guess(scn, nlp, "geometry")
sol = solve(nlp, z0, opts)
z = sol.z
f = nlp.cost(z); g = nlp.cost_grad(z)
ce = nlp.eq_residuals(z); Je = nlp.eq_jacobian(z)
ci = nlp.ineq_residuals(z); Ji = nlp.ineq_jacobian(z)
# rebuild the last multipliers by replaying: easier to re-derive a least-squares
# multiplier estimate at z and measure its projected gradient
import scipy.optimize as so
act = ci > -1e-6
Jact = np.vstack([Je, Ji[act]])
rhs = -g
lam, *_ = np.linalg.lstsq(Jact.T, rhs, rcond=None)
gL = g + Jact.T @ lam
pg = z - _project(z - gL, nlp.lower, nlp.upper)
print("feas", sol.feas_norm, "solver stat", sol.opt_norm)
print("LS-multiplier stat:", np.max(np.abs(pg)))
# blame layout blocks
L = nlp.meta["layout"] if isinstance(nlp.meta, dict) and "layout" in nlp.meta else None
order = np.argsort(-np.abs(pg))[:10]
print("worst pg entries:", [(int(i), float(pg[i])) for i in order])
print("n_state", scn.model.n_states*(scn.k_f+1), "n_ctrl", 2*scn.k_f, "n_vars", nlp.n_vars)
