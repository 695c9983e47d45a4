import pathlib
from sepplan.scenario_io import load_scenario, load_document, parse_solver_options
from sepplan.ocp import build
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions

for name in ["parking_single_car_2obs", "parking_single_car_3obs"]:
    p = pathlib.Path("scenarios") / f"{name}.json"
    scn = load_scenario(p)
    opts = parse_solver_options(load_document(p))
    nlp = build(scn)
    z0 = assemble_guess(scn, nlp, "geometry")
    sol = solve(nlp, z0, opts)
    print(name, sol.status.value, f"feas={sol.feas_norm:.2e} opt={sol.opt_norm:.2e}")
    for h in sol.history[-8:]:
        print(f"  outer {h['outer']:2d} rho={h['rho']:.1e} viol={h['violation']:.2e} "
              f"stat={h['stationarity']:.2e} inner={h['inner_iters']}")
