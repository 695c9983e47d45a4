import pathlib
from sepplan.scenario_io import load_scenario
from sepplan.ocp import build
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions

for name, mi, mo in [("parking_single_car_2obs", 400, 60),
                     ("parking_single_car_3obs", 400, 60),
                     ("parking_single_car_4obs", 400, 60)]:
    scn = load_scenario(pathlib.Path("scenarios") / f"{name}.json")
    nlp = build(scn)
    z0 = assemble_guess(scn, nlp, "geometry")
    sol = solve(nlp, z0, SolverOptions(tol_feas=1e-8, max_inner_iters=mi, max_outer_iters=mo))
    print(f"{name} inner<= {mi}: {sol.status.value} obj={sol.objective:.4f} "
          f"feas={sol.feas_norm:.1e} stat={sol.opt_norm:.1e} wall={sol.wall_time:.1f}s")
    for h in sol.history[-4:]:
        print(f"   outer {h['outer']:2d} rho={h['rho']:.1e} viol={h['violation']:.2e} "
              f"stat={h['stationarity']:.2e} inner={h['inner_iters']}")
