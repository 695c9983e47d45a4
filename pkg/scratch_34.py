import pathlib
from sepplan.scenario_io import load_scenario
from sepplan.ocp import build
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions
from sepplan.ocp import unpack_states, unpack_controls, unpack_tf
from sepplan.verification import certify_trajectory

for name in ("parking_single_car_3obs", "parking_single_car_4obs"):
    scn = load_scenario(pathlib.Path("scenarios") / f"{name}.json")
    nlp = build(scn)
    z0 = assemble_guess(scn, nlp, "geometry")
    sol = solve(nlp, z0, SolverOptions(tol_feas=1e-6))
    X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z)
    tf = unpack_tf(nlp, sol.z)
    rep = certify_trajectory(scn, X, U, tf)
    print(f"{name} tol=1e-6: {sol.status.value} obj={sol.objective:.4f} tf={tf:.3f} "
          f"feas={sol.feas_norm:.1e} stat={sol.opt_norm:.1e} cert={rep.passed} wall={sol.wall_time:.1f}s")
