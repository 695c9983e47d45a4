import numpy as np, pathlib
from sepplan.scenario_io import load_scenario, load_document, parse_solver_options
from sepplan.ocp import build, unpack_states, unpack_controls, unpack_tf
from sepplan.initializer import assemble_guess
from sepplan.solver import solve
from sepplan.verification import certify_trajectory

for name in ["parking_single_car_1obs", "parking_single_car_2obs",
             "parking_single_car_3obs", "parking_single_car_4obs",
             "parking_tractor_trailer", "overtaking_A", "overtaking_B"]:
    p = pathlib.Path("scenarios") / f"{name}.json"
    doc = load_document(p)
    scn = load_scenario(p)
    opts = parse_solver_options(doc)
    nlp = build(scn)
    z0 = assemble_guess(scn, nlp, "geometry")
    sol = solve(nlp, z0, opts)
    X = unpack_states(nlp, sol.z); U = unpack_controls(nlp, sol.z)
    tf = unpack_tf(nlp, sol.z) if scn.free_time else scn.tf_fixed
    rep = certify_trajectory(scn, X, U, tf)
    print(f"{name:28s} {sol.status.value:16s} obj={sol.objective:9.4f} tf={tf:7.3f} "
          f"cert={rep.passed} wall={sol.wall_time:5.2f}s")
