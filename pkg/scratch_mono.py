import numpy as np
from scratch_matrix import parking, tractor, overtaking, OPTS
from sepplan.ocp import build
from sepplan.baseline_dual import FormulationKind
from sepplan.initializer import assemble_guess
from sepplan.solver import solve

cases = [
    ("parking hyper/geo", parking(), None, "geometry"),
    ("parking dual/geo", parking(), FormulationKind.DUAL, "geometry"),
    ("parking hyper/const", parking(), None, "constant"),
    ("tractor", tractor(), None, "geometry"),
    ("A/geo", overtaking(30/3.6), None, "geometry"),
    ("B/geo", overtaking(25/3.6), None, "geometry"),
    ("B/const", overtaking(25/3.6), None, "constant"),
]
for label, scn, form, strat in cases:
    nlp = build(scn, formulation=form)
    z0 = assemble_guess(scn, nlp, strat)
    sol = solve(nlp, z0, OPTS)
    v = np.array([h["violation"] for h in sol.history])
    worst = float(np.max(v[1:] - v[:-1])) if v.size > 1 else 0.0
    where = int(np.argmax(v[1:] - v[:-1])) if v.size > 1 else -1
    print(f"{label:20s} {sol.status.value:10s} outers={v.size:2d} worst_increase={worst:.3e} at outer {where}")
    if worst > 1e-12:
        print("   viol seq:", " ".join(f"{x:.2e}" for x in v))
