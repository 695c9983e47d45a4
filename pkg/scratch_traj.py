import numpy as np
from scratch_basin import make, run
from sepplan.ocp import build, unpack_states, unpack_controls, unpack_tf
from sepplan.initializer import assemble_guess
from sepplan.solver import solve, SolverOptions

scn = make(np.array([8.5, 1.0]))
nlp = build(scn)
z0 = assemble_guess(scn, nlp, "geometry")
sol = solve(nlp, z0, SolverOptions())
X = unpack_states(nlp, sol.z)
U = unpack_controls(nlp, sol.z)
tf = unpack_tf(nlp, sol.z)
print(f"tf={tf:.3f} obj={sol.objective:.4f}")
print("  k      x       y    yaw(deg)   v      delta(deg)   a      omega(deg/s)")
for k in range(31):
    a = U[k, 0] if k < 30 else float("nan")
    w = np.degrees(U[k, 1]) if k < 30 else float("nan")
    print(f"{k:3d} {X[k,0]:7.2f} {X[k,1]:7.2f} {np.degrees(X[k,2]):8.1f} "
          f"{X[k,3]:7.3f} {np.degrees(X[k,4]):8.1f} {a:7.3f} {w:8.3f}")
