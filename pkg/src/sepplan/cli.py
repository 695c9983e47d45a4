"""Command-line front end: solve, count, verify, and bench subcommands.

Exit codes: 0 on success (solve additionally requires convergence plus
certification), 2 on input or solver failure, 3 when a trajectory fails
certification.  The bench harness runs scenario/formulation/init
combinations in parallel processes, capped by SEPPLAN_THREADS.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baseline_dual import FormulationKind, UnsupportedCombinationError
from .geometry import Ellipsoid, GeometryError, Polytope
from .initializer import InitializationError, assemble_guess
from .ocp import (
    Scenario,
    TranscriptionError,
    build,
    count_variables,
    obstacle_world_set,
    unpack_controls,
    unpack_pair_aux,
    unpack_states,
    unpack_tf,
)
from .scenario_io import (
    ScenarioFormatError,
    load_document,
    parse_scenario,
    parse_solver_options,
)
from .solver import SolverOptions, solve
from .verification import certify_trajectory

REPORT_SCHEMA_VERSION = 1


def ts_metric(controls: np.ndarray) -> float:
    """Input-effort checksum used to compare local solutions."""
    u = np.asarray(controls, dtype=float)
    return float(np.sum(u[:, 0] ** 2 + u[:, 1] ** 2))


def _trajectory_header(scenario: Scenario) -> list:
    cols = ["step", "t", "x", "y", "theta1"]
    if scenario.model.has_trailer:
        cols.append("theta2")
    return cols + ["v", "delta", "a", "omega"]


def write_trajectory_csv(path, scenario: Scenario, states, controls, tf) -> None:
    kf = scenario.k_f
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_trajectory_header(scenario))
        for k in range(kf + 1):
            t = tf * k / kf
            row = [k, repr(float(t))]
            row += [repr(float(v)) for v in states[k]]
            if k < kf:
                row += [repr(float(v)) for v in controls[k]]
            else:
                row += ["", ""]
            w.writerow(row)


def read_trajectory_csv(path, scenario: Scenario):
    """Parse a trajectory file back into (states, controls, tf)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ScenarioFormatError(f"{path} is empty")
    header = rows[0]
    expected = _trajectory_header(scenario)
    if header != expected:
        raise ScenarioFormatError(
            f"{path} columns {header} do not match expected {expected}")
    body = rows[1:]
    kf = scenario.k_f
    if len(body) != kf + 1:
        raise ScenarioFormatError(
            f"{path} has {len(body)} steps, scenario wants {kf + 1}")
    nx = scenario.model.n_states
    states = np.empty((kf + 1, nx))
    controls = np.empty((kf, 2))
    for k, row in enumerate(body):
        if int(row[0]) != k:
            raise ScenarioFormatError(f"{path} step column breaks at row {k}")
        states[k] = [float(v) for v in row[2 : 2 + nx]]
        if k < kf:
            controls[k] = [float(v) for v in row[2 + nx : 4 + nx]]
    tf = float(body[-1][1])
    return states, controls, tf


def write_planes_csv(path, nlp, scenario: Scenario, z) -> None:
    aux = unpack_pair_aux(nlp, z)
    if not aux:
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerow(["step", "pair"])
        return
    n_lam = max(lam.shape[1] for lam, _ in aux.values())
    n_mu = max(mu.shape[1] for _, mu in aux.values())
    header = (["step", "pair"]
              + [f"lambda_{i + 1}" for i in range(n_lam)]
              + [f"mu_{i + 1}" for i in range(n_mu)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for (pi, oi), (lam, mu) in sorted(aux.items()):
            for k in range(lam.shape[0]):
                row = [k + 1, f"b{pi}o{oi}"]
                row += [repr(float(v)) for v in lam[k]]
                row += [""] * (n_lam - lam.shape[1])
                row += [repr(float(v)) for v in mu[k]]
                row += [""] * (n_mu - mu.shape[1])
                w.writerow(row)


def _draw_set(ax, shape, **kw):
    import matplotlib.patches as mpatches

    if isinstance(shape, Polytope):
        ax.fill(shape.V[0], shape.V[1], closed=True, **kw)
        return
    # boundary of (s-e)^T E (s-e) = 1 from the eigen-axes
    vals, vecs = np.linalg.eigh(shape.E)
    widths = 2.0 / np.sqrt(vals)
    angle = float(np.degrees(np.arctan2(vecs[1, 0], vecs[0, 0])))
    ax.add_patch(mpatches.Ellipse(shape.e, widths[0], widths[1], angle=angle, **kw))


def render_trajectory_figure(path, scenario: Scenario, states, tf) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .ocp import body_world_set

    fig, ax = plt.subplots(figsize=(8.0, 8.0))
    for shape in scenario.canvas:
        _draw_set(ax, shape, fill=False, edgecolor="tab:blue", linewidth=1.2)
    kf = scenario.k_f
    marks = sorted({0, kf // 4, kf // 2, (3 * kf) // 4, kf})
    for oi, obs in enumerate(scenario.obstacles):
        if obs.moving:
            for k in marks:
                _draw_set(ax, obstacle_world_set(obs, k),
                          facecolor="tab:red", alpha=0.25, edgecolor="none")
        else:
            _draw_set(ax, obs.shape, facecolor="0.55", edgecolor="0.3")
    for k in range(kf + 1):
        for part in scenario.body_parts:
            shape = body_world_set(part, states[k])
            heavy = k in (0, kf)
            _draw_set(ax, shape, fill=False,
                      edgecolor="k" if heavy else "tab:green",
                      linewidth=1.0 if heavy else 0.4,
                      alpha=1.0 if heavy else 0.6)
    ax.plot(states[:, 0], states[:, 1], "b.-", markersize=3, linewidth=1.0)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{scenario.name}: t_f = {tf:.2f} s")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_controls_figure(path, scenario: Scenario, states, controls, tf) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kf = scenario.k_f
    tg = tf * np.arange(kf + 1) / kf
    vi = 4 if scenario.model.has_trailer else 3
    fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.0), sharex=True)
    axes[0, 0].plot(tg, states[:, vi], "b-")
    axes[0, 0].set_ylabel("v [m/s]")
    axes[0, 1].plot(tg, np.degrees(states[:, vi + 1]), "b-")
    axes[0, 1].set_ylabel("steer [deg]")
    axes[1, 0].step(tg[:-1], controls[:, 0], where="post")
    axes[1, 0].set_ylabel("a [m/s^2]")
    axes[1, 0].set_xlabel("t [s]")
    axes[1, 1].step(tg[:-1], np.degrees(controls[:, 1]), where="post")
    axes[1, 1].set_ylabel("steer rate [deg/s]")
    axes[1, 1].set_xlabel("t [s]")
    for ax in axes.ravel():
        ax.grid(alpha=0.3)
    fig.suptitle(scenario.name)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _solver_options(doc: dict, args) -> SolverOptions:
    opts = parse_solver_options(doc) or SolverOptions()
    if getattr(args, "tol_feas", None) is not None:
        opts.tol_feas = args.tol_feas
    if getattr(args, "tol_opt", None) is not None:
        opts.tol_opt = args.tol_opt
    if getattr(args, "seed", None) is not None:
        opts.seed = args.seed
    return opts


def run_scenario(scenario: Scenario, formulation: FormulationKind, init: str,
                 opts: SolverOptions):
    """Build, seed, solve, and certify; returns the full result bundle."""
    nlp = build(scenario, formulation=formulation)
    z0 = assemble_guess(scenario, nlp, init)
    sol = solve(nlp, z0, opts)
    states = unpack_states(nlp, sol.z)
    controls = unpack_controls(nlp, sol.z)
    tf = unpack_tf(nlp, sol.z)
    t0 = time.perf_counter()
    report = certify_trajectory(scenario, states, controls, tf)
    certify_s = time.perf_counter() - t0
    return nlp, sol, states, controls, tf, report, certify_s


def _solve_report(scenario, formulation, init, opts, sol, tf, controls,
                  report, certify_s, outputs) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "solve",
        "scenario": scenario.name,
        "formulation": formulation.value,
        "init": init,
        "status": sol.status.value,
        "converged": sol.converged,
        "certified": report.passed,
        "objective": float(sol.objective),
        "t_f": float(tf),
        "ts_metric": ts_metric(controls),
        "iterations": {"outer": sol.outer_iterations, "inner": sol.iterations},
        "timing": {"solve_s": sol.wall_time, "certify_s": certify_s},
        "variables": count_variables(scenario, formulation).as_dict(),
        "feas_norm": float(sol.feas_norm),
        "opt_norm": float(sol.opt_norm),
        "solver": vars(opts).copy(),
        "certification": report.to_dict(),
        "message": sol.message,
        "outputs": outputs,
    }


def cmd_solve(args) -> int:
    doc = load_document(args.scenario)
    scenario = parse_scenario(doc)
    formulation = FormulationKind(args.formulation) if args.formulation else scenario.formulation
    opts = _solver_options(doc, args)
    prefix = args.out or scenario.name
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    try:
        nlp, sol, states, controls, tf, report, certify_s = run_scenario(
            scenario, formulation, args.init, opts)
    except (UnsupportedCombinationError, TranscriptionError, InitializationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outputs = {
        "trajectory_csv": f"{prefix}_traj.csv",
        "planes_csv": f"{prefix}_planes.csv",
        "report_json": f"{prefix}_report.json",
    }
    write_trajectory_csv(outputs["trajectory_csv"], scenario, states, controls, tf)
    write_planes_csv(outputs["planes_csv"], nlp, scenario, sol.z)
    if not args.no_figures:
        outputs["trajectory_png"] = f"{prefix}_trajectory.png"
        outputs["controls_png"] = f"{prefix}_controls.png"
        render_trajectory_figure(outputs["trajectory_png"], scenario, states, tf)
        render_controls_figure(outputs["controls_png"], scenario, states, controls, tf)
    rep = _solve_report(scenario, formulation, args.init, opts, sol, tf,
                        controls, report, certify_s, outputs)
    with open(outputs["report_json"], "w") as fh:
        json.dump(rep, fh, indent=2)
        fh.write("\n")
    print(f"{scenario.name} [{formulation.value}/{args.init}]: {sol.status.value}, "
          f"objective {sol.objective:.4f}, t_f {tf:.3f} s, "
          f"certified {report.passed}, {sol.wall_time:.2f} s")
    for v in report.violations[:10]:
        print(f"  violation step {v.step}: {v.kind} {v.magnitude:.3e} ({v.detail})")
    if not sol.converged:
        return 2
    return 0 if report.passed else 3


def cmd_count(args) -> int:
    doc = load_document(args.scenario)
    scenario = parse_scenario(doc)
    if args.formulation == "all":
        kinds = list(FormulationKind)
    else:
        kinds = [FormulationKind(args.formulation)]
    rows = {}
    for kind in kinds:
        try:
            rows[kind.value] = count_variables(scenario, kind).as_dict()
        except (UnsupportedCombinationError, GeometryError) as exc:
            rows[kind.value] = {"error": str(exc)}
    if args.json:
        print(json.dumps({"schema_version": REPORT_SCHEMA_VERSION,
                          "scenario": scenario.name, "counts": rows}, indent=2))
        return 0
    print(f"{scenario.name}: decision-variable budget")
    cols = ["state", "control", "time", "separation_aux", "containment_aux", "total"]
    print(f"{'formulation':<12}" + "".join(f"{c:>17}" for c in cols))
    for name, row in rows.items():
        if "error" in row:
            print(f"{name:<12} unsupported: {row['error']}")
        else:
            print(f"{name:<12}" + "".join(f"{row[c]:>17}" for c in cols))
    return 0


def cmd_verify(args) -> int:
    scenario = parse_scenario(load_document(args.scenario))
    states, controls, tf = read_trajectory_csv(args.trajectory, scenario)
    report = certify_trajectory(scenario, states, controls, tf)
    if report.passed:
        print(f"{scenario.name}: certified, {report.n_steps} steps clean "
              f"(max defect {report.max_defect:.2e})")
        return 0
    print(f"{scenario.name}: certification FAILED, "
          f"{len(report.violations)} violation(s)")
    for v in report.violations:
        print(f"  step {v.step}: {v.kind} {v.magnitude:.3e} ({v.detail})")
    return 3


def _bench_run(job: dict) -> dict:
    """One bench row; runs in a worker process."""
    row = {"scenario": job["name"], "formulation": job["formulation"],
           "init": job["init"]}
    try:
        doc = load_document(job["path"])
        scenario = parse_scenario(doc)
        opts = parse_solver_options(doc) or SolverOptions()
        formulation = FormulationKind(job["formulation"])
        t0 = time.perf_counter()
        nlp, sol, states, controls, tf, report, _ = run_scenario(
            scenario, formulation, job["init"], opts)
        row.update({
            "status": sol.status.value,
            "converged": sol.converged,
            "certified": report.passed,
            "objective": float(sol.objective),
            "t_f": float(tf),
            "ts_metric": ts_metric(controls),
            "iterations": {"outer": sol.outer_iterations, "inner": sol.iterations},
            "wall_s": time.perf_counter() - t0,
            "variables": count_variables(scenario, formulation).as_dict(),
        })
    except UnsupportedCombinationError as exc:
        row.update({"status": "unsupported", "reason": str(exc)})
    except Exception as exc:  # a bench row must never kill the harness
        row.update({"status": "error", "reason": f"{type(exc).__name__}: {exc}"})
    return row


def _bench_jobs(suite: dict, suite_dir: Path) -> list:
    if not isinstance(suite.get("runs"), list) or not suite["runs"]:
        raise ScenarioFormatError("suite file needs a non-empty 'runs' list")
    jobs = []
    for entry in suite["runs"]:
        try:
            rel = entry["scenario"]
            formulations = entry.get("formulations", ["hyperplane"])
            inits = entry.get("inits", ["geometry"])
        except (TypeError, KeyError) as exc:
            raise ScenarioFormatError(f"bad suite entry {entry!r}: {exc}") from exc
        path = (suite_dir / rel).resolve()
        if not path.exists():
            raise ScenarioFormatError(f"suite scenario {path} does not exist")
        name = Path(rel).stem
        for formulation in formulations:
            for init in inits:
                jobs.append({"name": name, "path": str(path),
                             "formulation": formulation, "init": init})
    return jobs


def _comparisons(rows: list) -> list:
    """Pairwise wall/solution comparisons along each suite axis."""
    good = [r for r in rows if r.get("converged")]
    out = []

    def match(a, b, axis):
        obj_delta = abs(a["objective"] - b["objective"])
        ts_delta = abs(a["ts_metric"] - b["ts_metric"])
        same = obj_delta <= 1e-6
        out.append({
            "scenario": a["scenario"], "axis": axis,
            "a": {"formulation": a["formulation"], "init": a["init"],
                  "wall_s": a["wall_s"]},
            "b": {"formulation": b["formulation"], "init": b["init"],
                  "wall_s": b["wall_s"]},
            "objective_delta": obj_delta,
            "ts_delta": ts_delta,
            "same_local_solution": same,
            "ts_consistent": bool(ts_delta <= 1e-6) if same else None,
        })

    by_scenario = {}
    for r in good:
        by_scenario.setdefault(r["scenario"], []).append(r)
    for scen, group in sorted(by_scenario.items()):
        for i, a in enumerate(group):
            for b in group[i + 1 :]:
                if a["init"] == b["init"] and a["formulation"] != b["formulation"]:
                    match(a, b, "formulation")
                elif a["formulation"] == b["formulation"] and a["init"] != b["init"]:
                    match(a, b, "init")
    return out


def render_bench_figure(path, rows) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    done = [r for r in rows if "wall_s" in r]
    if not done:
        return
    labels = [f"{r['scenario']}\n{r['formulation']}/{r['init']}" for r in done]
    walls = [r["wall_s"] for r in done]
    colors = ["tab:green" if r.get("converged") else "tab:red" for r in done]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(done)), 4.5))
    ax.bar(range(len(done)), walls, color=colors)
    ax.set_xticks(range(len(done)))
    ax.set_xticklabels(labels, fontsize=7, rotation=45, ha="right")
    ax.set_ylabel("wall time [s]")
    ax.set_title("bench wall times (red = not converged)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def cmd_bench(args) -> int:
    suite_path = Path(args.suite)
    try:
        with open(suite_path) as fh:
            suite = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read suite {suite_path}: {exc}", file=sys.stderr)
        return 2
    jobs = _bench_jobs(suite, suite_path.parent)
    threads = os.environ.get("SEPPLAN_THREADS")
    max_workers = max(1, int(threads)) if threads else min(len(jobs), os.cpu_count() or 1)
    if max_workers == 1:
        rows = [_bench_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_bench_run, jobs))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    comparisons = _comparisons(rows)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "bench",
        "suite": suite.get("name", suite_path.stem),
        "workers": max_workers,
        "rows": rows,
        "comparisons": comparisons,
    }
    with open(out_dir / "bench_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(out_dir / "bench_rows.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "formulation", "init", "status", "converged",
                    "certified", "objective", "t_f", "ts_metric", "wall_s"])
        for r in rows:
            w.writerow([r["scenario"], r["formulation"], r["init"],
                        r.get("status", ""), r.get("converged", ""),
                        r.get("certified", ""), r.get("objective", ""),
                        r.get("t_f", ""), r.get("ts_metric", ""),
                        r.get("wall_s", "")])
    if not args.no_figures:
        render_bench_figure(out_dir / "bench_times.png", rows)
    hdr = (f"{'scenario':<26}{'formulation':<12}{'init':<10}{'status':<18}"
           f"{'objective':>11}{'t_f':>9}{'TS':>10}{'wall':>8}")
    print(hdr)
    print("-" * len(hdr))
    for r in rows:
        if "wall_s" in r:
            print(f"{r['scenario']:<26}{r['formulation']:<12}{r['init']:<10}"
                  f"{r['status']:<18}{r['objective']:>11.4f}{r['t_f']:>9.3f}"
                  f"{r['ts_metric']:>10.5f}{r['wall_s']:>8.2f}")
        else:
            print(f"{r['scenario']:<26}{r['formulation']:<12}{r['init']:<10}"
                  f"{r['status']:<18}  {r.get('reason', '')}")
    for c in comparisons:
        tag = ("same local solution" if c["same_local_solution"]
               else "different local solutions")
        print(f"{c['scenario']}: {c['a']['formulation']}/{c['a']['init']} "
              f"({c['a']['wall_s']:.2f} s) vs {c['b']['formulation']}/{c['b']['init']} "
              f"({c['b']['wall_s']:.2f} s): {tag}, "
              f"d_obj {c['objective_delta']:.2e}, d_TS {c['ts_delta']:.2e}")
    print(f"wrote {out_dir / 'bench_report.json'}")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepplan",
                                description="separating-plane trajectory planning")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one scenario end to end")
    ps.add_argument("scenario")
    ps.add_argument("--formulation", choices=[k.value for k in FormulationKind])
    ps.add_argument("--init", choices=["geometry", "constant"], default="geometry")
    ps.add_argument("--out", help="output prefix (default: scenario name)")
    ps.add_argument("--tol-feas", type=float, dest="tol_feas")
    ps.add_argument("--tol-opt", type=float, dest="tol_opt")
    ps.add_argument("--seed", type=int)
    ps.add_argument("--no-figures", action="store_true")
    ps.set_defaults(func=cmd_solve)

    pc = sub.add_parser("count", help="decision-variable accounting")
    pc.add_argument("scenario")
    pc.add_argument("--formulation", default="all",
                    choices=["all"] + [k.value for k in FormulationKind])
    pc.add_argument("--json", action="store_true")
    pc.set_defaults(func=cmd_count)

    pv = sub.add_parser("verify", help="re-certify a trajectory file")
    pv.add_argument("trajectory")
    pv.add_argument("scenario")
    pv.set_defaults(func=cmd_verify)

    pb = sub.add_parser("bench", help="run a suite of solves and compare")
    pb.add_argument("suite")
    pb.add_argument("--out", default="bench_out")
    pb.add_argument("--no-figures", action="store_true")
    pb.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
