"""Command line harness: run, verify, epsilon-study, slice-dump, flat-norm.

Artifacts are always written atomically (temp file + rename in the target
directory), so an aborted command never leaves a partial file behind.  Exit
status is 0 exactly when every hard invariant checked by the command passed.
"""

import argparse
import json
import os
import platform
import sys
import tempfile
import time
import warnings


def atomic_write(path, writer):
    """writer(fh) -> None; the destination appears only on success."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text):
    atomic_write(path, lambda fh: fh.write(text))


def atomic_write_json(path, payload):
    atomic_write(path, lambda fh: (json.dump(payload, fh, indent=2,
                                             sort_keys=True),
                                   fh.write("\n"))[-1])


def _versions():
    import numpy
    import scipy
    from . import __version__
    return {"python": platform.python_version(),
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "slipflow": __version__}


def _full_invariant_list(checked):
    """Every registered invariant, with statuses merged from `checked`."""
    from . import verify
    by_key = {(r["module"], r["name"]): r for r in checked}
    out = []
    for module, name in verify.registry_names():
        rec = by_key.get((module, name))
        if rec is None:
            rec = {"module": module, "name": name, "status": "skipped"}
        out.append(rec)
    return out


def _manifest(config_echo, timing, checked, tolerances, failures):
    inv = _full_invariant_list(checked)
    n_pass = sum(r["status"] == "pass" for r in inv)
    n_fail = sum(r["status"] in ("fail", "error") for r in inv)
    return {
        "config": config_echo,
        "versions": _versions(),
        "timing": timing,
        "tolerances": tolerances,
        "invariants": inv,
        "summary": {"passed": n_pass, "failed": n_fail,
                    "skipped": len(inv) - n_pass - n_fail,
                    "ok": n_fail == 0 and not failures},
        "failures": failures,
    }


def _trace_checks(trace):
    """Run-level invariant statuses measured on one finished trace."""
    import numpy as np
    from .energetics import SlipFamily, dissipation
    rows = trace.rows
    rep = trace.report
    checked = []

    worst_step = max((r["E"] + r["Diss_step"] - h
                      for r, h in zip(rows, rep["hold_energies"])),
                     default=0.0)
    checked.append({"module": "evolution", "name": "per-step-energy-estimate",
                    "status": "pass" if worst_step <= 1e-9 else "fail",
                    "measured": float(worst_step), "tolerance": 1e-9})
    d = float(rep["lower_estimate_defect"])
    bound = len(rows) * 1e-9
    checked.append({"module": "evolution",
                    "name": "telescoped-lower-energy-estimate",
                    "status": "pass" if d <= bound else "fail",
                    "measured": d, "tolerance": bound})
    if trace.stability:
        worst_c = max(c["worst_improvement"] for c in trace.stability)
        checked.append({"module": "evolution",
                        "name": "catalog-stability-certificate",
                        "status": "pass" if rep["stability_ok"] else "fail",
                        "measured": float(worst_c), "tolerance": 1e-10})
    fam = trace.assembled_family()
    pots = trace.potentials
    base = dissipation(pots, fam)
    knots = np.array([0.0, 0.3, 0.55, 1.0])
    vals = np.array([0.0, 0.07, 0.71, 1.0])
    warped = SlipFamily(fam.window)
    for key, S in fam.items():
        warped.set(key, S.map_time(fam.window[0]
                                   + knots * (fam.window[1] - fam.window[0]),
                                   fam.window[0]
                                   + vals * (fam.window[1] - fam.window[0])))
    err = abs(dissipation(pots, warped) - base)
    checked.append({"module": "evolution",
                    "name": "dissipation-rate-independent-on-assembled-run",
                    "status": "pass" if err <= 1e-12 else "fail",
                    "measured": float(err), "tolerance": 1e-12})
    res = max((r["consistency_residual"] for r in rows), default=0.0)
    checked.append({"module": "dislocations",
                    "name": "consistency-residual-stays-small-along-flow",
                    "status": "pass" if res <= 1e-8 else "fail",
                    "measured": float(res), "tolerance": 1e-8})
    return checked


def _load_scenario(args):
    from .scenario import parse_scenario
    if not args.config:
        raise SystemExit("--config is required for this subcommand")
    return parse_scenario(args.config)


def _out_dir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args) -> int:
    from .evolution import EvolutionError, round_multiplicities
    from .evolution import run_evolution
    from .scenario import ScenarioError
    t_start = time.perf_counter()
    out = _out_dir(args)
    try:
        scn = _load_scenario(args)
    except ScenarioError as exc:
        atomic_write_json(os.path.join(out, "manifest.json"),
                          _manifest(None, {}, [], {},
                                    [{"kind": "config", "message": m}
                                     for m in exc.errors]))
        print("config errors:\n" + "\n".join("  - " + m for m in exc.errors),
              file=sys.stderr)
        return 2
    model, catalog, lines, run_kwargs = scn.build()
    sol = scn.config["solver"]
    if sol["eps"] > 0.0:
        lines, dropped = round_multiplicities(lines, sol["eps"])
        if dropped:
            warnings.warn("multiplicity rounding at eps=%g annihilated "
                          "dislocation segments" % sol["eps"])
    t_build = time.perf_counter()
    failures = []
    try:
        trace = run_evolution(model, catalog, lines, sol["steps"],
                              sol["t_end"], **run_kwargs)
    except EvolutionError as exc:
        trace = exc.trace
        failures.append({"kind": "evolution", "message": str(exc)})
    t_solve = time.perf_counter()
    trace.potentials = model.potentials
    trace_path = os.path.join(out, scn.config["output"]["trace"])
    atomic_write_text(trace_path, trace.csv_text())
    checked = _trace_checks(trace) if not failures else []
    timing = {"build_s": round(t_build - t_start, 3),
              "solve_s": round(t_solve - t_build, 3),
              "total_s": round(time.perf_counter() - t_start, 3)}
    tolerances = {"improve_tol": sol["improve_tol"],
                  "step_slack": sol["step_slack"],
                  "consistency": 1e-8,
                  "stability_improvement": 1e-10}
    manifest = _manifest(scn.config, timing, checked, tolerances, failures)
    if not failures and trace.report.get("gronwall_constant") is not None:
        manifest["gronwall_constant"] = trace.report["gronwall_constant"]
        manifest["clipped_mollifier_support"] = bool(trace.report["clipped"])
    atomic_write_json(os.path.join(out, scn.config["output"]["manifest"]),
                      manifest)
    ok = manifest["summary"]["ok"]
    print("run: %s (%d rows, %.1fs) -> %s"
          % ("ok" if ok else "FAILED", len(trace.rows),
             timing["total_s"], trace_path))
    return 0 if ok else 1


def cmd_verify(args) -> int:
    from . import verify
    t0 = time.perf_counter()
    records, ok = verify.run_suite(level=args.level, seed=args.seed)
    timing = {"total_s": round(time.perf_counter() - t0, 3),
              "level": args.level}
    manifest = _manifest(None, timing, records,
                         {r["name"]: r["tolerance"] for r in records}, [])
    out = _out_dir(args)
    atomic_write_json(os.path.join(out, "manifest.json"), manifest)
    for r in records:
        print("%-12s %-45s %s" % (r["module"], r["name"], r["status"]))
    print("verify[%s]: %s in %.1fs"
          % (args.level, "ok" if ok else "FAILED", timing["total_s"]))
    return 0 if ok else 1


def cmd_epsilon_study(args) -> int:
    from .evolution import EvolutionError, epsilon_study
    from .scenario import ScenarioError
    t0 = time.perf_counter()
    out = _out_dir(args)
    try:
        scn = _load_scenario(args)
    except ScenarioError as exc:
        print("config errors:\n" + "\n".join("  - " + m for m in exc.errors),
              file=sys.stderr)
        return 2
    model, catalog, lines, run_kwargs = scn.build()
    sol = scn.config["solver"]
    run_kwargs = dict(run_kwargs)
    failures = []
    try:
        study = epsilon_study(model, catalog, lines, sol["steps"],
                              sol["t_end"], sol["epsilons"], **run_kwargs)
    except EvolutionError as exc:
        failures.append({"kind": "evolution", "message": str(exc)})
        study = None
    checked = []
    report = {}
    if study is not None:
        for eps in study["epsilons"]:
            tr = study["runs"][eps]
            tr.potentials = model.potentials
            path = os.path.join(out, "trace_eps%s.csv" % ("%g" % eps))
            atomic_write_text(path, tr.csv_text())
            checked.extend(_trace_checks(tr))
        report = {
            "epsilons": study["epsilons"],
            "bounds": {"%g" % e: study["bounds"][e]
                       for e in study["epsilons"]},
            "spreads": study["spreads"],
            "uniform_constant": study["uniform_constant"],
            "flat_distances": {"%g" % e: study["flat_distances"][e]
                               for e in study["epsilons"]},
            "annihilated": {"%g" % e: study["annihilated"][e]
                            for e in study["epsilons"]},
        }
        atomic_write_json(os.path.join(
            out, scn.config["output"]["epsilon_report"]), report)
    worst = {}
    for rec in checked:
        key = (rec["module"], rec["name"])
        if key not in worst or rec["status"] != "pass":
            worst[key] = rec
    timing = {"total_s": round(time.perf_counter() - t0, 3)}
    manifest = _manifest(scn.config, timing, list(worst.values()),
                         {"improve_tol": sol["improve_tol"],
                          "step_slack": sol["step_slack"]}, failures)
    manifest["epsilon_report"] = report
    atomic_write_json(os.path.join(out, scn.config["output"]["manifest"]),
                      manifest)
    ok = manifest["summary"]["ok"]
    print("epsilon-study: %s (%s) in %.1fs"
          % ("ok" if ok else "FAILED",
             ", ".join("%g" % e for e in sol["epsilons"]), timing["total_s"]))
    return 0 if ok else 1


def cmd_slice_dump(args) -> int:
    from .evolution import EvolutionError, run_evolution
    from .scenario import ScenarioError
    out = _out_dir(args)
    try:
        scn = _load_scenario(args)
    except ScenarioError as exc:
        print("config errors:\n" + "\n".join("  - " + m for m in exc.errors),
              file=sys.stderr)
        return 2
    model, catalog, lines, run_kwargs = scn.build()
    sol = scn.config["solver"]
    try:
        trace = run_evolution(model, catalog, lines, sol["steps"],
                              sol["t_end"], **run_kwargs)
    except EvolutionError as exc:
        print("run failed: %s" % exc, file=sys.stderr)
        return 1
    if args.times:
        times = [float(v) for v in args.times.split(",")]
    else:
        times = [r["t"] for r in trace.rows]
    fam = trace.assembled_family()
    payload = {"times": []}
    for t in times:
        entry = {"t": t, "systems": []}
        for key, S in fam.items():
            sl, ok = S.slice_at(t)
            entry["systems"].append({
                "burgers": list(key),
                "generic_time": bool(ok),
                "segments": sl.vertices.tolist(),
                "weights": sl.weights.tolist(),
            })
        payload["times"].append(entry)
    path = os.path.join(out, scn.config["output"]["slices"])
    atomic_write_json(path, payload)
    print("slice-dump: %d times -> %s" % (len(times), path))
    return 0


def cmd_flat_norm(args) -> int:
    import numpy as np
    from .spacetime import deformation_distance
    from .chains import polygon_loop, SimplicialCurrent
    from .dislocations import DislocationState

    def load_loops(path):
        with open(path) as fh:
            data = json.load(fh)
        st = DislocationState()
        for loop in data["loops"]:
            st.add_line(tuple(float(c) for c in loop["burgers"]),
                        polygon_loop(np.asarray(loop["vertices"], float),
                                     weight=float(loop.get("weight", 1.0)),
                                     quantum=float(loop.get("quantum", 0.0))))
        return st

    try:
        A = load_loops(args.lines_a)
        B = load_loops(args.lines_b)
    except Exception as exc:
        print("unreadable loop file: %s" % exc, file=sys.stderr)
        return 2
    keys = {tuple(k) for k, _ in A.systems()} | {tuple(k)
                                                 for k, _ in B.systems()}
    per_system = {}
    total = 0.0
    for key in sorted(keys):
        def grab(st):
            try:
                return st.line(key)
            except KeyError:
                return SimplicialCurrent(1, 3)
        dist, _ = deformation_distance(grab(A), grab(B))
        per_system[str([float(c) for c in key])] = dist
        total += dist
    payload = {"per_system": per_system, "total": total}
    if args.out:
        path = os.path.join(_out_dir(args), "flat_norm.json")
        atomic_write_json(path, payload)
        print("flat-norm: total %.6g -> %s" % (total, path))
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slipflow",
        description="Quasi-static dislocation evolution driver "
                    "(all quantities in lattice units)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker thread cap for numeric backends; "
                             "results are identical for any value")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized verification sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config):
        p.add_argument("--config", required=needs_config,
                       help="scenario config file (JSON)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--level", choices=("fast", "full"), default="fast",
                       help="verification effort")

    p_run = sub.add_parser("run", help="one incremental evolution")
    common(p_run, True)
    p_run.set_defaults(fn=cmd_run)

    p_ver = sub.add_parser("verify", help="module invariant suite")
    common(p_ver, False)
    p_ver.set_defaults(fn=cmd_verify)

    p_eps = sub.add_parser("epsilon-study",
                           help="multiplicity-quantum sweep")
    common(p_eps, True)
    p_eps.set_defaults(fn=cmd_epsilon_study)

    p_sl = sub.add_parser("slice-dump",
                          help="dislocation slices of the assembled run")
    common(p_sl, True)
    p_sl.add_argument("times", nargs="?", default=None,
                      help="comma-separated times (default: step grid)")
    p_sl.set_defaults(fn=cmd_slice_dump)

    p_fn = sub.add_parser("flat-norm",
                          help="deformation distance between two loop files")
    common(p_fn, False)
    p_fn.add_argument("lines_a")
    p_fn.add_argument("lines_b")
    p_fn.set_defaults(fn=cmd_flat_norm)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
