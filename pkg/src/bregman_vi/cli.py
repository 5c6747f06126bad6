"""Command-line entry point.

Exit codes: 0 ok, 1 input error, 2 non-convergence, 3 property or
certificate violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import certify
from .exceptions import ConfigurationError, DomainError, LineSearchError, StageError
from .geometry import bregman, max_bregman_over_set
from .oracle import check_all
from .problems import ProblemFileError, problem_from_dict, read_problem_file, start_point
from .solver import (EPSILON_TARGET, EXPLICIT_FORMULA, RECURSIVE_HALVING, SUM_THRESHOLD, RestartConfig,
                     RestartState, UmpConfig, UmpTrace, restart_solve, ump_solve)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 1, 2, 3

TRACE_COLUMNS = ["k", "i_k", "L_next", "S_k", "V_to_xstar", "minty_gap_sampled"]
STOP_MODES = {"epsilon": EPSILON_TARGET, "sum": SUM_THRESHOLD}
RADIUS_RULES = {"recursive-halving": RECURSIVE_HALVING, "explicit-formula": EXPLICIT_FORMULA}


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_atomic(path, text):
    """Write via a temp file in the same directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    write_atomic(path, buf.getvalue())


def trace_rows(trace, problem, gap=None, extra=None):
    for rec in trace.records():
        row = dict(rec)
        if problem.x_star is not None:
            row["V_to_xstar"] = bregman(problem.setup, problem.x_star, rec["z_next"])
        if gap is not None:
            row["minty_gap_sampled"] = gap(rec["w_k"])
        if extra:
            row.update(extra)
        yield row


# ---------------------------------------------------------------------------
# Shared setup
# ---------------------------------------------------------------------------


def _load(args):
    desc = read_problem_file(args.problem)
    if not isinstance(desc, dict):
        raise ProblemFileError(f"{args.problem}: top level must be a JSON object")
    if getattr(args, "delta", None) is not None:
        if args.delta < 0:
            raise InputError("--delta must be non-negative")
        desc = dict(desc, delta=args.delta)
    if getattr(args, "seed", None) is not None:
        desc = dict(desc, seed=args.seed)
    return problem_from_dict(desc)


def _out_dir(args):
    if args.out_dir is None:
        raise InputError("--out-dir is required")
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _require_positive(name, value):
    if value is None:
        raise InputError(f"missing required field '{name}'")
    if not value > 0:
        raise InputError(f"field '{name}' must be positive, got {value}")


def _print_table(certs, out=None):
    out = sys.stdout if out is None else out
    out.write(f"{'claim':<24} {'result':<6} {'margin':>14}\n")
    for c in certs:
        out.write(f"{c.claim:<24} {'PASS' if c.holds else 'FAIL':<6} {c.margin:>14.6g}\n")


def _solve_certificates(problem, trace):
    certs = []
    if problem.x_star is None or trace.N == 0:
        return certs
    certs.append(certify.verify_lemma1(trace, problem.x_star, problem.setup, problem.delta))
    if problem.delta == 0:
        certs.append(certify.verify_theorem1(trace, problem.oracle, problem.x_star, problem.setup, problem.set))
    return certs


def _restart_certificates(problem, state):
    if problem.x_star is None or not state.complete:
        return []
    cfg = state.config
    return [certify.verify_theorem2(state, problem.x_star, cfg.mu, cfg.omega, problem.L,
                                    problem.delta, cfg.epsilon)]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_solve(args):
    _require_positive("epsilon", args.epsilon)
    _require_positive("l0", args.l0)
    problem = _load(args)
    out = _out_dir(args)
    mode = STOP_MODES[args.stop_mode]
    if mode == SUM_THRESHOLD:
        _require_positive("threshold", args.threshold)
    config = UmpConfig(args.epsilon, args.l0, start_point(problem), mode, args.threshold,
                       max_outer_iters=args.max_outer_iters)
    try:
        trace = ump_solve(problem.oracle, problem.setup, problem.set, config)
    except LineSearchError as exc:
        print(f"line search failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    gap = certify.SampledGap(problem.oracle, problem.set, args.samples, args.seed) if args.samples else None
    write_csv(os.path.join(out, "trace.csv"), TRACE_COLUMNS, trace_rows(trace, problem, gap))
    write_json(os.path.join(out, "trace.json"), trace.to_dict())
    certs = _solve_certificates(problem, trace)
    summary = {
        "problem": problem.params.get("name", ""), "N": trace.N, "converged": trace.converged,
        "oracle_calls": trace.oracle_calls, "S_N": trace.S_N, "threshold": trace.threshold,
        "last_z": trace.last_z.tolist(),
        "last_w": None if trace.last_w is None else trace.last_w.tolist(),
        "averaged_w": None if trace.averaged_w is None else trace.averaged_w.tolist(),
        "certificates": [c.to_dict() for c in certs],
    }
    write_json(os.path.join(out, "summary.json"), summary)
    if certs:
        _print_table(certs)
    print(f"N={trace.N} converged={trace.converged} S_N={trace.S_N!r}")
    return EXIT_OK if trace.converged else EXIT_NONCONVERGED


def cmd_restart(args):
    _require_positive("epsilon", args.epsilon)
    _require_positive("l0", args.l0)
    problem = _load(args)
    if not problem.mu > 0:
        raise InputError("restarts need a problem with mu > 0")
    out = _out_dir(args)
    x0 = start_point(problem)
    R0_sq = args.r0_sq if args.r0_sq is not None else max_bregman_over_set(problem.setup, problem.set, x0)
    _require_positive("r0_sq", R0_sq)
    config = RestartConfig(args.epsilon, problem.mu, problem.setup.omega, x0, R0_sq, args.l0,
                           RADIUS_RULES[args.radius_rule], max_outer_iters=args.max_outer_iters)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            state = restart_solve(problem.oracle, problem.setup, problem.set, config)
            status = EXIT_OK
        except StageError as exc:
            print(f"stage {exc.stage} failed: {exc}", file=sys.stderr)
            state, status = exc.state, EXIT_NONCONVERGED
            if exc.trace is not None:
                state.traces.append(exc.trace)
    messages = [str(w.message) for w in caught]
    for m in messages:
        print(f"warning: {m}", file=sys.stderr)

    gap = certify.SampledGap(problem.oracle, problem.set, args.samples, args.seed) if args.samples else None
    rows = []
    for p, trace in enumerate(state.traces):
        rows.extend(trace_rows(trace, problem, gap, {"stage": p}))
    write_csv(os.path.join(out, "restart_trace.csv"), ["stage"] + TRACE_COLUMNS, rows)
    certs = _restart_certificates(problem, state) if status == EXIT_OK else []
    report = state.to_dict() if status == EXIT_OK else {"failed_stage": len(state.traces) - 1}
    report.update(
        problem=problem.params.get("name", ""), warnings=messages,
        traces=[t.to_dict() for t in state.traces],
        certificates=[c.to_dict() for c in certs],
    )
    write_json(os.path.join(out, "restart.json"), report)
    if certs:
        _print_table(certs)
    if status == EXIT_OK:
        print(f"stages={state.p} total_inner={state.total_inner}")
    return status


def cmd_check_oracle(args):
    if args.samples is None or args.samples < 1:
        raise InputError(f"field 'samples' must be a positive integer, got {args.samples}")
    problem = _load(args)
    reports = check_all(problem.oracle, problem.setup, problem.set, args.samples, args.seed)
    payload = {"problem": problem.params.get("name", ""), "reports": [r.to_dict() for r in reports]}
    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
        write_json(os.path.join(args.out_dir, "oracle_report.json"), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK if all(r.holds for r in reports) else EXIT_VIOLATION


def _state_from_report(report, problem):
    config = RestartConfig(report["epsilon"], report["mu"], report["omega"],
                           report["stages"][0]["center"] if report["stages"] else report["final_point"],
                           report["R0_sq"], report["L0"], report["radius_rule"])
    state = RestartState(config, problem.setup)
    state.centers = [np.asarray(s["center"], dtype=float) for s in report["stages"]]
    state.centers.append(np.asarray(report["final_point"], dtype=float))
    state.radii_sq = [s["R_sq"] for s in report["stages"]] + [report["final_R_sq"]]
    state.traces = [UmpTrace.from_dict(t) for t in report["traces"]]
    state.clamped = [s["clamped"] for s in report["stages"]]
    state.raw_radii_sq = [s["R_next_sq_raw"] for s in report["stages"]]
    return state


def cmd_certify(args):
    problem = _load(args)
    if problem.x_star is None:
        raise InputError("problem has no reference solution to certify against")
    out = _out_dir(args)
    certs = []
    trace_path = os.path.join(out, "trace.json")
    restart_path = os.path.join(out, "restart.json")
    if not (os.path.exists(trace_path) or os.path.exists(restart_path)):
        raise InputError(f"no trace.json or restart.json in {out}")
    if os.path.exists(trace_path):
        with open(trace_path) as fh:
            trace = UmpTrace.from_dict(json.load(fh))
        certs.extend(_solve_certificates(problem, trace))
        certs.append(certify.verify_linesearch(trace, problem.oracle, problem.setup))
    if os.path.exists(restart_path):
        with open(restart_path) as fh:
            report = json.load(fh)
        if "stages" not in report:
            raise InputError(f"{restart_path} records a failed run")
        state = _state_from_report(report, problem)
        certs.extend(_restart_certificates(problem, state))
    _print_table(certs)
    write_json(os.path.join(out, "certificates.json"), [c.to_dict() for c in certs])
    return EXIT_OK if all(c.holds for c in certs) else EXIT_VIOLATION


def _bench_one(job):
    path, desc, eps, l0 = job
    problem = problem_from_dict(desc)
    config = UmpConfig(eps, l0, start_point(problem))
    trace = ump_solve(problem.oracle, problem.setup, problem.set, config)
    row = {"problem": desc.get("name") or os.path.basename(path), "epsilon": eps, "N": trace.N,
           "oracle_calls": trace.oracle_calls, "converged": trace.converged, "S_N": trace.S_N,
           "L_max": float(trace.L.max()) if trace.N else None}
    if problem.x_star is not None and trace.N:
        row["V_avg_to_xstar"] = bregman(problem.setup, problem.x_star, trace.averaged_w)
    return row


def cmd_bench(args):
    out = _out_dir(args)
    if not args.epsilon:
        raise InputError("missing required field 'epsilon'")
    for e in args.epsilon:
        _require_positive("epsilon", e)
    jobs = []
    for path in args.problem:
        desc = read_problem_file(path)
        problem_from_dict(desc)  # validate before dispatch
        jobs.extend((path, desc, e, args.l0) for e in args.epsilon)
    workers = int(os.environ.get("BREGMAN_VI_THREADS", os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(_bench_one, jobs))
    cols = ["problem", "epsilon", "N", "oracle_calls", "converged", "S_N", "L_max", "V_avg_to_xstar"]
    write_csv(os.path.join(out, "bench.csv"), cols, rows)
    for r in rows:
        print(f"{r['problem']:<32} eps={r['epsilon']:<8g} N={r['N']}")
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="bregman-vi", description="Adaptive mirror prox for relatively strongly monotone VIs")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, problem_nargs=None):
        p.add_argument("--problem", required=True, nargs=problem_nargs, help="JSON problem file")
        p.add_argument("--out-dir", help="directory for output artifacts")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="run adaptive mirror prox")
    common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--l0", type=float, default=1.0)
    p.add_argument("--stop-mode", choices=sorted(STOP_MODES), default="epsilon")
    p.add_argument("--threshold", type=float, help="S_N target for --stop-mode sum")
    p.add_argument("--max-outer-iters", type=int, default=10**6)
    p.add_argument("--samples", type=int, default=1000, help="points for the sampled Minty gap column")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("restart", help="run restarted mirror prox")
    common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--l0", type=float, default=1.0)
    p.add_argument("--radius-rule", choices=sorted(RADIUS_RULES), default="recursive-halving")
    p.add_argument("--r0-sq", type=float, help="bound on V(x*, x0); default max_x V(x, x0)")
    p.add_argument("--max-outer-iters", type=int, default=10**6)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_restart)

    p = sub.add_parser("check-oracle", help="sample the three operator inequalities")
    common(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--samples", type=int, default=10**4)
    p.set_defaults(func=cmd_check_oracle)

    p = sub.add_parser("certify", help="recompute certificates for artifacts in --out-dir")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bench", help="solve several problems at several tolerances")
    common(p, problem_nargs="+")
    p.add_argument("--epsilon", type=float, nargs="+")
    p.add_argument("--l0", type=float, default=1.0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ProblemFileError, ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
