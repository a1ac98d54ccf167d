"""Command-line driver: run scenarios, audit traces, sweep parameters,
run the controller comparison, and execute the acceptance suite.

Exit codes: 0 clean, 1 invariant violation or failed check, 2 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import OrbitCoverError, ScenarioError
from .report import check, emit_outputs, load_trace_csv, run, write_trace_csv
from .scenarios import load_scenario

_PARAM_KEYS = ("gamma", "delta", "q_scale", "u_bar")


def _parse_params(text: str) -> dict:
    out = {}
    for chunk in text.split(","):
        if not chunk:
            continue
        key, _, value = chunk.partition("=")
        key = key.strip()
        if key not in _PARAM_KEYS:
            raise ScenarioError(f"unknown parameter override {key!r}", field="--params")
        try:
            out[key] = float(value)
        except ValueError as exc:
            raise ScenarioError(f"bad value for {key!r}: {value!r}", field="--params") from exc
    return out


def _apply_overrides(scenario, args):
    updates = {}
    for field in ("controller", "mode", "dt", "horizon", "seed"):
        value = getattr(args, field, None)
        if value is not None:
            updates[field] = value
    if updates:
        scenario = scenario.with_overrides(**updates)
    if getattr(args, "params", None):
        scenario = scenario.scaled_params(**_parse_params(args.params))
    return scenario


def _message_sink(path, region):
    handle = open(path, "w")
    handle.write("round,sender,zx,zy,adj,mass,cx,cy\n")

    def sink(round_index, messages):
        for msg in messages:
            z = region.to_world(msg.z)
            c = region.to_world(msg.centroid)
            adj = ";".join(str(i) for i in sorted(msg.adjacency))
            handle.write(f"{round_index},{msg.sender},{z[0]!r},{z[1]!r},{adj},"
                         f"{msg.mass!r},{c[0]!r},{c[1]!r}\n")

    sink.close = handle.close
    return sink


def _cmd_run(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    sink = None
    if args.log_messages:
        if scenario.mode != "distributed":
            raise ScenarioError("--log-messages needs distributed mode", field="--log-messages")
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        sink = _message_sink(out / "messages.csv", scenario.build_region())
    try:
        trace, report = run(scenario, reference_gradients=args.reference_gradients,
                            message_sink=sink)
    finally:
        if sink is not None:
            sink.close()
    if args.out:
        emit_outputs(trace, scenario, args.out)
    print(f"scenario {scenario.name}: controller={trace.controller} mode={trace.mode} "
          f"steps={report.steps}")
    print(f"  converged={report.converged} time={report.converged_time} "
          f"V: {report.v_initial:.6g} -> {report.v_final:.6g}")
    print(f"  min_h={report.min_h:.6g} max|u-w|/(gw)={report.max_input_ratio:.6g} "
          f"monotonicity_violations={report.monotonicity_violations}")
    if report.infeasible:
        print(f"  infeasible: first exit t={report.first_exit_time} "
              f"agent={report.first_exit_agent}")
    if report.aborted:
        print(f"  aborted: {report.abort_reason}")
    for v in report.violations[:10]:
        print(f"  violation[{v.kind}] t={v.t} agent={v.agent}: {v.detail}")
    return 0 if report.ok(expect_infeasible=args.expect_infeasible) else 1


def _cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    records = load_trace_csv(args.trace)
    report = check(records, scenario)
    print(f"audited {report.steps} steps: {len(report.violations)} violations, "
          f"min_h={report.min_h:.6g}, max|u-w|/(gw)={report.max_input_ratio:.6g}, "
          f"monotonicity_violations={report.monotonicity_violations}")
    for v in report.violations[:20]:
        print(f"  violation[{v.kind}] t={v.t} agent={v.agent}: {v.detail}")
    return 0 if not report.violations else 1


def _cmd_sweep(args) -> int:
    import numpy as np

    base = _apply_overrides(load_scenario(args.scenario), args)
    rows = [("baseline", base),
            ("gamma=10", base.scaled_params(gamma=10.0)),
            ("delta=10", base.scaled_params(delta=10.0)),
            ("q_scale=10", base.scaled_params(q_scale=10.0))]
    print(f"{'row':>12}  {'t_threshold':>11}  {'max|du|':>8}  {'max|u-w|/(gw)':>13}")
    results = []
    for label, sc in rows:
        trace, report = run(sc)
        t = trace.column("t")
        v = trace.column("cost_v")
        hits = np.nonzero(v <= 1e-2 * v[0])[0]
        t_thr = float(t[hits[0]]) if len(hits) else float("nan")
        chatter = float(np.abs(np.diff(trace.column("u"), axis=0)).max())
        results.append((label, t_thr, chatter, report.max_input_ratio))
        print(f"{label:>12}  {t_thr:>11.2f}  {chatter:>8.4f}  {report.max_input_ratio:>13.6f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["row,t_threshold,max_du,max_input_ratio"]
        lines += [f"{r[0]},{r[1]!r},{r[2]!r},{r[3]!r}" for r in results]
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return 0


def _cmd_compare(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    conv_trace, conv_report = run(scenario, controller="conventional")
    prop_trace, prop_report = run(scenario, controller="proposed")
    print(f"conventional: infeasible={conv_report.infeasible} "
          f"first_exit_t={conv_report.first_exit_time} agent={conv_report.first_exit_agent}")
    print(f"proposed:     min_h={prop_report.min_h:.6g} "
          f"V {prop_report.v_initial:.6g} -> {prop_report.v_final:.6g} "
          f"violations={len(prop_report.violations)}")
    if args.out:
        emit_outputs(conv_trace, scenario.with_overrides(controller="conventional"),
                     Path(args.out) / "conventional")
        emit_outputs(prop_trace, scenario, Path(args.out) / "proposed")
    ok = conv_report.ok(expect_infeasible=True) and prop_report.ok()
    return 0 if ok else 1


def _cmd_accept(args) -> int:
    from .acceptance import run_all

    results = run_all(large=args.large)
    all_ok = True
    for res in results:
        flag = "PASS" if res.passed else "FAIL"
        print(f"[{flag}] {res.name} ({res.seconds:.1f}s): {res.detail}")
        all_ok &= res.passed
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitcover",
        description="Coverage control simulator for constant-speed unicycle teams")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_run_flags=True):
        p.add_argument("scenario", help="bundled name (case1..case3, compare, "
                                        "scale25, scale100) or a JSON path")
        if with_run_flags:
            p.add_argument("--controller", choices=("proposed", "conventional"))
            p.add_argument("--mode", choices=("centralized", "distributed"))
            p.add_argument("--dt", type=float)
            p.add_argument("--horizon", type=float)
            p.add_argument("--seed", type=int)
            p.add_argument("--params", help="overrides, e.g. gamma=10,delta=0.5,q_scale=2")
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="simulate a scenario and audit the trace")
    common(p_run)
    p_run.add_argument("--log-messages", action="store_true",
                       help="write messages.csv (distributed mode)")
    p_run.add_argument("--reference-gradients", action="store_true",
                       help="drive the controller from the finite-difference oracle")
    p_run.add_argument("--expect-infeasible", action="store_true",
                       help="exit 0 only if the run records a region exit")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="re-audit a trace CSV against its scenario")
    p_check.add_argument("trace", help="trace.csv path")
    common(p_check, with_run_flags=False)
    p_check.set_defaults(func=_cmd_check)

    p_sweep = sub.add_parser("sweep", help="parameter-influence table on one scenario")
    common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cmp = sub.add_parser("compare", help="run both controllers on one scenario")
    common(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_acc = sub.add_parser("accept", help="run the acceptance suite")
    p_acc.add_argument("--large", action="store_true",
                       help="include the 100-robot field study")
    p_acc.set_defaults(func=_cmd_accept)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"input error ({exc.field}): {exc}", file=sys.stderr)
        return 2
    except OrbitCoverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
