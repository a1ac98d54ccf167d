"""Run reports, the trace CSV format, and the independent post-run auditor.

The auditor recomputes the barrier cost from the logged virtual centers and
cross-checks the logged values, then evaluates every runtime invariant:
strict containment, strict input saturation, per-step monotone descent of
the barrier cost (with a small discrete-time slack), and the stop rule.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .errors import OrbitCoverError, TraceFormatError
from .coverage import cell_moments, coverage_cost_v
from .dynamics import CONVENTIONAL, SimTrace, StepRecord
from .scenarios import Scenario
from .voronoi import Configuration, compute_partition

TRACE_HEADER = "t,agent,zeta_x,zeta_y,theta,z_x,z_y,c_x,c_y,u,sigma,V,H"

# Per-step allowance on the descent of the barrier cost, relative to
# max(1, V): discrete sampling of a continuously nonincreasing quantity.
MONOTONE_SLACK = 1e-6

# Relative tolerance for the independent recomputation of the logged cost.
COST_RECHECK_RTOL = 1e-9


@dataclasses.dataclass(frozen=True)
class Violation:
    kind: str
    t: float
    agent: int | None
    detail: str


@dataclasses.dataclass
class RunReport:
    """Summary of one run, aligned with the trace it was computed from."""

    controller: str
    mode: str
    steps: int
    converged: bool
    converged_time: float | None
    min_h: float
    max_input_ratio: float
    monotonicity_violations: int
    infeasible: bool
    first_exit_time: float | None
    first_exit_agent: int | None
    aborted: bool
    abort_reason: str | None
    v_initial: float
    v_final: float
    violations: tuple = ()

    @property
    def clean(self) -> bool:
        return not self.violations and not self.aborted and not self.infeasible

    def ok(self, expect_infeasible: bool = False) -> bool:
        if expect_infeasible:
            return self.infeasible and not self.violations and not self.aborted
        return self.clean

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["violations"] = [dataclasses.asdict(v) for v in self.violations]
        return doc


def write_trace_csv(trace: SimTrace, path) -> None:
    """Write the flat per-agent trace; global columns repeat per agent row."""
    lines = [TRACE_HEADER]
    for rec in trace.records:
        for k in range(len(rec.theta)):
            lines.append(",".join(repr(float(x)) for x in (
                rec.t, k, rec.zeta[k, 0], rec.zeta[k, 1], rec.theta[k],
                rec.z[k, 0], rec.z[k, 1], rec.c[k, 0], rec.c[k, 1],
                rec.u[k], rec.sigma[k], rec.cost_v, rec.cost_h)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_trace_csv(path) -> list:
    """Parse a trace CSV back into step records."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != TRACE_HEADER:
        raise TraceFormatError(f"unexpected trace header in {path}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 13:
            raise TraceFormatError(f"expected 13 columns, got {len(parts)}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise TraceFormatError(f"non-numeric trace entry: {exc}") from exc
    if not rows:
        raise TraceFormatError("trace has no data rows")
    data = np.asarray(rows)
    records = []
    times = np.unique(data[:, 0])
    times.sort()
    for t in times:
        block = data[data[:, 0] == t]
        order = np.argsort(block[:, 1])
        block = block[order]
        if np.any(block[:, 1] != np.arange(len(block))):
            raise TraceFormatError(f"agent ids at t={t} are not contiguous")
        records.append(StepRecord(
            t=float(t), zeta=block[:, 2:4].copy(), theta=block[:, 4].copy(),
            z=block[:, 5:7].copy(), c=block[:, 7:9].copy(), u=block[:, 9].copy(),
            sigma=block[:, 10].copy(), cost_v=float(block[0, 11]),
            cost_h=float(block[0, 12])))
    records.sort(key=lambda r: r.t)
    return records


def check(records, scenario: Scenario, *, trace: SimTrace | None = None) -> RunReport:
    """Audit a recorded run against the scenario's invariants.

    Recomputes the barrier cost independently from the logged virtual
    centers; any disagreement beyond the recheck tolerance, containment
    breach, saturation breach, or monotone-descent breach becomes a
    violation entry pinned to its step.
    """
    if not records:
        raise TraceFormatError("cannot audit an empty trace")
    region = scenario.build_region()
    params = scenario.control_params()
    phi = scenario.density
    omegas = np.array([a.omega for a in scenario.agents])
    gammas = params.gamma
    controller = trace.controller if trace is not None else scenario.controller

    violations = []
    min_h = math.inf
    max_ratio = 0.0
    mono = 0
    prev_v = None
    for rec in records:
        z = region.to_frame(rec.z)
        h = region.min_h(z)
        min_h = min(min_h, float(h.min()))
        for k in np.nonzero(h <= 0.0)[0]:
            violations.append(Violation("containment", rec.t, int(k),
                                        f"virtual center outside region (h={h[k]:.3g})"))
        ratio = np.abs(rec.u - omegas) / (gammas * np.abs(omegas))
        max_ratio = max(max_ratio, float(ratio.max()))
        for k in np.nonzero(ratio >= 1.0)[0]:
            violations.append(Violation("saturation", rec.t, int(k),
                                        f"|u - omega| reached {ratio[k]:.6g} of the bound"))
        if np.all(h > 0.0):
            try:
                cfg = Configuration(centers=z)
                partition = compute_partition(region, cfg)
                moments = cell_moments(partition, phi)
                v_re = coverage_cost_v(cfg, region, moments, params)
                if abs(v_re - rec.cost_v) > COST_RECHECK_RTOL * max(1.0, abs(rec.cost_v)):
                    violations.append(Violation("cost-mismatch", rec.t, None,
                                                f"logged V={rec.cost_v!r}, recomputed {v_re!r}"))
            except OrbitCoverError as exc:
                violations.append(Violation("cost-mismatch", rec.t, None, str(exc)))
        if controller != CONVENTIONAL and prev_v is not None:
            if rec.cost_v - prev_v > MONOTONE_SLACK * max(1.0, prev_v):
                mono += 1
                violations.append(Violation("monotonicity", rec.t, None,
                                            f"V rose by {rec.cost_v - prev_v:.3g}"))
        prev_v = rec.cost_v

    converged, conv_time = _recheck_convergence(records, scenario)
    return RunReport(
        controller=controller,
        mode=trace.mode if trace is not None else scenario.mode,
        steps=len(records),
        converged=converged,
        converged_time=conv_time,
        min_h=min_h,
        max_input_ratio=max_ratio,
        monotonicity_violations=mono,
        infeasible=trace.infeasible if trace is not None else False,
        first_exit_time=trace.first_exit_time if trace is not None else None,
        first_exit_agent=trace.first_exit_agent if trace is not None else None,
        aborted=trace.aborted if trace is not None else False,
        abort_reason=trace.abort_reason if trace is not None else None,
        v_initial=records[0].cost_v,
        v_final=records[-1].cost_v,
        violations=tuple(violations),
    )


def _recheck_convergence(records, scenario: Scenario):
    dwell_steps = int(math.ceil(scenario.loc_dwell / scenario.dt)) + 1
    streak = 0
    for rec in records:
        gap = np.hypot(*(rec.z - rec.c).T).max()
        if gap <= scenario.loc_tol:
            streak += 1
            if streak >= dwell_steps:
                return True, rec.t - (streak - 1) * scenario.dt
        else:
            streak = 0
    return False, None


def run(scenario: Scenario, *, controller: str | None = None, mode: str | None = None,
        reference_gradients: bool = False, message_sink=None,
        startup_check: bool = True):
    """Simulate a scenario and audit the result; returns (trace, report)."""
    from .dynamics import simulate

    region = scenario.build_region()
    trace = simulate(
        region, scenario.density, scenario.control_params(),
        scenario.initial_states(region),
        controller=controller or scenario.controller,
        mode=mode or scenario.mode,
        dt=scenario.dt, horizon=scenario.horizon,
        loc_tol=scenario.loc_tol, loc_dwell=scenario.loc_dwell,
        seed=scenario.seed, reference_gradients=reference_gradients,
        message_sink=message_sink, startup_check=startup_check)
    report = check(trace.records, scenario, trace=trace)
    return trace, report


DEFAULT_SWEEP_GRID = (
    ("baseline", {}),
    ("gamma=10", {"gamma": 10.0}),
    ("delta=10", {"delta": 10.0}),
    ("q_scale=10", {"q_scale": 10.0}),
)


def sweep(base_scenario: Scenario, grid=DEFAULT_SWEEP_GRID):
    """Run one scenario per grid row from a shared initial condition.

    Each row is ``(label, overrides)`` with overrides drawn from
    gamma/delta/q_scale/u_bar.  Returns per-row summaries: the time for the
    barrier cost to fall to 1% of its initial value, the worst step-to-step
    input jump (chattering), and the saturation ratio.
    """
    rows = []
    for label, overrides in grid:
        scenario = base_scenario.scaled_params(**overrides) if overrides else base_scenario
        trace, report = run(scenario)
        t = trace.column("t")
        v = trace.column("cost_v")
        hits = np.nonzero(v <= 1e-2 * v[0])[0]
        rows.append({
            "label": label,
            "time_to_threshold": float(t[hits[0]]) if len(hits) else float("inf"),
            "max_input_jump": float(np.abs(np.diff(trace.column("u"), axis=0)).max()),
            "max_input_ratio": report.max_input_ratio,
            "monotonicity_violations": report.monotonicity_violations,
        })
    return rows


def write_report_json(report: RunReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def emit_outputs(trace: SimTrace, scenario: Scenario, out_dir,
                 formats=("csv", "json", "svg")) -> list:
    """Write trace/report/plot files; emission is byte-deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out / "trace.csv"
        write_trace_csv(trace, path)
        written.append(path)
    if "json" in formats:
        report = check(trace.records, scenario, trace=trace)
        path = out / "report.json"
        write_report_json(report, path)
        written.append(path)
    if "svg" in formats:
        from . import plots
        written.extend(plots.render_all(trace, scenario, out))
    return written
