import json

import numpy as np
import pytest

from orbitcover.errors import TraceFormatError
from orbitcover.cli import main
from orbitcover.report import (
    check,
    emit_outputs,
    load_trace_csv,
    run,
    write_trace_csv,
)
from orbitcover.scenarios import load_scenario


@pytest.fixture(scope="module")
def short_case1():
    scenario = load_scenario("case1").with_overrides(horizon=3.0)
    trace, report = run(scenario, startup_check=False)
    return scenario, trace, report


class TestTraceCsv:
    def test_row_count(self, short_case1, tmp_path):
        scenario, trace, _ = short_case1
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1 + len(trace.records) * scenario.n_agents

    def test_round_trip(self, short_case1, tmp_path):
        _, trace, _ = short_case1
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        records = load_trace_csv(path)
        assert len(records) == len(trace.records)
        for orig, loaded in zip(trace.records, records):
            assert np.array_equal(orig.z, loaded.z)
            assert np.array_equal(orig.u, loaded.u)
            assert loaded.cost_v == orig.cost_v

    def test_corrupt_trace_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nonsense,header\n1,2\n")
        with pytest.raises(TraceFormatError):
            load_trace_csv(path)

    def test_truncated_row_rejected(self, short_case1, tmp_path):
        _, trace, _ = short_case1
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        lines = path.read_text().splitlines()
        lines[1] = ",".join(lines[1].split(",")[:5])
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(TraceFormatError):
            load_trace_csv(path)


class TestCheck:
    def test_clean_audit(self, short_case1):
        scenario, trace, report = short_case1
        assert report.clean
        assert not report.violations
        assert report.min_h > 0
        assert report.max_input_ratio < 1.0

    def test_injected_containment_fault(self, short_case1, tmp_path):
        scenario, trace, _ = short_case1
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        records = load_trace_csv(path)
        bad_step = 7
        records[bad_step].z[0] = (5.0, 1.0)  # outside the 4 x 2.8 region
        report = check(records, scenario)
        hits = [v for v in report.violations if v.kind == "containment"]
        assert hits and hits[0].t == pytest.approx(records[bad_step].t)
        assert hits[0].agent == 0

    def test_injected_saturation_fault(self, short_case1, tmp_path):
        scenario, trace, _ = short_case1
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        records = load_trace_csv(path)
        bad_step = 4
        records[bad_step].u[2] = 0.8 + 1.0 * 0.8  # exactly the open bound
        report = check(records, scenario)
        hits = [v for v in report.violations if v.kind == "saturation"]
        assert hits and hits[0].t == pytest.approx(records[bad_step].t)
        assert hits[0].agent == 2

    def test_tampered_cost_detected(self, short_case1, tmp_path):
        scenario, trace, _ = short_case1
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        records = load_trace_csv(path)
        object.__setattr__(records[3], "cost_v", records[3].cost_v * 1.001)
        report = check(records, scenario)
        assert any(v.kind == "cost-mismatch" for v in report.violations)


class TestEmit:
    def test_outputs_and_determinism(self, short_case1, tmp_path):
        scenario, trace, _ = short_case1
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        files1 = emit_outputs(trace, scenario, out1)
        files2 = emit_outputs(trace, scenario, out2)
        names = sorted(p.name for p in files1)
        assert names == ["cost.svg", "inputs.svg", "report.json", "trace.csv",
                         "trajectories.svg"]
        for p1, p2 in zip(sorted(files1), sorted(files2)):
            assert p1.read_bytes() == p2.read_bytes()

    def test_cost_axis_label_switches(self, tmp_path):
        scenario = load_scenario("compare").with_overrides(horizon=1.0)
        conv_trace, _ = run(scenario, controller="conventional")
        emit_outputs(conv_trace, scenario.with_overrides(controller="conventional"),
                     tmp_path / "conv", formats=("svg",))
        svg = (tmp_path / "conv" / "cost.svg").read_text()
        assert ">H<" in svg
        prop = load_scenario("case1").with_overrides(horizon=1.0)
        prop_trace, _ = run(prop, startup_check=False)
        emit_outputs(prop_trace, prop, tmp_path / "prop", formats=("svg",))
        svg = (tmp_path / "prop" / "cost.svg").read_text()
        assert ">V<" in svg

    def test_report_json_fields(self, short_case1, tmp_path):
        scenario, trace, _ = short_case1
        emit_outputs(trace, scenario, tmp_path, formats=("json",))
        doc = json.loads((tmp_path / "report.json").read_text())
        for key in ("converged", "converged_time", "min_h", "max_input_ratio",
                    "monotonicity_violations", "infeasible", "first_exit_time",
                    "violations"):
            assert key in doc


class TestCli:
    def test_run_clean_exit_zero(self, tmp_path, capsys):
        code = main(["run", "case1", "--horizon", "2.0", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "trace.csv").exists()
        assert (tmp_path / "report.json").exists()
        out = capsys.readouterr().out
        assert "converged" in out

    def test_run_conventional_expect_infeasible(self, capsys):
        code_plain = main(["run", "compare", "--controller", "conventional",
                           "--horizon", "5.0"])
        assert code_plain == 1
        code_expected = main(["run", "compare", "--controller", "conventional",
                              "--horizon", "5.0", "--expect-infeasible"])
        assert code_expected == 0

    def test_run_param_override(self, capsys):
        # An over-large gain chatters, so the per-step descent slack is
        # violated and the run honestly exits nonzero.
        code = main(["run", "case1", "--horizon", "1.0", "--params", "gamma=10"])
        out = capsys.readouterr().out
        assert code == 1
        assert "monotonicity" in out
        code = main(["run", "case1", "--horizon", "1.0", "--params", "delta=4"])
        assert code == 0

    def test_missing_scenario_is_input_error(self, capsys):
        assert main(["run", "/nonexistent/path.json"]) == 2

    def test_check_subcommand(self, tmp_path, capsys):
        assert main(["run", "case1", "--horizon", "2.0", "--out", str(tmp_path)]) == 0
        assert main(["check", str(tmp_path / "trace.csv"), "case1"]) == 0
        text = (tmp_path / "trace.csv").read_text()
        lines = text.splitlines()
        parts = lines[1].split(",")
        parts[5] = "9.0"  # drag one virtual center outside
        lines[1] = ",".join(parts)
        (tmp_path / "trace.csv").write_text("\n".join(lines) + "\n")
        assert main(["check", str(tmp_path / "trace.csv"), "case1"]) == 1

    def test_distributed_message_log(self, tmp_path):
        code = main(["run", "case1", "--horizon", "0.5", "--mode", "distributed",
                     "--log-messages", "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "messages.csv").read_text().splitlines()
        assert lines[0] == "round,sender,zx,zy,adj,mass,cx,cy"
        assert len(lines) > 1
        first = lines[1].split(",")
        assert len(first) == 8

    def test_gamma10_reaches_threshold_faster_with_chatter(self):
        import numpy as np

        base = load_scenario("case2").with_overrides(horizon=60.0)
        fast = base.scaled_params(gamma=10.0)
        trace_fast, _ = run(fast, startup_check=False)
        trace_base, _ = run(base, startup_check=False)
        v_fast = trace_fast.column("cost_v")
        v_base = trace_base.column("cost_v")
        assert np.any(v_fast <= 1e-2 * v_fast[0])
        assert not np.any(v_base <= 1e-2 * v_base[0])
        # steering offsets chatter around zero late in the gamma=10 run
        tail = trace_fast.column("u")[-100:] - 0.8
        flips = (np.diff(np.sign(tail), axis=0) != 0).sum()
        assert flips > 20
