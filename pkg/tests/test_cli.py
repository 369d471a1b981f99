"""CLI behavior: outputs, exit codes, and byte-level determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from jccopt.cases import bundled_case_path
from jccopt.cli import main
from jccopt.model import SampleSet, problem_to_dict
from jccopt.toys import INTERVAL_SCENARIOS, interval_toy

OVERLAP = str(bundled_case_path("overlap"))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_example1_reproduces_reference_objectives(capsys):
    code, out, _ = run(capsys, "example1", "--method", "also-x")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 5
    assert "eps=0.00" in lines[0] and "infeasible" in lines[0]
    assert "objective=3.000000" in lines[2]
    assert "objective=2.000000" in lines[3]
    assert "objective=1.000000" in lines[4]


def test_example1_rejects_bad_eps(capsys):
    code, _, err = run(capsys, "example1", "--eps", "1.5")
    assert code == 1
    assert "outside" in err


def test_example2_trace_schema_and_determinism(tmp_path, capsys):
    out_dir = tmp_path / "e2"
    code, out1, _ = run(capsys, "example2", "--seed", "0",
                        "--out", str(out_dir))
    assert code == 0
    trace = out_dir / "example2_also-x_trace.csv"
    header = trace.read_text().splitlines()[0]
    assert header == "iteration,objective,vp_group1,vp_group2"
    first = trace.read_bytes()
    code, out2, _ = run(capsys, "example2", "--seed", "0",
                        "--out", str(out_dir))
    assert code == 0
    assert out1 == out2
    assert trace.read_bytes() == first


def test_solve_report_round_trip(tmp_path, capsys):
    problem_file = tmp_path / "p.json"
    problem_file.write_text(json.dumps(problem_to_dict(interval_toy(0.4))))
    report_file = tmp_path / "r.json"
    code, out, _ = run(capsys, "solve", str(problem_file),
                       "--method", "also-x", "--f-lower", "0",
                       "--f-upper", "8", "--out", str(report_file))
    assert code == 0
    assert "objective=3.000000" in out
    report = json.loads(report_file.read_text())
    assert report["results"]["also-x"]["status"] == "feasible"
    assert report["results"]["also-x"]["objective"] == pytest.approx(3.0)
    first = report_file.read_bytes()
    run(capsys, "solve", str(problem_file), "--method", "also-x",
        "--f-lower", "0", "--f-upper", "8", "--out", str(report_file))
    assert report_file.read_bytes() == first


def test_solve_requires_both_bounds(capsys, tmp_path):
    problem_file = tmp_path / "p.json"
    problem_file.write_text(json.dumps(problem_to_dict(interval_toy(0.4))))
    code, _, err = run(capsys, "solve", str(problem_file), "--f-lower", "1")
    assert code == 1
    assert "together" in err


def test_dispatch_report_audits_and_determinism(tmp_path, capsys):
    out_dir = tmp_path / "d"
    args = ("dispatch", OVERLAP, "--rho", "0.0", "--method", "all",
            "--out", str(out_dir))
    code, out1, _ = run(capsys, *args)
    assert code == 0
    assert "method=cvar" in out1 and "infeasible" in out1
    report = json.loads((out_dir / "dispatch_report.json").read_text())
    assert report["results"]["also-x"]["dispatch_cost"] == pytest.approx(25.8)
    assert report["audits"]["also-x"]["balance"] <= 1e-6
    lower = out_dir / "trajectory_adn0_lower.csv"
    header = lower.read_text().splitlines()[0].split(",")
    assert header[:3] == ["t", "energy", "energy_plus_reserve"]
    assert header[3] == "bound_sample_0" and header[-1] == "bound_sample_9"
    snap = {p.name: p.read_bytes() for p in out_dir.iterdir()}
    code, out2, _ = run(capsys, *args)
    assert code == 0
    assert out1 == out2
    for p in out_dir.iterdir():
        assert p.read_bytes() == snap[p.name]


def test_dispatch_trajectories_center_on_family_mean(tmp_path, capsys):
    out_dir = tmp_path / "d"
    run(capsys, "dispatch", OVERLAP, "--method", "also-x",
        "--out", str(out_dir))
    case = json.loads(Path(OVERLAP).read_text())
    rows = np.asarray(case["adns"][0]["boundary_samples"])
    T = case["horizon"]
    e_upper = rows[:, 3 * T:]
    table = np.loadtxt(out_dir / "trajectory_adn0_upper.csv", delimiter=",",
                       skiprows=1)
    # centered samples must average to zero at each t
    samples = table[:, 3:]
    np.testing.assert_allclose(samples.mean(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(samples, (e_upper - e_upper.mean(axis=0)).T,
                               atol=1e-12)


def test_dispatch_sweep_csv_schema(tmp_path, capsys):
    out_dir = tmp_path / "s"
    code, _, _ = run(capsys, "dispatch", OVERLAP, "--rho-grid", "0.0,0.01",
                     "--method", "also-x", "--out", str(out_dir))
    assert code == 0
    lines = (out_dir / "sweep.csv").read_text().splitlines()
    assert lines[0] == "rho,method,group,status,cost,reliability"
    assert len(lines) == 1 + 2 * 2  # 2 radii x 2 groups, all feasible
    assert lines[1].startswith("0.0,also-x,g1,feasible,")


def test_dispatch_rejects_rho_and_grid_together(capsys):
    code, _, err = run(capsys, "dispatch", OVERLAP, "--rho", "0",
                       "--rho-grid", "0,1")
    assert code == 1
    assert "not both" in err


def test_evaluate_from_solve_report(tmp_path, capsys):
    problem_file = tmp_path / "p.json"
    problem_file.write_text(json.dumps(problem_to_dict(interval_toy(0.4))))
    report_file = tmp_path / "r.json"
    run(capsys, "solve", str(problem_file), "--method", "also-x",
        "--f-lower", "0", "--f-upper", "8", "--out", str(report_file))
    test_csv = tmp_path / "t.csv"
    SampleSet(INTERVAL_SCENARIOS).to_csv(test_csv)
    code, out, _ = run(capsys, "evaluate", str(report_file), str(test_csv))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "group,reliability"
    assert lines[1] == "interval,0.6"


def test_evaluate_dimension_mismatch(tmp_path, capsys):
    problem_file = tmp_path / "p.json"
    problem_file.write_text(json.dumps(problem_to_dict(interval_toy(0.4))))
    report_file = tmp_path / "r.json"
    run(capsys, "solve", str(problem_file), "--method", "also-x",
        "--f-lower", "0", "--f-upper", "8", "--out", str(report_file))
    bad_csv = tmp_path / "bad.csv"
    SampleSet(np.ones((3, 5))).to_csv(bad_csv)
    code, _, err = run(capsys, "evaluate", str(report_file), str(bad_csv))
    assert code == 1
    assert "match no group" in err


def test_generate_deterministic_and_from_file(tmp_path, capsys):
    spec = {"n": 4, "columns": 2, "seed": 9,
            "distribution": {"kind": "gaussian", "mean": 1.0, "std": 0.5},
            "output": "draw.csv"}
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(spec))
    code, out, _ = run(capsys, "generate", str(spec_file))
    assert code == 0 and "4 rows x 2 columns" in out
    first = (tmp_path / "draw.csv").read_bytes()
    run(capsys, "generate", str(spec_file))
    assert (tmp_path / "draw.csv").read_bytes() == first

    copy_spec = {"distribution": {"kind": "from-file", "path": "draw.csv"},
                 "output": "copy.csv"}
    copy_file = tmp_path / "copy.json"
    copy_file.write_text(json.dumps(copy_spec))
    code, _, _ = run(capsys, "generate", str(copy_file))
    assert code == 0
    assert (tmp_path / "copy.csv").read_bytes() == first


def test_missing_input_file_is_usage_error(capsys):
    code, _, err = run(capsys, "solve", "/no/such/file.json")
    assert code == 1
    assert "error" in err


def test_unknown_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["dispatch", OVERLAP, "--bogus"])
    assert exc.value.code == 1


def test_log_level_env_does_not_change_stdout(monkeypatch, capsys):
    code, quiet, _ = run(capsys, "example1", "--eps", "0.8",
                         "--method", "oracle")
    monkeypatch.setenv("JCCOPT_LOG_LEVEL", "DEBUG")
    code2, noisy, _ = run(capsys, "example1", "--eps", "0.8",
                          "--method", "oracle")
    assert code == code2 == 0
    assert quiet == noisy
