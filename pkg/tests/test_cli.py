import csv
import json


from herglotzsim import cli
from herglotzsim.errors import InconsistentInitialState, StepSizeUnderflow, ZenoDetected


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sphere_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, text, _ = _run(["run", "--scenario", "sphere", "--set", "beta=0.1", "--t-end", "3",
                          "--out", str(out)], capsys)
    assert code == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "q0", "q1", "v0", "v1", "v2", "v3", "v4", "z", "E", "T", "V",
                       "active_mask", "segment_id"]
    masks = {int(r[12]) for r in rows[1:]}
    assert masks == {0, 3}
    assert float(rows[-1][0]) == 3.0
    events = json.loads((tmp_path / "traj.events.json").read_text())
    assert [e["kind"] for e in events] == ["activation"]
    for key in ("t", "kind", "v_minus", "v_plus", "T_minus", "T_plus", "T_lost", "carnot_residual",
                "constraint_residual_post"):
        assert key in events[0]
    ledger = json.loads((tmp_path / "traj.ledger.json").read_text())
    assert len(ledger["segments"]) == 2
    assert "events\t1" in text


def test_elastic_cylinder_has_no_impact_loss(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = _run(["run", "--scenario", "cylinder", "--set", "alpha=1", "--t-end", "0.6",
                       "--out", str(out)], capsys)
    assert code == 0
    ledger = json.loads((tmp_path / "c.ledger.json").read_text())
    assert ledger["events"]
    assert all(abs(e["dE_measured"]) < 1e-12 for e in ledger["events"])


def test_outputs_byte_identical(tmp_path, capsys):
    paths = []
    for name in ("a", "b"):
        out = tmp_path / name / "traj.csv"
        assert _run(["run", "--scenario", "cylinder", "--t-end", "1", "--out", str(out)], capsys)[0] == 0
        paths.append(out)
    for suffix in (".csv", ".events.json", ".ledger.json"):
        a = paths[0].with_name("traj" + suffix).read_bytes()
        b = paths[1].with_name("traj" + suffix).read_bytes()
        assert a == b


def test_malformed_config_names_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "sphere", "t_spam": [0, 1]}))
    code, _, err = _run(["run", "--config", str(cfg)], capsys)
    assert code == 2 and "t_spam" in err
    cfg.write_text(json.dumps({"scenario": "sphere", "output": {"sample_dx": 0.1}}))
    code, _, err = _run(["run", "--config", str(cfg)], capsys)
    assert code == 2 and "sample_dx" in err
    cfg.write_text(json.dumps({"scenario": "sphere", "integrator": {"rel_tol": -1}}))
    code, _, err = _run(["run", "--config", str(cfg)], capsys)
    assert code == 2 and "rel_tol" in err
    cfg.write_text("{not json")
    code, _, err = _run(["run", "--config", str(cfg)], capsys)
    assert code == 2


def test_unknown_scenario_and_param(capsys):
    code, _, err = _run(["run", "--scenario", "pendulum"], capsys)
    assert code == 2 and "pendulum" in err
    code, _, err = _run(["run", "--scenario", "sphere", "--set", "radius=2"], capsys)
    assert code == 2 and "radius" in err
    code, _, err = _run(["run", "--scenario", "sphere", "--t-end", "-1"], capsys)
    assert code == 2 and "t_span" in err


def test_config_file_run(tmp_path, capsys):
    scen = tmp_path / "ball.json"
    scen.write_text(json.dumps({"scenario": "sphere", "params": {"x0": -0.5}}))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "scenario": str(scen), "params": {"beta": 0.2}, "t_span": [0, 2],
        "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-12, "event_tol": 1e-11, "max_step": 0.1},
        "output": {"path": str(tmp_path / "o.json"), "format": "json", "sample_dt": 0.5},
    }))
    code, _, _ = _run(["run", "--config", str(cfg)], capsys)
    assert code == 0
    data = json.loads((tmp_path / "o.json").read_text())
    assert data["columns"][0] == "t" and data["rows"][0][1] == -0.5


def test_zeno_exit_code_keeps_partial_output(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "z.csv"
    cfg.write_text(json.dumps({"scenario": "cylinder", "t_span": [0, 2],
                               "integrator": {"max_events_per_window": 5},
                               "output": {"path": str(out)}}))
    code, _, err = _run(["run", "--config", str(cfg)], capsys)
    assert code == 3 and "ZenoDetected" in err
    assert out.exists()


def test_error_code_mapping():
    assert cli._error_code(ZenoDetected("x")) == 3
    assert cli._error_code(StepSizeUnderflow("x")) == 4
    assert cli._error_code(InconsistentInitialState("x")) == 6


def test_inconsistent_start_exit_code(capsys):
    code, _, err = _run(["run", "--scenario", "sphere", "--set", "x0=1.0"], capsys)
    assert code == 6 and "InconsistentInitialState" in err


def test_figures(tmp_path, capsys):
    out = tmp_path / "f.csv"
    code, text, _ = _run(["run", "--scenario", "sphere", "--out", str(out), "--figures"], capsys)
    assert code == 0
    for kind in ("energy", "states", "multipliers"):
        png = tmp_path / f"f_{kind}.png"
        assert png.exists() and png.read_bytes()[:4] == b"\x89PNG"


def test_sweep_parallel(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, text, _ = _run(["run", "--scenario", "sphere", "--out", str(out), "--sweep", "beta=0.1,0.2",
                          "--jobs", "2"], capsys)
    assert code == 0
    assert (tmp_path / "s_beta0.1.csv").exists() and (tmp_path / "s_beta0.2.csv").exists()
    assert "# beta=0.1\texit=0" in text


def test_verify_sphere(capsys):
    code, text, _ = _run(["verify", "--scenario", "sphere"], capsys)
    assert code == 0
    assert "rolling_phase" in text and "PASS" in text


def test_verify_short_span_skips(capsys):
    code, text, _ = _run(["verify", "--scenario", "sphere", "--t-end", "0.5"], capsys)
    assert code == 0
    assert "SKIPPED" in text


def test_verify_loose_tolerance(capsys):
    code, _, _ = _run(["verify", "--scenario", "sphere", "--tol", "1e-2"], capsys)
    assert code == 0


def test_verify_cylinder_reports_reference_multiplier_mismatch(capsys):
    code, text, _ = _run(["verify", "--scenario", "cylinder"], capsys)
    assert code == 5
    lines = {l.split()[0]: l.split()[1] for l in text.splitlines()[1:]}
    assert lines["multipliers_display"] == "FAIL"
    assert lines["multipliers_independent"] == "PASS"
    assert lines["carnot"] == "PASS"


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "herglotzsim", "verify", "--scenario", "sphere", "--t-end", "0.5"],
                       capture_output=True, text=True)
    assert r.returncode == 0
