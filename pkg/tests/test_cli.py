import io
import subprocess
import sys

import numpy as np
import pytest

from mubqkd import channel, cli, qstate, timetag
from mubqkd.timetag import ClockModel


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def test_gen_config(tmp_path):
    code, text = run("gen-config")
    assert code == 0 and "[run]" in text
    path = tmp_path / "d.cfg"
    assert run("gen-config", "-o", str(path))[0] == 0
    assert path.read_text() == text


def test_run_writes_reports(tmp_path):
    code, text = run("run", "--samples", "2", "--acquisition-seconds", "0.5", "--output", str(tmp_path))
    assert code == 0
    assert "corrected" in text
    for name in ("sessions.csv", "summary.csv", "state_metrics.csv", "correction_report.txt"):
        assert (tmp_path / name).exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MUBQKD_OUTPUT_DIR", str(tmp_path / "env"))
    assert run("run", "--samples", "1", "--acquisition-seconds", "0.3")[0] == 0
    assert (tmp_path / "env" / "summary.csv").exists()


def test_config_error_exit_code(tmp_path):
    assert run("run", "--scenario", "nowhere")[0] == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[run]\nsamples = -1\n")
    assert run("run", "--config", str(bad))[0] == 2


def test_model_error_exit_code(tmp_path):
    path = tmp_path / "rho.txt"
    qstate.save_density(path, qstate.werner(0.3))
    assert run("correct", str(path))[0] == 3
    path.write_text("garbage\n")
    assert run("correct", str(path))[0] == 3


def test_tomo_then_correct(tmp_path):
    rho_path, rec_path = tmp_path / "rho.txt", tmp_path / "rec.txt"
    code, text = run("tomo", "--save-rho", str(rho_path), "--save-record", str(rec_path))
    assert code == 0 and "concurrence" in text
    code, again = run("tomo", "--record", str(rec_path))
    assert code == 0 and again == text
    code, report = run("correct", str(rho_path))
    assert code == 0 and "B1/B2 setting" in report


def test_coinc_on_stream_files(tmp_path):
    s, ch, noise, det = channel.scenario_preset("night-clear-10nm")
    a, b = timetag.generate_streams(ch.deliver(s.state()), "conventional", s, ch, noise, det, ClockModel(40_000), 1.0, seed=3)
    timetag.write_ttag(tmp_path / "a.ttag", a)
    timetag.write_csv(tmp_path / "b.csv", b)
    code, text = run("coinc", str(tmp_path / "a.ttag"), str(tmp_path / "b.csv"), "--mode", "conventional")
    assert code == 0
    lines = dict(line.split(maxsplit=1) for line in text.splitlines() if line.split()[0] in ("delay_ps", "qber_pct"))
    assert abs(int(lines["delay_ps"]) - 40_000) <= 100
    assert float(lines["qber_pct"]) > 20


def test_coinc_missing_file(tmp_path):
    assert run("coinc", str(tmp_path / "x"), str(tmp_path / "y"))[0] == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mubqkd", "gen-config"], capture_output=True, text=True)
    assert res.returncode == 0 and "[schedule]" in res.stdout
