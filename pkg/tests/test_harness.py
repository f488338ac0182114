import csv
import warnings

import numpy as np
import pytest

from mubqkd import correction, harness, qstate
from mubqkd.config import RunConfig

FAST = dict(acquisition_seconds=1.0, samples=3, tomography_seconds=1.0)


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        schema = fh.readline()
        return schema, list(csv.DictReader(fh))


def test_visibility_examples():
    ideal = correction.joint_probabilities(qstate.pure_density(qstate.bell_psi_plus()), "conventional")
    assert harness.visibility(ideal) == pytest.approx({"HV": 100, "DA": 100})
    assert harness.visibility(np.ones((4, 4))) == pytest.approx({"HV": 0, "DA": 0})
    werner = correction.joint_probabilities(qstate.werner(0.9), "conventional")
    assert harness.visibility(werner)["HV"] == pytest.approx(90)


def test_visibility_uses_larger_of_correlated_and_anticorrelated():
    c = np.zeros((4, 4))
    c[0, 1] = c[1, 0] = 90
    c[0, 0] = c[1, 1] = 10
    c[2, 2] = c[3, 3] = 1
    assert harness.visibility(c)["HV"] == pytest.approx(80)


def test_visibility_zero_denominator():
    c = np.zeros((4, 4))
    c[0, 0] = 5
    with pytest.raises(ZeroDivisionError):
        harness.visibility(c)


@pytest.fixture(scope="module")
def night_session():
    return harness.run_pipeline(RunConfig(scenario="night-clear-10nm", **FAST))


def test_run_pipeline_night(night_session):
    rep = night_session
    assert rep.period == "night"
    assert len(rep.results("corrected")) == 3 and len(rep.results("conventional")) == 3
    assert rep.stats("corrected")["qber_mean"] < 11
    assert rep.stats("conventional")["qber_mean"] > 25
    assert rep.basis is not None and rep.concurrence > 0.7
    assert abs(rep.delays["corrected"] - 250_000) <= 100


def test_session_stats_recompute_from_rows(night_session):
    rows = night_session.results("corrected")
    st = night_session.stats("corrected")
    assert st["keyrate_mean"] == pytest.approx(np.mean([r.keyrate for r in rows]))
    assert st["qber_std"] == pytest.approx(np.std([r.qber for r in rows], ddof=1))
    summed = night_session.tables["corrected"]
    assert summed.counts.sum() >= sum(r.total_coincidences for r in rows)


def test_corrected_not_worse_than_conventional(night_session):
    c, v = night_session.stats("corrected"), night_session.stats("conventional")
    se = np.sqrt(c["qber_std"] ** 2 / c["n"] + v["qber_std"] ** 2 / v["n"])
    assert c["qber_mean"] <= v["qber_mean"] + 2 * se


def test_identity_scrambler_modes_agree():
    cfg = RunConfig(
        scenario="custom",
        samples=6,
        acquisition_seconds=1.0,
        source={"target_fidelity": "1.0", "target_concurrence": "1.0"},
    )
    rep = harness.run_pipeline(cfg)
    c, v = rep.stats("corrected"), rep.stats("conventional")
    sigma = np.hypot(c["qber_std"], v["qber_std"])
    assert abs(c["qber_mean"] - v["qber_mean"]) < 2 * sigma + 0.05


def test_bit_flip_scrambler():
    cfg = RunConfig(scenario="custom", channel={"scrambler": "rotator:45"}, **FAST)
    rep = harness.run_pipeline(cfg)
    assert rep.stats("conventional")["qber_mean"] == pytest.approx(50, abs=3)
    assert rep.stats("corrected")["qber_mean"] < 11


def test_stage_label_on_failure():
    cfg = RunConfig(source={"target_fidelity": "0.5", "target_concurrence": "0.2"}, **FAST)
    with pytest.raises(harness.PipelineError) as info:
        harness.run_pipeline(cfg)
    assert info.value.stage == "correction"
    assert str(info.value).startswith("[correction]")


def test_conventional_only_skips_correction():
    cfg = RunConfig(basis_modes=("conventional",), **FAST)
    rep = harness.run_pipeline(cfg)
    assert rep.basis is None and rep.stats("corrected") is None


@pytest.fixture(scope="module")
def daily_reports():
    cfg = RunConfig(samples=2, acquisition_seconds=0.5, night_preset="night-clear-10nm", day_preset="day-sunny-10nm")
    return harness.daily_cycle(cfg)


def test_daily_cycle_schedule(daily_reports):
    assert len(daily_reports) == 12
    for rep in daily_reports:
        expected = "day-sunny-10nm" if 8 <= rep.hour < 18 else "night-clear-10nm"
        assert rep.scenario == expected
        assert rep.period == ("day" if 8 <= rep.hour < 18 else "night")
    labels = [rep.label for rep in daily_reports]
    assert len(set(labels)) == 12


def test_night_keyrate_not_below_day():
    # equal link loss: only the background differs between day and night
    cfg = RunConfig(
        samples=4,
        acquisition_seconds=1.0,
        basis_modes=("corrected",),
        slot_hours=6.0,
        channel={"bob_transmission": "0.15"},
    )
    summary = harness.period_summary(harness.daily_cycle(cfg))
    night, day = summary["night"]["keyrate"], summary["day"]["keyrate"]
    assert night[0] >= day[0] - night[1]


def test_emit_reports_empty(tmp_path):
    paths = harness.emit_reports([], tmp_path)
    schema, rows = read_rows(paths["sessions.csv"])
    assert schema.strip() == harness.SESSIONS_SCHEMA and rows == []
    schema, rows = read_rows(paths["summary.csv"])
    assert schema.strip() == harness.SUMMARY_SCHEMA and rows == []
    with open(paths["summary.csv"]) as fh:
        assert fh.read().splitlines()[1].split(",") == list(harness.SUMMARY_FIELDS)


def test_emit_reports_daily(tmp_path, daily_reports):
    paths = harness.emit_reports(daily_reports, tmp_path)
    _, summary = read_rows(paths["summary.csv"])
    assert len(summary) == 12
    _, sessions = read_rows(paths["sessions.csv"])
    assert len(sessions) == 12 * 2 * 2
    _, states = read_rows(paths["state_metrics.csv"])
    assert [r["hour"] for r in states] == [f"{h:g}" for h in range(0, 24, 2)]
    # summary means recompute from the per-sample rows (to output precision)
    for row in summary:
        mine = [float(s["qber_pct"]) for s in sessions if s["timestamp_label"].startswith(row["session"]) and s["basis_mode"] == "corrected"]
        assert float(row["corrected_qber_mean_pct"]) == pytest.approx(np.mean(mine), abs=2e-6)
    text = open(paths["correction_report.txt"]).read()
    assert text.count("== session") == 12


def test_emit_reports_bad_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError) as info:
        harness.emit_reports([], blocker / "sub")
    assert "file" in str(info.value)


def test_workers_give_same_result():
    cfg = RunConfig(samples=1, acquisition_seconds=0.3, slot_hours=12.0)
    serial = harness.daily_cycle(cfg)
    from dataclasses import replace

    parallel = harness.daily_cycle(replace(cfg, workers=2))
    for s, p in zip(serial, parallel):
        assert [r for _, r in s.rows] == [r for _, r in p.rows]
