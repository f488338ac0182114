"""Session orchestration: tomography, correction and protocol runs, reports.

A session simulates what one 2-hour slot of the experiment does: a
tomography of the delivered state, derivation of Bob's corrected bases,
then ``samples`` protocol acquisitions of T seconds in each basis mode.
"""

import contextlib
import csv
import io
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import correction, protocol, qstate, timetag, tomography
from .errors import ModelError, MubqkdError

SESSIONS_SCHEMA = "# mubqkd sessions v1"
SUMMARY_SCHEMA = "# mubqkd summary v1"
STATE_SCHEMA = "# mubqkd state-metrics v1"

SUMMARY_FIELDS = (
    "session", "hour", "period", "scenario", "samples",
    "corrected_keyrate_mean_hz", "corrected_keyrate_std_hz", "corrected_qber_mean_pct", "corrected_qber_std_pct",
    "corrected_visibility_hv_pct", "corrected_visibility_da_pct",
    "conventional_keyrate_mean_hz", "conventional_keyrate_std_hz", "conventional_qber_mean_pct", "conventional_qber_std_pct",
    "conventional_visibility_hv_pct", "conventional_visibility_da_pct",
)
STATE_FIELDS = ("session", "hour", "fidelity_psi_plus", "concurrence", "purity", "nearest_pure_fidelity", "true_fidelity_psi_plus")


class PipelineError(ModelError):
    """A model error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except PipelineError:
        raise
    except MubqkdError as exc:
        raise PipelineError(name, exc) from exc


def visibility(table):
    """Visibility in percent per basis from correlated vs anti-correlated coincidences.

    Accepts a :class:`~mubqkd.timetag.CoincidenceTable` or any 4x4 array of
    counts or probabilities.
    """
    c = np.asarray(getattr(table, "counts", table), dtype=float)
    out = {}
    for name, (i, j) in (("HV", (0, 1)), ("DA", (2, 3))):
        corr = c[i, i] + c[j, j]
        anti = c[i, j] + c[j, i]
        hi, lo = max(corr, anti), min(corr, anti)
        if hi + lo <= 0:
            raise ZeroDivisionError(f"no coincidences in the {name} basis")
        out[name] = 100.0 * (hi - lo) / (hi + lo)
    return out


def _mean_std(values):
    v = np.asarray(values, dtype=float)
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), std


@dataclass
class SessionReport:
    label: str
    hour: float
    period: str
    scenario: str
    rows: list = field(default_factory=list)  # (timestamp_label, ProtocolResult)
    tables: dict = field(default_factory=dict)  # mode -> summed CoincidenceTable
    delays: dict = field(default_factory=dict)
    basis: correction.CorrectedBasisSet = None
    fidelity: float = float("nan")
    concurrence: float = float("nan")
    purity: float = float("nan")
    nearest_pure_fidelity: float = float("nan")
    true_fidelity: float = float("nan")
    notes: list = field(default_factory=list)

    def results(self, mode):
        return [r for _, r in self.rows if r.basis_mode == mode]

    def stats(self, mode):
        rs = self.results(mode)
        if not rs:
            return None
        k_mean, k_std = _mean_std([r.keyrate for r in rs])
        q_mean, q_std = _mean_std([r.qber for r in rs])
        return {"n": len(rs), "keyrate_mean": k_mean, "keyrate_std": k_std, "qber_mean": q_mean, "qber_std": q_std}

    def visibility(self, mode):
        return visibility(self.tables[mode]) if mode in self.tables else None


def _session_seed(config, index):
    return np.random.SeedSequence(config.seed, spawn_key=(index,))


def run_session(config, preset, hour, index=0):
    """One slot of the experiment at clock ``hour`` using the named preset."""
    period = "day" if config.is_day(hour) else "night"
    report = SessionReport(label=f"h{hour:05.2f}", hour=hour, period=period, scenario=preset)
    source, chan, noise, det = config.models(preset)
    clock = config.clock()
    seq = _session_seed(config, index)
    tomo_seed, *sample_seeds = seq.spawn(1 + len(config.basis_modes) * config.samples)

    with _stage("source"):
        rho_src = source.state(hour)
        rho = chan.deliver(rho_src, source.drift, hour)
    report.true_fidelity = qstate.fidelity_with_pure(rho, qstate.bell_psi_plus())

    with _stage("tomography"):
        detected_rate = source.pair_rate * chan.alice_transmission * chan.bob_transmission * det.efficiency**2
        record = tomography.simulate_tomography(rho, detected_rate, config.tomography_seconds, tomo_seed)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rho_hat = tomography.reconstruct(record)
        report.notes += [str(w.message) for w in caught]
    report.fidelity = qstate.fidelity_with_pure(rho_hat, qstate.bell_psi_plus())
    report.concurrence = qstate.concurrence(rho_hat)
    report.purity = qstate.purity(rho_hat)
    report.nearest_pure_fidelity = qstate.nearest_pure_state(rho_hat).fidelity

    if "corrected" in config.basis_modes:
        with _stage("correction"), warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report.basis = correction.derive_corrected_bases(rho_hat)
        report.notes += [str(w.message) for w in caught]

    seeds = iter(sample_seeds)
    for mode in config.basis_modes:
        basis = report.basis if mode == "corrected" else "conventional"
        delay = None
        total = None
        for s in range(config.samples):
            with _stage("streams"):
                a, b = timetag.generate_streams(rho, basis, source, chan, noise, det, clock, config.acquisition_seconds, next(seeds))
                b = timetag.apply_pps(b)
            if delay is None:
                # the offset is fixed for a session; locate it once
                with _stage("delay"):
                    delay = timetag.find_delay(a, b, config.search_range_ps, config.bin_ps)
                report.delays[mode] = delay
            with _stage("coincidences"):
                if config.optimize_window:
                    table = timetag.optimize_window(a, b, delay, config.qber_limit, config.window_grid, config.acquisition_seconds).table
                else:
                    table = timetag.count_coincidences(a, b, delay, config.window_ps, config.acquisition_seconds)
            with _stage("protocol"):
                result = protocol.evaluate(table, mode, config.security_threshold)
            report.rows.append((f"{report.label}-s{s:03d}", result))
            total = table if total is None else total + table
        report.tables[mode] = total
    return report


def run_pipeline(config, preset=None, hour=None):
    """A single session with the config's scenario (or ``preset``) at ``hour``."""
    return run_session(config, preset or config.scenario, config.hour if hour is None else hour, index=0)


def _slot(args):
    config, preset, hour, index = args
    return run_session(config, preset, hour, index)


def daily_cycle(config):
    """One session per slot over 24 h; day slots use ``day_preset``, the rest ``night_preset``."""
    jobs = []
    for i, hour in enumerate(config.slot_hours_list()):
        preset = config.day_preset if config.is_day(hour) else config.night_preset
        jobs.append((config, preset, hour, i))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_slot, jobs))
    return [_slot(j) for j in jobs]


def period_summary(reports, mode="corrected"):
    """Mean and std of per-sample keyrate and QBER pooled over day or night sessions."""
    out = {}
    for period in ("day", "night"):
        rs = [r for rep in reports if rep.period == period for r in rep.results(mode)]
        if rs:
            out[period] = {
                "keyrate": _mean_std([r.keyrate for r in rs]),
                "qber": _mean_std([r.qber for r in rs]),
                "n": len(rs),
            }
    return out


def _fmt(x, spec):
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else format(x, spec)


def _write_csv(path, schema, fieldnames, rows):
    buf = io.StringIO()
    buf.write(schema + "\n")
    writer = csv.DictWriter(buf, fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_reports(reports, directory):
    """Write sessions.csv, summary.csv, state_metrics.csv and correction_report.txt."""
    os.makedirs(directory, exist_ok=True)
    paths = {name: os.path.join(directory, name) for name in ("sessions.csv", "summary.csv", "state_metrics.csv", "correction_report.txt")}

    _write_csv(paths["sessions.csv"], SESSIONS_SCHEMA, protocol.CSV_FIELDS,
               [res.csv_row(label) for rep in reports for label, res in rep.rows])

    summary = []
    for rep in reports:
        row = {"session": rep.label, "hour": f"{rep.hour:g}", "period": rep.period, "scenario": rep.scenario}
        row["samples"] = str(max((rep.stats(m) or {"n": 0})["n"] for m in ("corrected", "conventional")))
        for mode in ("corrected", "conventional"):
            st = rep.stats(mode)
            vis = rep.visibility(mode) if st else None
            row[f"{mode}_keyrate_mean_hz"] = _fmt(st and st["keyrate_mean"], ".4f")
            row[f"{mode}_keyrate_std_hz"] = _fmt(st and st["keyrate_std"], ".4f")
            row[f"{mode}_qber_mean_pct"] = _fmt(st and st["qber_mean"], ".6f")
            row[f"{mode}_qber_std_pct"] = _fmt(st and st["qber_std"], ".6f")
            row[f"{mode}_visibility_hv_pct"] = _fmt(vis and vis["HV"], ".4f")
            row[f"{mode}_visibility_da_pct"] = _fmt(vis and vis["DA"], ".4f")
        summary.append(row)
    _write_csv(paths["summary.csv"], SUMMARY_SCHEMA, SUMMARY_FIELDS, summary)

    _write_csv(paths["state_metrics.csv"], STATE_SCHEMA, STATE_FIELDS, [
        {
            "session": rep.label,
            "hour": f"{rep.hour:g}",
            "fidelity_psi_plus": _fmt(rep.fidelity, ".6f"),
            "concurrence": _fmt(rep.concurrence, ".6f"),
            "purity": _fmt(rep.purity, ".6f"),
            "nearest_pure_fidelity": _fmt(rep.nearest_pure_fidelity, ".6f"),
            "true_fidelity_psi_plus": _fmt(rep.true_fidelity, ".6f"),
        }
        for rep in reports
    ])

    chunks = []
    for rep in reports:
        chunks.append(f"== session {rep.label} ({rep.period}, {rep.scenario}) ==\n")
        if rep.basis is not None:
            chunks.append(correction.correction_report(rep.basis))
        else:
            chunks.append("no corrected bases derived\n")
        for note in rep.notes:
            chunks.append(f"  note: {note}\n")
    try:
        with open(paths["correction_report.txt"], "w", encoding="utf-8") as fh:
            fh.write("".join(chunks))
    except OSError as exc:
        raise OSError(f"cannot write {paths['correction_report.txt']}: {exc}") from exc
    return paths
