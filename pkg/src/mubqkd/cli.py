"""Command line entry point: ``mubqkd <verb> ...``.

Exit status is 0 on success, 2 for configuration problems and 3 for model
or numerical failures.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import correction, harness, protocol, qstate, timetag, tomography
from .config import RunConfig, default_config_text, load_config
from .errors import ConfigError, MubqkdError

EXIT_OK, EXIT_CONFIG, EXIT_MODEL = 0, 2, 3


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("scenario", "hour", "samples", "seed", "workers", "acquisition_seconds"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "output", None):
        overrides["output_dir"] = args.output
    if getattr(args, "modes", None):
        overrides["basis_modes"] = tuple(args.modes.split(","))
    return replace(cfg, **overrides) if overrides else cfg


def _print_session(rep, out):
    print(f"session {rep.label} ({rep.period}, {rep.scenario})", file=out)
    print(f"  tomography: F(psi+)={rep.fidelity:.4f} C={rep.concurrence:.4f} purity={rep.purity:.4f}", file=out)
    for mode in ("corrected", "conventional"):
        st = rep.stats(mode)
        if st is None:
            continue
        vis = rep.visibility(mode)
        print(
            f"  {mode:>12}: keyrate {st['keyrate_mean']:.1f} +/- {st['keyrate_std']:.1f} Hz,"
            f" QBER {st['qber_mean']:.3f} +/- {st['qber_std']:.3f} %,"
            f" V(HV) {vis['HV']:.1f} %, V(DA) {vis['DA']:.1f} %",
            file=out,
        )


def cmd_run(args, out):
    cfg = _config(args)
    rep = harness.run_pipeline(cfg)
    _print_session(rep, out)
    paths = harness.emit_reports([rep], cfg.resolved_output_dir())
    print(f"reports written to {paths['summary.csv'].rsplit('/', 1)[0]}", file=out)


def cmd_daily(args, out):
    cfg = _config(args)
    reports = harness.daily_cycle(cfg)
    for rep in reports:
        _print_session(rep, out)
    for period, s in harness.period_summary(reports).items():
        (km, ks), (qm, qs) = s["keyrate"], s["qber"]
        print(f"{period}: keyrate {km / 1e3:.4f} +/- {ks / 1e3:.4f} kHz, QBER {qm:.4f} +/- {qs:.4f} %", file=out)
    harness.emit_reports(reports, cfg.resolved_output_dir())
    print(f"reports written to {cfg.resolved_output_dir()}", file=out)


def cmd_tomo(args, out):
    if args.record:
        record = tomography.read_record(args.record)
    else:
        cfg = _config(args)
        source, chan, _, det = cfg.models(cfg.scenario)
        rho = chan.deliver(source.state(cfg.hour), source.drift, cfg.hour)
        rate = source.pair_rate * chan.alice_transmission * chan.bob_transmission * det.efficiency**2
        record = tomography.simulate_tomography(rho, rate, cfg.tomography_seconds, cfg.seed)
        if args.save_record:
            tomography.write_record(args.save_record, record)
    rho_hat = tomography.reconstruct(record)
    print(qstate.format_density(rho_hat), file=out)
    print(f"fidelity_psi_plus {qstate.fidelity_with_pure(rho_hat, qstate.bell_psi_plus()):.6f}", file=out)
    print(f"concurrence {qstate.concurrence(rho_hat):.6f}", file=out)
    print(f"purity {qstate.purity(rho_hat):.6f}", file=out)
    if args.save_rho:
        qstate.save_density(args.save_rho, rho_hat)


def cmd_correct(args, out):
    rho = qstate.load_density(args.rho)
    basis = correction.derive_corrected_bases(rho)
    print(correction.correction_report(basis), end="", file=out)
    print(f"predicted QBER corrected {correction.predicted_qber(rho, basis):.4f} %", file=out)
    print(f"predicted QBER conventional {correction.predicted_qber(rho, 'conventional'):.4f} %", file=out)


def cmd_coinc(args, out):
    a = timetag.read_stream(args.alice, party="alice")
    b = timetag.read_stream(args.bob, party="bob")
    delay = args.delay if args.delay is not None else timetag.find_delay(a, b, args.search_range, args.bin)
    seconds = args.seconds or max(a.duration, b.duration) / timetag.PS_PER_S
    table = timetag.count_coincidences(a, b, delay, args.window, seconds)
    print(f"delay_ps {delay}", file=out)
    print("      " + " ".join(f"{f'B{j + 1}':>9}" for j in range(4)), file=out)
    for i, row in enumerate(table.counts):
        print(f"A{i + 1}    " + " ".join(f"{int(c):>9d}" for c in row), file=out)
    result = protocol.evaluate(table, args.mode)
    print(f"keyrate_hz {result.keyrate:.4f}", file=out)
    print(f"qber_pct {result.qber:.6f}", file=out)
    print(f"secure {'true' if result.secure else 'false'}", file=out)


def cmd_gen_config(args, out):
    text = default_config_text()
    if args.output_file:
        try:
            with open(args.output_file, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {args.output_file}: {exc}") from None
    else:
        out.write(text)


def build_parser():
    p = argparse.ArgumentParser(prog="mubqkd", description="Entanglement-based QKD simulator with nearest-pure-state basis correction.")
    sub = p.add_subparsers(dest="verb", required=True)

    def session_opts(sp):
        sp.add_argument("--config", help="configuration file (see gen-config)")
        sp.add_argument("--scenario", help="scenario preset name")
        sp.add_argument("--hour", type=float, help="clock hour of the session")
        sp.add_argument("--samples", type=int, help="protocol samples per basis mode")
        sp.add_argument("--acquisition-seconds", dest="acquisition_seconds", type=float, help="seconds per sample")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--modes", help="comma list of corrected,conventional")
        sp.add_argument("--output", help="output directory for CSV reports")

    sp = sub.add_parser("run", help="single session")
    session_opts(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("daily", help="24 h cycle of sessions")
    session_opts(sp)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_daily)

    sp = sub.add_parser("tomo", help="tomography only")
    session_opts(sp)
    sp.add_argument("--record", help="reconstruct from a tomo-v1 count file instead of simulating")
    sp.add_argument("--save-record", help="write the simulated counts here")
    sp.add_argument("--save-rho", help="write the reconstructed density matrix here")
    sp.set_defaults(func=cmd_tomo)

    sp = sub.add_parser("correct", help="density matrix file to corrected basis report")
    sp.add_argument("rho")
    sp.set_defaults(func=cmd_correct)

    sp = sub.add_parser("coinc", help="coincidence table and metrics from two stream files")
    sp.add_argument("alice")
    sp.add_argument("bob")
    sp.add_argument("--window", type=int, default=timetag.DEFAULT_WINDOW, help="coincidence window in ps")
    sp.add_argument("--bin", type=int, default=timetag.DEFAULT_BIN, help="delay histogram bin in ps")
    sp.add_argument("--search-range", type=int, default=timetag.DEFAULT_SEARCH_RANGE, help="delay search range in ps")
    sp.add_argument("--delay", type=int, help="skip the search and use this delay in ps")
    sp.add_argument("--seconds", type=float, help="acquisition time; defaults to the stream duration")
    sp.add_argument("--mode", default="corrected", choices=("corrected", "conventional"))
    sp.set_defaults(func=cmd_coinc)

    sp = sub.add_parser("gen-config", help="print or write a documented default configuration")
    sp.add_argument("-o", "--output-file")
    sp.set_defaults(func=cmd_gen_config)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MubqkdError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
