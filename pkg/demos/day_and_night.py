"""A shortened 24 hour cycle: day sessions under sunlight, night sessions in the dark.

Run with ``python3 demos/day_and_night.py [output_dir]``. Full-length runs
(30 samples of 10 s per slot) are what ``mubqkd daily`` does by default.
"""

import sys

from mubqkd import harness
from mubqkd.config import RunConfig

cfg = RunConfig(samples=5, acquisition_seconds=2.0, output_dir=sys.argv[1] if len(sys.argv) > 1 else "demo-output")
reports = harness.daily_cycle(cfg)

print(" hour  period  keyrate[Hz]  QBER corr[%]  QBER conv[%]  C(tomo)")
for rep in reports:
    c, v = rep.stats("corrected"), rep.stats("conventional")
    print(f"{rep.hour:5.0f}  {rep.period:>6}  {c['keyrate_mean']:10.0f}  {c['qber_mean']:12.2f}  {v['qber_mean']:12.2f}  {rep.concurrence:7.3f}")

for period, s in harness.period_summary(reports).items():
    (km, ks), (qm, qs) = s["keyrate"], s["qber"]
    print(f"{period:>5}: {km / 1e3:.3f} +/- {ks / 1e3:.3f} kHz, QBER {qm:.2f} +/- {qs:.2f} %")

paths = harness.emit_reports(reports, cfg.resolved_output_dir())
print("wrote", ", ".join(sorted(paths)))
