"""Why compensating Bob's bases works: a scrambled channel, seen through the Born rule.

Run with ``python3 demos/basis_correction.py``.
"""

import numpy as np

from mubqkd import channel, correction, optics, qstate

# The source: F = 0.89 with Psi+, concurrence 0.90.
rho_source = channel.build_source_state(0.89, 0.90)
print(f"source   F(psi+) = {qstate.fidelity_with_pure(rho_source, qstate.bell_psi_plus()):.3f}"
      f"   C = {qstate.concurrence(rho_source):.3f}")

# A fibre polarization controller left in some arbitrary position.
u = channel.waveplate_stack(30, 15, 0)
rho = channel.scramble(rho_source, u)
print(f"delivered F(psi+) = {qstate.fidelity_with_pure(rho, qstate.bell_psi_plus()):.3f}"
      f"   C = {qstate.concurrence(rho):.3f}  (local unitaries leave C alone)")

# Bob's conventional detectors now disagree with Alice far too often.
print(f"QBER with conventional bases: {correction.predicted_qber(rho, 'conventional'):6.2f} %")

# The nearest pure state tells Bob where Alice's H, V, D and A went.
bases = correction.derive_corrected_bases(rho)
print(f"QBER with corrected bases:    {correction.predicted_qber(rho, bases):6.2f} %")
print()
print(correction.correction_report(bases))

# Sweep a rotation on Bob's side: conventional QBER climbs, corrected stays put.
print(" rotation  conventional  corrected")
for deg in range(0, 91, 15):
    r = channel.scramble(rho_source, optics.rotator(np.radians(deg)))
    print(f"  {deg:3d} deg   {correction.predicted_qber(r, 'conventional'):8.2f} %  "
          f"{correction.predicted_qber(r, correction.derive_corrected_bases(r)):8.2f} %")
