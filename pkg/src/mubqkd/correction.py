"""Passive basis compensation: corrected measurement bases from a tomographic state.

Alice always measures in the conventional bases (A1=H, A2=V, A3=D, A4=A).
Bob's four detectors are either the conventional assignment
(B1=V, B2=H, B3=D, B4=A, correlated with Alice for Psi+) or the corrected
bases (B1=phi_H, B2=phi_V, B3=phi_D, B4=phi_A) derived here.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import optics
from .errors import (
    DegenerateConditionalError,
    DegenerateStateError,
    WeakEntanglementError,
    WeakEntanglementWarning,
)
from .protocol import ERROR_PAIRS, SIFTED_PAIRS
from .qstate import A, D, H, V, check_density, check_pure, concurrence, nearest_pure_state, normalize, orthogonal_complement

ALICE_STATES = np.array([H, V, D, A])
CONVENTIONAL_BOB_STATES = np.array([V, H, D, A])

REFUSE_CONCURRENCE = 0.3
WARN_CONCURRENCE = 0.7
CONDITIONAL_MIN_NORM = 1e-6


@dataclass(frozen=True)
class CorrectedBasisSet:
    phi_H: np.ndarray
    phi_V: np.ndarray
    phi_D: np.ndarray
    phi_A: np.ndarray
    hv_setting: optics.WaveplateSetting
    da_setting: optics.WaveplateSetting
    source_fidelity: float
    degenerate_flag: bool = False
    concurrence: float = float("nan")
    # conditional states for V and A as extracted, before orthogonalization
    phi_V_conditional: np.ndarray = None
    phi_A_conditional: np.ndarray = None

    @property
    def hv_overlap(self):
        """|<phi_H|phi_V>|^2 of the extracted (not orthogonalized) pair."""
        return float(abs(np.vdot(self.phi_H, self.phi_V_conditional)) ** 2)

    @property
    def da_overlap(self):
        return float(abs(np.vdot(self.phi_D, self.phi_A_conditional)) ** 2)

    def bob_states(self):
        """Acceptance states of B1..B4 as realized by the two waveplate settings."""
        b1, b2 = optics.pbs_projectors(self.hv_setting)
        b3, b4 = optics.pbs_projectors(self.da_setting)
        return np.array([b1, b2, b3, b4])


def bob_states(basis):
    """B1..B4 acceptance states for ``"conventional"`` or a corrected basis set."""
    if isinstance(basis, CorrectedBasisSet):
        return basis.bob_states()
    if basis == "conventional":
        return CONVENTIONAL_BOB_STATES.copy()
    raise ValueError(f"unknown basis {basis!r}")


def extract_conditional_state(psi, x):
    """Normalized (<x| (x) I)|psi>: Bob's state given Alice projected on ``x``."""
    psi = check_pure(psi, 4)
    x = normalize(x)
    phi = x.conj() @ psi.reshape(2, 2)
    n = np.linalg.norm(phi)
    if n < CONDITIONAL_MIN_NORM:
        raise DegenerateConditionalError(f"conditional state has norm {n:.3e}; Alice never observes this outcome")
    return phi / n


def derive_corrected_bases(rho):
    """Corrected bases and waveplate settings for Bob from the state ``rho``.

    Raises if the nearest pure state is degenerate or the state is too weakly
    entangled (concurrence below 0.3); warns below 0.7.
    """
    rho = check_density(rho)
    nearest = nearest_pure_state(rho)
    if nearest.degenerate:
        raise DegenerateStateError(
            f"top eigenvalue gap {nearest.gap:.2e} is below threshold; no unique nearest pure state"
        )
    c = concurrence(rho)
    if c < REFUSE_CONCURRENCE:
        raise WeakEntanglementError(f"concurrence {c:.3f} < {REFUSE_CONCURRENCE}; refusing to derive corrected bases")
    if c < WARN_CONCURRENCE:
        warnings.warn(f"concurrence {c:.3f} < {WARN_CONCURRENCE}; corrected bases may be poor", WeakEntanglementWarning, stacklevel=2)

    psi = nearest.state
    phi_h = extract_conditional_state(psi, H)
    phi_d = extract_conditional_state(psi, D)
    phi_v_cond = extract_conditional_state(psi, V)
    phi_a_cond = extract_conditional_state(psi, A)

    return CorrectedBasisSet(
        phi_H=phi_h,
        phi_V=_aligned_complement(phi_h, phi_v_cond),
        phi_D=phi_d,
        phi_A=_aligned_complement(phi_d, phi_a_cond),
        hv_setting=optics.solve_waveplate_angles(phi_h),
        da_setting=optics.solve_waveplate_angles(phi_d),
        source_fidelity=nearest.fidelity,
        degenerate_flag=nearest.degenerate,
        concurrence=c,
        phi_V_conditional=phi_v_cond,
        phi_A_conditional=phi_a_cond,
    )


def _aligned_complement(phi, reference):
    comp = orthogonal_complement(phi)
    ov = np.vdot(comp, reference)
    if abs(ov) > 1e-12:
        comp = comp * np.exp(1j * np.angle(ov))
    return comp


def joint_probabilities(rho, basis):
    """4x4 matrix P[i, j] of a pair landing on (A_{i+1}, B_{j+1}).

    Each party picks either of its two bases with probability 1/2, so the
    sixteen entries sum to one.
    """
    rho = check_density(rho)
    bob = bob_states(basis)
    p = np.empty((4, 4))
    for i, a in enumerate(ALICE_STATES):
        for j, b in enumerate(bob):
            v = np.kron(a, b)
            p[i, j] = np.vdot(v, rho @ v).real / 4
    return np.clip(p, 0, None)


def predicted_qber(rho, basis):
    """Born-rule QBER in percent for the eight sifted detector pairings."""
    p = joint_probabilities(rho, basis)
    total = sum(p[i, j] for i, j in SIFTED_PAIRS)
    err = sum(p[i, j] for i, j in ERROR_PAIRS)
    return 100.0 * err / total


def _fmt_vec(v):
    return "(" + ", ".join(f"{z.real:+.6f}{z.imag:+.6f}j" for z in v) + ")"


def correction_report(basis):
    lines = [
        "corrected measurement bases",
        f"  phi_H = {_fmt_vec(basis.phi_H)}",
        f"  phi_V = {_fmt_vec(basis.phi_V)}",
        f"  phi_D = {_fmt_vec(basis.phi_D)}",
        f"  phi_A = {_fmt_vec(basis.phi_A)}",
        f"  B1/B2 setting: {basis.hv_setting}",
        f"  B3/B4 setting: {basis.da_setting}",
        f"  nearest-pure-state fidelity: {basis.source_fidelity:.6f}",
        f"  concurrence: {basis.concurrence:.6f}",
        f"  |<phi_H|phi_V>|^2 before orthogonalization: {basis.hv_overlap:.3e}",
        f"  |<phi_D|phi_A>|^2 before orthogonalization: {basis.da_overlap:.3e}",
        f"  degenerate: {basis.degenerate_flag}",
    ]
    return "\n".join(lines) + "\n"
