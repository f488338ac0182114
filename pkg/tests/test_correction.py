import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_state
from mubqkd import channel, correction, optics, qstate
from mubqkd.errors import DegenerateConditionalError, DegenerateStateError, WeakEntanglementError, WeakEntanglementWarning
from mubqkd.qstate import A, D, H, V


def haar(seed):
    return channel.random_scrambler(seed)


def bell():
    return qstate.bell_psi_plus()


def test_conditional_state_examples():
    assert qstate.same_state(correction.extract_conditional_state(bell(), H), V)
    assert qstate.same_state(correction.extract_conditional_state(bell(), V), H)
    assert qstate.same_state(correction.extract_conditional_state(bell(), D), D)
    assert qstate.same_state(correction.extract_conditional_state(bell(), A), A)


@pytest.mark.parametrize("seed", range(10))
def test_conditional_state_follows_bob_unitary(seed):
    u = haar(seed)
    psi = np.kron(np.eye(2), u) @ bell()
    assert qstate.same_state(correction.extract_conditional_state(psi, H), u @ V)
    assert qstate.same_state(correction.extract_conditional_state(psi, D), u @ D)


def test_conditional_state_of_impossible_outcome():
    with pytest.raises(DegenerateConditionalError):
        correction.extract_conditional_state(qstate.product_state(H, H), V)


def test_bases_for_psi_plus():
    b = correction.derive_corrected_bases(qstate.pure_density(bell()))
    for got, want in ((b.phi_H, V), (b.phi_V, H), (b.phi_D, D), (b.phi_A, A)):
        assert qstate.same_state(got, want)
    assert b.source_fidelity == pytest.approx(1)
    assert b.hv_overlap < 1e-20 and b.da_overlap < 1e-20


@pytest.mark.parametrize("seed", range(10))
def test_bases_follow_scrambler(seed):
    u = haar(seed)
    rho = channel.scramble(qstate.pure_density(bell()), u)
    b = correction.derive_corrected_bases(rho)
    for got, want in ((b.phi_H, u @ V), (b.phi_V, u @ H), (b.phi_D, u @ D), (b.phi_A, u @ A)):
        assert qstate.same_state(got, want)


def test_werner_gives_same_bases_as_psi_plus():
    b = correction.derive_corrected_bases(qstate.werner(0.9))
    for got, want in ((b.phi_H, V), (b.phi_V, H), (b.phi_D, D), (b.phi_A, A)):
        assert qstate.same_state(got, want)
    assert b.source_fidelity == pytest.approx(0.925)


@pytest.mark.parametrize("seed", range(20))
def test_settings_reproduce_bases(seed):
    rho = channel.scramble(channel.build_source_state(0.89, 0.9), haar(seed))
    b = correction.derive_corrected_bases(rho)
    b1, b2, b3, b4 = b.bob_states()
    assert qstate.same_state(b1, b.phi_H) and qstate.same_state(b2, b.phi_V)
    assert qstate.same_state(b3, b.phi_D) and qstate.same_state(b4, b.phi_A)
    assert abs(np.vdot(b.phi_H, b.phi_V)) < 1e-12 and abs(np.vdot(b.phi_D, b.phi_A)) < 1e-12
    # concurrence 0.9 source: extracted conditional pairs are nearly orthogonal
    assert b.hv_overlap < 0.05 and b.da_overlap < 0.05


@given(st.integers(0, 2**32 - 1))
def test_overlap_bound_from_concurrence(seed):
    psi = random_state(np.random.default_rng(seed))
    c = qstate.concurrence(qstate.pure_density(psi))
    if c < 0.3:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakEntanglementWarning)
        b = correction.derive_corrected_bases(qstate.pure_density(psi))
    assert b.hv_overlap <= 1 - c**2 + 1e-9


def test_refuses_weak_entanglement():
    rho = qstate.werner(0.5)  # concurrence 0.25
    with pytest.raises(WeakEntanglementError):
        correction.derive_corrected_bases(rho)


def test_warns_moderate_entanglement():
    rho = qstate.werner(0.7)  # concurrence 0.55
    with pytest.warns(WeakEntanglementWarning):
        correction.derive_corrected_bases(rho)


def test_refuses_degenerate_state():
    rho = 0.5 * qstate.pure_density(bell()) + 0.5 * qstate.pure_density(qstate.bell_psi_minus())
    with pytest.raises(DegenerateStateError):
        correction.derive_corrected_bases(rho)


def test_joint_probabilities_sum_to_one(rng):
    rho = channel.scramble(qstate.werner(0.9), haar(1))
    for basis in ("conventional", correction.derive_corrected_bases(rho)):
        p = correction.joint_probabilities(rho, basis)
        assert p.shape == (4, 4)
        assert p.sum() == pytest.approx(1, abs=1e-12)


def test_predicted_qber_examples():
    pure = qstate.pure_density(bell())
    assert correction.predicted_qber(pure, "conventional") == pytest.approx(0, abs=1e-12)
    other = correction.derive_corrected_bases(channel.scramble(pure, haar(4)))
    for basis in ("conventional", other):
        assert correction.predicted_qber(qstate.maximally_mixed(), basis) == pytest.approx(50)

    scrambled = channel.scramble(pure, optics.rotator(np.pi / 4))
    assert correction.predicted_qber(scrambled, "conventional") == pytest.approx(50, abs=1e-9)
    corrected = correction.derive_corrected_bases(scrambled)
    assert correction.predicted_qber(scrambled, corrected) == pytest.approx(0, abs=1e-9)


def test_werner_qber_is_half_the_noise():
    # Werner(p): sifted error probability (1 - p)/2
    for p in (0.6, 0.8, 0.95):
        assert correction.predicted_qber(qstate.werner(p), "conventional") == pytest.approx(50 * (1 - p))


def test_unknown_basis_name():
    with pytest.raises(ValueError):
        correction.bob_states("diagonal")


def test_report_mentions_settings():
    b = correction.derive_corrected_bases(qstate.werner(0.9))
    text = correction.correction_report(b)
    assert "B1/B2 setting: HWP 45.0000 deg, QWP 0.0000 deg" in text
    assert "B3/B4 setting: HWP 22.5000 deg, QWP 45.0000 deg" in text
