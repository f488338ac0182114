import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import sqrtm

from conftest import random_density, random_state
from mubqkd import qstate
from mubqkd.errors import InvalidStateError
from mubqkd.qstate import A, D, H, L, R, V

S2 = 1 / np.sqrt(2)


def wootters_oracle(rho):
    """Textbook Wootters formula via the (non-Hermitian) product rho * rho_tilde."""
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    rt = yy @ rho.conj() @ yy
    lam = np.sqrt(np.abs(np.linalg.eigvals(rho @ rt).real))
    lam = np.sort(lam)[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def uhlmann(rho, sigma):
    s = sqrtm(rho)
    return float(np.real(np.trace(sqrtm(s @ sigma @ s))) ** 2)


def test_polarization_kets_normalized_and_mutually_unbiased():
    for v in (H, V, D, A, R, L):
        assert abs(np.vdot(v, v) - 1) < 1e-12
    for a, b in ((H, D), (H, R), (D, R), (V, A), (A, L)):
        assert abs(abs(np.vdot(a, b)) ** 2 - 0.5) < 1e-12
    for a, b in ((H, V), (D, A), (R, L)):
        assert abs(np.vdot(a, b)) < 1e-15


def test_unknown_polarization_label():
    with pytest.raises(InvalidStateError):
        qstate.polarization("X")


def test_bell_psi_plus_amplitudes():
    psi = qstate.bell_psi_plus()
    assert np.allclose(psi, [0, S2, S2, 0], atol=1e-15)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    assert qstate.fidelity_with_pure(qstate.pure_density(psi), psi) == pytest.approx(1.0, abs=1e-12)


def test_same_state_ignores_global_phase():
    psi = qstate.bell_psi_plus()
    assert qstate.same_state(psi, np.exp(0.7j) * psi)
    assert not qstate.same_state(psi, qstate.bell_psi_minus())


def test_check_pure_rejects_unnormalized():
    with pytest.raises(InvalidStateError):
        qstate.check_pure(np.array([1, 1, 0, 0], dtype=complex), 4)
    with pytest.raises(InvalidStateError):
        qstate.check_pure(H, 4)


@pytest.mark.parametrize(
    "bad",
    [
        np.eye(3) / 3,
        np.eye(4) / 2,
        np.array([[0.5, 0.1j, 0, 0], [0.1j, 0.5, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]),
        np.diag([0.6, 0.6, -0.2, 0.0]),
        np.full((4, 4), np.nan),
    ],
)
def test_check_density_rejects(bad):
    with pytest.raises(InvalidStateError):
        qstate.check_density(bad)


def test_check_density_tolerances():
    rho = qstate.maximally_mixed().copy()
    rho[0, 0] += 5e-11
    qstate.check_density(rho)
    rho[0, 0] += 1e-9
    with pytest.raises(InvalidStateError):
        qstate.check_density(rho)


def test_eigendecompose_trivial_cases():
    vals, vecs = qstate.eigendecompose(qstate.pure_density(qstate.bell_psi_plus()))
    assert np.allclose(vals, [1, 0, 0, 0], atol=1e-12)
    assert qstate.same_state(vecs[:, 0], qstate.bell_psi_plus())
    vals, _ = qstate.eigendecompose(qstate.maximally_mixed())
    assert np.allclose(vals, 0.25, atol=1e-12)


def test_werner_eigendecomposition_against_reconstruction():
    rho = qstate.werner(0.8)
    vals, vecs = qstate.eigendecompose(rho)
    assert vals[0] == pytest.approx(0.85, abs=1e-12)
    assert qstate.same_state(vecs[:, 0], qstate.bell_psi_plus())
    # oracle: rebuild rho from the decomposition
    assert np.allclose((vecs * vals) @ vecs.conj().T, rho, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_eigendecompose_properties(seed):
    rho = random_density(np.random.default_rng(seed))
    vals, vecs = qstate.eigendecompose(rho)
    assert abs(vals.sum() - 1) < 1e-9
    assert np.all(np.diff(vals) <= 1e-15)
    assert np.allclose(vecs.conj().T @ vecs, np.eye(4), atol=1e-9)


def test_nearest_pure_state_examples():
    psi = random_state(np.random.default_rng(3))
    near = qstate.nearest_pure_state(qstate.pure_density(psi))
    assert qstate.same_state(near.state, psi)
    assert near.fidelity == pytest.approx(1.0, abs=1e-12)
    assert not near.degenerate

    near = qstate.nearest_pure_state(qstate.werner(0.8))
    assert qstate.same_state(near.state, qstate.bell_psi_plus())
    assert near.fidelity == pytest.approx(0.85, abs=1e-12)

    assert qstate.nearest_pure_state(qstate.maximally_mixed()).degenerate


@given(st.integers(0, 2**32 - 1))
def test_nearest_pure_fidelity_is_maximal(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng)
    near = qstate.nearest_pure_state(rho)
    for _ in range(20):
        assert qstate.fidelity_with_pure(rho, random_state(rng)) <= near.fidelity + 1e-12


def test_fidelity_with_pure_examples():
    psi = qstate.bell_psi_plus()
    assert qstate.fidelity_with_pure(qstate.pure_density(psi), psi) == pytest.approx(1)
    assert qstate.fidelity_with_pure(qstate.maximally_mixed(), random_state(np.random.default_rng(1))) == pytest.approx(0.25)


@given(st.integers(0, 2**32 - 1))
def test_fidelity_matches_uhlmann_for_pure_argument(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng)
    psi = random_state(rng)
    assert qstate.fidelity_with_pure(rho, psi) == pytest.approx(uhlmann(rho, qstate.pure_density(psi)), abs=1e-6)


def test_concurrence_examples():
    assert qstate.concurrence(qstate.pure_density(qstate.bell_psi_plus())) == pytest.approx(1, abs=1e-12)
    assert qstate.concurrence(qstate.pure_density(qstate.product_state(H, H))) == pytest.approx(0, abs=1e-12)
    assert qstate.concurrence(qstate.werner(0.95)) == pytest.approx(0.925, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_concurrence_matches_wootters_oracle(seed):
    rho = random_density(np.random.default_rng(seed))
    assert qstate.concurrence(rho) == pytest.approx(wootters_oracle(rho), abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_pure_state_concurrence_is_2_abs_det(seed):
    psi = random_state(np.random.default_rng(seed))
    expected = 2 * abs(psi[0] * psi[3] - psi[1] * psi[2])
    assert qstate.concurrence(qstate.pure_density(psi)) == pytest.approx(expected, abs=1e-9)


def test_purity_examples():
    assert qstate.purity(qstate.pure_density(qstate.bell_psi_minus())) == pytest.approx(1)
    assert qstate.purity(qstate.maximally_mixed()) == pytest.approx(0.25)
    assert qstate.purity(qstate.werner(0.8)) == pytest.approx(0.73, abs=1e-12)


def test_project_physical_clips_and_renormalizes():
    raw = np.diag([0.7, 0.4, -0.1, 0.0]).astype(complex)
    rho = qstate.project_physical(raw)
    assert np.allclose(np.diag(rho).real, [0.7 / 1.1, 0.4 / 1.1, 0, 0])
    qstate.check_density(rho)


def test_local_unitary_preserves_concurrence(rng):
    rho = random_density(rng)
    u = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
    out = qstate.local_unitary(rho, alice=u, bob=u.conj())
    assert qstate.concurrence(out) == pytest.approx(qstate.concurrence(rho), abs=1e-9)


def test_density_text_roundtrip(tmp_path, rng):
    rho = random_density(rng)
    path = tmp_path / "rho.txt"
    qstate.save_density(path, rho)
    back = qstate.load_density(path)
    assert np.allclose(back, rho, atol=1e-11)


def test_parse_density_rejects_garbage():
    with pytest.raises(InvalidStateError):
        qstate.parse_density("1 0 0 0\n0 1 0 0\n")
    with pytest.raises(InvalidStateError):
        qstate.parse_density("\n".join(["a b c d"] * 4))
