"""Two-qubit polarization states and the metrics used throughout the package.

States are plain numpy arrays:

* single-photon polarization: complex vector of length 2 in the (H, V) basis
* two-photon pure state: complex vector of length 4 ordered (HH, HV, VH, VV),
  Alice's photon being the first tensor factor
* density matrix: 4x4 complex Hermitian, trace one

Functions validate their inputs and never modify them.
"""

from typing import NamedTuple

import numpy as np

from .errors import InvalidStateError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
NORM_TOL = 1e-12
DEGENERACY_GAP = 1e-6

_S2 = 1 / np.sqrt(2)

H = np.array([1, 0], dtype=complex)
V = np.array([0, 1], dtype=complex)
D = np.array([_S2, _S2], dtype=complex)
A = np.array([_S2, -_S2], dtype=complex)
R = np.array([_S2, 1j * _S2], dtype=complex)
L = np.array([_S2, -1j * _S2], dtype=complex)

POLARIZATIONS = {"H": H, "V": V, "D": D, "A": A, "R": R, "L": L}

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_YY = np.kron(SIGMA_Y, SIGMA_Y)


class EigenDecomposition(NamedTuple):
    values: np.ndarray  # real, descending
    vectors: np.ndarray  # columns are the eigenvectors


class NearestPureState(NamedTuple):
    state: np.ndarray
    fidelity: float
    degenerate: bool
    gap: float


def polarization(label):
    """Return a copy of one of the six standard polarization kets."""
    try:
        return POLARIZATIONS[label].copy()
    except KeyError:
        raise InvalidStateError(f"unknown polarization label {label!r}") from None


def normalize(vec):
    vec = np.asarray(vec, dtype=complex)
    n = np.linalg.norm(vec)
    if not np.isfinite(n) or n < 1e-15:
        raise InvalidStateError("cannot normalize a zero or non-finite vector")
    return vec / n


def check_pure(vec, dim):
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (dim,):
        raise InvalidStateError(f"expected a state vector of length {dim}, got shape {vec.shape}")
    if abs(np.vdot(vec, vec).real - 1) > NORM_TOL:
        raise InvalidStateError("state vector is not normalized")
    return vec


def overlap(a, b):
    """|<a|b>|^2, the comparison used for states modulo global phase."""
    return float(abs(np.vdot(a, b)) ** 2)


def same_state(a, b, tol=1e-9):
    return overlap(normalize(a), normalize(b)) >= 1 - tol


def orthogonal_complement(vec):
    """The unique (up to phase) qubit state orthogonal to ``vec``."""
    a, b = normalize(vec)
    return np.array([-np.conj(b), np.conj(a)])


def bell_psi_plus():
    return np.array([0, _S2, _S2, 0], dtype=complex)


def bell_psi_minus():
    return np.array([0, _S2, -_S2, 0], dtype=complex)


def bell_phi_plus():
    return np.array([_S2, 0, 0, _S2], dtype=complex)


def bell_phi_minus():
    return np.array([_S2, 0, 0, -_S2], dtype=complex)


def product_state(alice, bob):
    return np.kron(normalize(alice), normalize(bob))


def pure_density(psi):
    psi = normalize(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed():
    return np.eye(4, dtype=complex) / 4


def werner(p, psi=None):
    """p |psi><psi| + (1 - p) I/4 with psi defaulting to Psi+."""
    psi = bell_psi_plus() if psi is None else psi
    return p * pure_density(psi) + (1 - p) * maximally_mixed()


def local_unitary(rho, alice=None, bob=None):
    """(U_A (x) U_B) rho (U_A (x) U_B)^dagger; a missing side is the identity."""
    ua = np.eye(2) if alice is None else np.asarray(alice)
    ub = np.eye(2) if bob is None else np.asarray(bob)
    u = np.kron(ua, ub)
    return u @ rho @ u.conj().T


def check_density(rho):
    """Validate and return ``rho`` as a complex 4x4 array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidStateError(f"density matrix must be 4x4, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_TOL:
        raise InvalidStateError(f"density matrix trace is {np.trace(rho).real:.12g}, not 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise InvalidStateError("density matrix is not positive semidefinite")
    return rho


def project_physical(mat):
    """Nearest-by-clipping physical state: hermitize, clip negative eigenvalues, renormalize."""
    mat = np.asarray(mat, dtype=complex)
    mat = (mat + mat.conj().T) / 2
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0, None)
    if vals.sum() <= 0:
        raise InvalidStateError("matrix has no positive spectrum to renormalize")
    vals /= vals.sum()
    rho = (vecs * vals) @ vecs.conj().T
    return (rho + rho.conj().T) / 2


def eigendecompose(rho):
    rho = check_density(rho)
    vals, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    order = np.argsort(vals)[::-1]
    return EigenDecomposition(vals[order], vecs[:, order])


def nearest_pure_state(rho):
    """Top eigenvector of ``rho`` and its fidelity (= the top eigenvalue).

    ``degenerate`` is set when the top two eigenvalues are closer than
    ``DEGENERACY_GAP``; the returned vector is then an arbitrary member of the
    top eigenspace.
    """
    rho = check_density(rho)
    vals, vecs = eigendecompose(rho)
    psi = vecs[:, 0]
    # fix the global phase so the largest component is real positive
    k = np.argmax(np.abs(psi))
    psi = psi * np.exp(-1j * np.angle(psi[k]))
    gap = float(vals[0] - vals[1])
    return NearestPureState(psi, fidelity_with_pure(rho, psi), gap < DEGENERACY_GAP, gap)


def fidelity_with_pure(rho, psi):
    """<psi|rho|psi>, clamped into [0, 1]."""
    rho = check_density(rho)
    psi = check_pure(psi, 4)
    f = np.vdot(psi, rho @ psi).real
    return float(min(1.0, max(0.0, f)))


def concurrence(rho):
    """Wootters concurrence.

    The square roots of the eigenvalues of rho (Y(x)Y) rho* (Y(x)Y) are taken
    as the singular values of W^T (Y(x)Y) W with rho = W W^dagger, which avoids
    square-rooting rounding noise for (nearly) pure states.
    """
    rho = check_density(rho)
    vals, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = vecs * np.sqrt(np.clip(vals, 0, None))
    s = np.linalg.svd(w.T @ _YY @ w, compute_uv=False)
    return float(min(1.0, max(0.0, s[0] - s[1] - s[2] - s[3])))


def purity(rho):
    rho = check_density(rho)
    return float(np.real(np.trace(rho @ rho)))


def format_density(rho):
    """Four lines of four ``re+imj`` entries, 12 significant digits."""
    rho = np.asarray(rho, dtype=complex)
    lines = []
    for row in rho:
        lines.append(" ".join(f"{z.real:.12g}{z.imag:+.12g}j" for z in row))
    return "\n".join(lines) + "\n"


def parse_density(text, validate=True):
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise InvalidStateError("density matrix text must have 4 lines of 4 entries")
    try:
        rho = np.array([[complex(tok) for tok in row] for row in rows])
    except ValueError as exc:
        raise InvalidStateError(f"bad matrix entry: {exc}") from None
    return check_density(rho) if validate else rho


def save_density(path, rho):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_density(rho))


def load_density(path):
    with open(path, encoding="utf-8") as fh:
        return parse_density(fh.read())
