"""Two-qubit polarization tomography over the 36 projections {H,V,D,A,R,L}^2."""

import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InsufficientDataError, StreamFormatError, TomographyResidualWarning
from .qstate import POLARIZATIONS, SIGMA_X, SIGMA_Y, SIGMA_Z, check_density, project_physical

LABELS = "HVDARL"
_BASIS_OF = {"H": 0, "V": 0, "D": 1, "A": 1, "R": 2, "L": 2}
_PAULIS = [np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z]
_OPERATOR_BASIS = [np.kron(p, q) for p in _PAULIS for q in _PAULIS]
NEGATIVITY_WARN = 0.05
SEP = "⊗"


@dataclass(frozen=True)
class ProjectionPair:
    alice: np.ndarray
    bob: np.ndarray
    label: str

    @property
    def letters(self):
        return self.label[0], self.label[-1]

    @property
    def group(self):
        """Index 0..8 of the (Alice basis, Bob basis) pairing."""
        a, b = self.letters
        return 3 * _BASIS_OF[a] + _BASIS_OF[b]

    def projector(self):
        v = np.kron(self.alice, self.bob)
        return np.outer(v, v.conj())


@dataclass(frozen=True)
class TomographyRecord:
    pairs: tuple
    counts: np.ndarray
    acquisition_seconds: float

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if len(self.pairs) != counts.size:
            raise ValueError("one count per projection is required")
        if np.any(~np.isfinite(counts)) or np.any(counts < 0):
            raise ValueError("counts must be finite and nonnegative")
        if not self.acquisition_seconds > 0:
            raise ValueError("acquisition time must be positive")
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "counts", counts)


def projection_pair(label):
    a, b = label[0], label[-1]
    return ProjectionPair(POLARIZATIONS[a].copy(), POLARIZATIONS[b].copy(), f"{a}{SEP}{b}")


def standard_projection_set():
    """The 36 projections, Alice-major in the order H, V, D, A, R, L."""
    return [projection_pair(a + b) for a, b in product(LABELS, LABELS)]


def predict_probabilities(rho, pairs=None):
    rho = check_density(rho)
    pairs = standard_projection_set() if pairs is None else pairs
    p = np.array([np.real(np.trace(rho @ pp.projector())) for pp in pairs])
    return np.clip(p, 0.0, 1.0)


def simulate_tomography(rho, pair_rate, seconds_per_projection=1.0, seed=None):
    """Poisson counts with mean pair_rate * seconds * p_k for each projection."""
    if not pair_rate > 0:
        raise ValueError("pair_rate must be positive")
    pairs = standard_projection_set()
    mean = pair_rate * seconds_per_projection * predict_probabilities(rho, pairs)
    counts = np.random.default_rng(seed).poisson(mean)
    return TomographyRecord(pairs, counts, float(seconds_per_projection))


def _design_matrix(pairs):
    # p_k = sum_m r_m Tr(P_k B_m) / 4 with rho = sum_m r_m B_m / 4
    return np.array([[np.real(np.trace(pp.projector() @ b)) / 4 for b in _OPERATOR_BASIS] for pp in pairs])


def reconstruct(record):
    """Linear inversion followed by eigenvalue clipping onto the physical set.

    Counts are converted to probabilities within each of the nine basis
    pairings, so per-projection acquisition time differences cancel.
    A :class:`TomographyResidualWarning` is emitted when the raw inversion
    has a clearly negative eigenvalue.
    """
    counts = np.asarray(record.counts, dtype=float)
    if counts.sum() <= 0:
        raise InsufficientDataError("all tomography counts are zero")
    groups = np.array([pp.group for pp in record.pairs])
    for basis in range(3):
        if counts[groups // 3 == basis].sum() <= 0:
            raise InsufficientDataError(f"no counts with Alice in basis {'HV DA RL'.split()[basis]}")

    totals = np.bincount(groups, weights=counts, minlength=9)
    usable = totals[groups] > 0
    probs = np.where(usable, counts / np.where(totals[groups] > 0, totals[groups], 1), 0.0)

    m = _design_matrix(record.pairs)[usable]
    y = probs[usable] - m[:, 0]
    if np.linalg.matrix_rank(m[:, 1:]) < 15:
        raise InsufficientDataError("usable projections do not determine the state")
    r, *_ = np.linalg.lstsq(m[:, 1:], y, rcond=None)
    coeffs = np.concatenate([[1.0], r])
    raw = sum(c * b for c, b in zip(coeffs, _OPERATOR_BASIS)) / 4
    raw = (raw + raw.conj().T) / 2
    lowest = np.linalg.eigvalsh(raw).min()
    if lowest < -NEGATIVITY_WARN:
        warnings.warn(f"raw linear inversion has eigenvalue {lowest:.3f}", TomographyResidualWarning, stacklevel=2)
    return project_physical(raw)


def format_record(record):
    lines = [f"tomo-v1 {record.acquisition_seconds:.12g}"]
    for pp, c in zip(record.pairs, record.counts):
        lines.append(f"{pp.label} {int(c)}")
    return "\n".join(lines) + "\n"


def parse_record(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("tomo-v1"):
        raise StreamFormatError("tomography file must start with 'tomo-v1 <seconds>'")
    try:
        seconds = float(lines[0].split()[1])
        pairs, counts = [], []
        for ln in lines[1:]:
            label, count = ln.split()
            letters = label.replace(SEP, "")
            if len(letters) != 2 or any(ch not in LABELS for ch in letters):
                raise ValueError(f"bad projection label {label!r}")
            pairs.append(projection_pair(letters))
            counts.append(int(count))
    except (IndexError, ValueError) as exc:
        raise StreamFormatError(f"malformed tomography record: {exc}") from None
    if len(pairs) != 36:
        raise StreamFormatError(f"expected 36 projections, found {len(pairs)}")
    return TomographyRecord(pairs, np.array(counts, dtype=np.int64), seconds)


def write_record(path, record):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_record(record))


def read_record(path):
    with open(path, encoding="utf-8") as fh:
        return parse_record(fh.read())
