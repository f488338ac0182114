"""BBM92 sifting, keyrate and QBER from coincidence tables.

Table rows are Alice's detectors A1..A4 (H, V, D, A) and columns Bob's
B1..B4. Only same-basis pairings are sifted:

    signal: (A1,B1) (A2,B2) (A3,B3) (A4,B4)
    error:  (A1,B2) (A2,B1) (A3,B4) (A4,B3)

Keyrate is the sum of the eight sifted counts over the acquisition time and
QBER the error share of that sum, in percent. QBER is a pure count ratio; it
is not divided by the acquisition time.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._kernels import greedy_match
from .errors import UndefinedQBERError

SIGNAL_PAIRS = ((0, 0), (1, 1), (2, 2), (3, 3))
ERROR_PAIRS = ((0, 1), (1, 0), (2, 3), (3, 2))
SIFTED_PAIRS = SIGNAL_PAIRS + ERROR_PAIRS
SECURITY_THRESHOLD = 11.0

_ALICE_BIT = np.array([0, 0, 1, 0, 1], dtype=np.uint8)  # index by detector id, A1/A3 -> 0
_BOB_BIT = np.array([0, 0, 1, 0, 1], dtype=np.uint8)
_BASIS = np.array([-1, 0, 0, 1, 1], dtype=np.int8)  # 0 = H/V arm, 1 = D/A arm

CSV_FIELDS = ("timestamp_label", "basis_mode", "keyrate_hz", "qber_pct", "total", "errors", "secure")


def _counts(table):
    return np.asarray(getattr(table, "counts", table), dtype=np.int64)


def sifted_total(table):
    c = _counts(table)
    return int(sum(c[i, j] for i, j in SIFTED_PAIRS))


def error_total(table):
    c = _counts(table)
    return int(sum(c[i, j] for i, j in ERROR_PAIRS))


def cross_basis_total(table):
    """Coincidences between an H/V arm on one side and a D/A arm on the other."""
    c = _counts(table)
    return int(c[:2, 2:].sum() + c[2:, :2].sum())


def keyrate(table):
    """Sifted coincidences per second."""
    if not table.acquisition_seconds > 0:
        raise ValueError("acquisition time must be positive")
    return sifted_total(table) / table.acquisition_seconds


def qber(table):
    total = sifted_total(table)
    if total == 0:
        raise UndefinedQBERError("QBER is undefined without sifted coincidences")
    return 100.0 * error_total(table) / total


@dataclass(frozen=True)
class ProtocolResult:
    keyrate: float
    qber: float
    total_coincidences: int
    error_coincidences: int
    acquisition_seconds: float
    basis_mode: str
    secure: bool

    def csv_row(self, label):
        return {
            "timestamp_label": label,
            "basis_mode": self.basis_mode,
            "keyrate_hz": f"{self.keyrate:.4f}",
            "qber_pct": f"{self.qber:.6f}",
            "total": str(self.total_coincidences),
            "errors": str(self.error_coincidences),
            "secure": "true" if self.secure else "false",
        }

    def to_csv(self, label):
        buf = io.StringIO()
        csv.DictWriter(buf, CSV_FIELDS, lineterminator="\n").writerow(self.csv_row(label))
        return buf.getvalue()


def evaluate(table, basis_mode, threshold=SECURITY_THRESHOLD):
    q = qber(table)
    return ProtocolResult(
        keyrate=keyrate(table),
        qber=q,
        total_coincidences=sifted_total(table),
        error_coincidences=error_total(table),
        acquisition_seconds=table.acquisition_seconds,
        basis_mode=basis_mode,
        secure=q < threshold,
    )


@dataclass(frozen=True, eq=False)
class SiftedKeyPair:
    alice_bits: np.ndarray
    bob_bits: np.ndarray

    def __post_init__(self):
        if len(self.alice_bits) != len(self.bob_bits):
            raise ValueError("sifted keys must have equal length")

    def __len__(self):
        return len(self.alice_bits)

    def mismatch_fraction(self):
        if len(self) == 0:
            return 0.0
        return float(np.mean(self.alice_bits != self.bob_bits))


def sift_bits(a, b, delay, window):
    """Raw key bits from matched same-basis coincidences.

    Alice: A1, A3 -> 0 and A2, A4 -> 1. Bob: B1, B3 -> 0 and B2, B4 -> 1.
    """
    if window <= 0:
        raise ValueError("coincidence window must be positive")
    ia, ib = greedy_match(a.times, b.times, np.int64(delay), np.int64(window))
    da, db = a.detectors[ia], b.detectors[ib]
    same = _BASIS[da] == _BASIS[db]
    return SiftedKeyPair(_ALICE_BIT[da[same]], _BOB_BIT[db[same]])
