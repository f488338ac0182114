"""Time-tagged detection streams: generation, clock handling, delay search, coincidences.

Times are integer picoseconds (int64). Detector ids run 1..4 for each party.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import poisson

from . import protocol
from ._kernels import dead_time_mask, greedy_match
from .correction import joint_probabilities
from .errors import MubqkdError, NoPeakError, StreamFormatError

PS_PER_S = 10**12
DEFAULT_WINDOW = 1000
DEFAULT_BIN = 100
DEFAULT_SEARCH_RANGE = 1_000_000
MAGIC = b"TTAG1"
_RECORD = np.dtype([("det", "u1"), ("t", "<u8")])


@dataclass(frozen=True, eq=False)
class TimestampStream:
    detectors: np.ndarray
    times: np.ndarray
    party: str = "alice"
    duration: int = 0
    pps: np.ndarray = None  # local times of PPS ticks, when recorded

    def __post_init__(self):
        det = np.ascontiguousarray(self.detectors, dtype=np.uint8)
        t = np.ascontiguousarray(self.times, dtype=np.int64)
        if det.shape != t.shape or det.ndim != 1:
            raise StreamFormatError("detectors and times must be 1-D arrays of equal length")
        if t.size and np.any(np.diff(t) < 0):
            raise StreamFormatError("timestamps must be nondecreasing")
        if det.size and (det.min() < 1 or det.max() > 4):
            raise StreamFormatError("detector ids must lie in 1..4")
        det.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "detectors", det)
        object.__setattr__(self, "times", t)
        if self.pps is not None:
            object.__setattr__(self, "pps", np.asarray(self.pps, dtype=np.int64))
        if not self.duration and t.size:
            object.__setattr__(self, "duration", int(t[-1]) + 1)

    def __len__(self):
        return self.times.size

    def shifted(self, dt):
        pps = None if self.pps is None else self.pps + dt
        return TimestampStream(self.detectors, self.times + dt, self.party, self.duration, pps)

    def singles(self):
        return np.bincount(self.detectors, minlength=5)[1:]


@dataclass(frozen=True)
class ClockModel:
    """Bob's time tagger clock.

    ``initial_offset`` (ps) is a fixed delay between the two parties'
    timestamps (cabling, propagation, clock offset); ``drift`` (ps per second)
    is the oscillator error. With ``pps_discipline`` the tagger also records
    the shared once-per-second pulse, which lets :func:`apply_pps` undo the
    drift exactly.
    """

    initial_offset: int = 0
    drift: float = 0.0
    pps_discipline: bool = True

    def counter(self, t):
        t = np.asarray(t, dtype=np.int64)
        return t + np.rint(self.drift * (t / PS_PER_S)).astype(np.int64)

    def record(self, t_true):
        return self.counter(np.asarray(t_true, dtype=np.int64) + int(self.initial_offset))

    def pps_ticks(self, duration):
        k = np.arange(0, duration // PS_PER_S + 3, dtype=np.int64)
        return self.counter(k * PS_PER_S)


def apply_pps(stream):
    """Map local tagger time back onto the reference second grid using PPS ticks."""
    if stream.pps is None or len(stream.pps) < 2:
        return stream
    ticks = stream.pps
    t = stream.times
    k = np.clip(np.searchsorted(ticks, t, side="right") - 1, 0, len(ticks) - 2)
    span = (ticks[k + 1] - ticks[k]).astype(np.float64)
    frac = (t - ticks[k]).astype(np.float64) * (PS_PER_S / span)
    corrected = k * PS_PER_S + np.rint(frac).astype(np.int64)
    order = np.argsort(corrected, kind="stable")
    return TimestampStream(stream.detectors[order], corrected[order], stream.party, stream.duration)


@dataclass(frozen=True)
class CoincidenceTable:
    counts: np.ndarray  # 4x4, rows Alice A1..A4, columns Bob B1..B4
    window: int
    delay_applied: int
    acquisition_seconds: float

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (4, 4) or np.any(c < 0):
            raise ValueError("coincidence counts must be a nonnegative 4x4 array")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    def __add__(self, other):
        return CoincidenceTable(
            self.counts + other.counts,
            self.window,
            self.delay_applied,
            self.acquisition_seconds + other.acquisition_seconds,
        )


def _finish_stream(times, dets, duration, detector, n_detectors=4):
    keep = (times >= 0) & (times < duration)
    times, dets = times[keep], dets[keep]
    order = np.argsort(times, kind="stable")
    times, dets = times[order], dets[order]
    if detector.dead_time > 0 and times.size:
        mask = dead_time_mask(times, dets, int(round(detector.dead_time)), n_detectors)
        times, dets = times[mask], dets[mask]
    return times, dets


def _jitter(rng, n, sigma):
    if sigma == 0:
        return np.zeros(n, dtype=np.int64)
    return np.rint(rng.normal(0.0, sigma, n)).astype(np.int64)


def _background(rng, rate, duration_ps, duration_s):
    n = rng.poisson(rate * duration_s * 4) if rate > 0 else 0
    return rng.integers(0, duration_ps, n), rng.integers(1, 5, n).astype(np.uint8)


def generate_streams(rho, basis, source, channel, noise, detector, clock=None, duration_s=10.0, seed=None):
    """Simulate one acquisition; returns (alice, bob) streams.

    ``rho`` is the state shared after the channel and ``basis`` either
    ``"conventional"`` or a :class:`~mubqkd.correction.CorrectedBasisSet` for
    Bob's analyzer. Pairs arrive as a Poisson process; each party detects its
    photon independently with its arm efficiency, so unpaired singles arise
    naturally. Bob's stream is expressed in his local clock.
    """
    clock = clock or ClockModel()
    rng = np.random.default_rng(seed)
    duration = int(round(duration_s * PS_PER_S))
    eta_a = channel.alice_transmission * detector.efficiency
    eta_b = channel.bob_transmission * detector.efficiency * channel.transmission_factor(rng)
    eta_b = min(eta_b, 1.0)
    lam = source.pair_rate * duration_s

    probs = joint_probabilities(rho, basis).ravel()
    probs = probs / probs.sum()
    pa = probs.reshape(4, 4).sum(axis=1)
    pb = probs.reshape(4, 4).sum(axis=0)

    n_ab = rng.poisson(lam * eta_a * eta_b)
    n_a = rng.poisson(lam * eta_a * (1 - eta_b))
    n_b = rng.poisson(lam * (1 - eta_a) * eta_b)

    t_pair = rng.integers(0, duration, n_ab)
    k = rng.choice(16, size=n_ab, p=probs)
    t_a_only = rng.integers(0, duration, n_a)
    t_b_only = rng.integers(0, duration, n_b)
    bg_a_t, bg_a_d = _background(rng, noise.alice_rate(), duration, duration_s)
    bg_b_t, bg_b_d = _background(rng, noise.bob_rate(), duration, duration_s)

    a_times = np.concatenate([t_pair, t_a_only])
    a_times = a_times + _jitter(rng, a_times.size, detector.jitter_sigma)
    a_det = np.concatenate([(k // 4 + 1), rng.choice(4, size=n_a, p=pa) + 1]).astype(np.uint8)
    a_times = np.concatenate([a_times, bg_a_t])
    a_det = np.concatenate([a_det, bg_a_d])

    b_times = np.concatenate([t_pair, t_b_only])
    b_times = b_times + _jitter(rng, b_times.size, detector.jitter_sigma)
    b_det = np.concatenate([(k % 4 + 1), rng.choice(4, size=n_b, p=pb) + 1]).astype(np.uint8)
    b_times = clock.record(np.concatenate([b_times, bg_b_t]))
    b_det = np.concatenate([b_det, bg_b_d])

    a_times, a_det = _finish_stream(a_times, a_det, duration, detector)
    b_times, b_det = _finish_stream(b_times, b_det, duration, detector)
    pps = clock.pps_ticks(duration) if clock.pps_discipline else None
    return (
        TimestampStream(a_det, a_times, "alice", duration),
        TimestampStream(b_det, b_times, "bob", duration, pps),
    )


def correlation_histogram(a, b, lo, hi, bin_width, chunk=200_000):
    """Histogram of t_b - t_a over [lo, hi) in bins of ``bin_width`` ps.

    Alice events are processed in chunks whose histograms add up.
    """
    ta, tb = a.times, b.times
    edges = np.arange(lo, hi + bin_width, bin_width, dtype=np.int64)
    hist = np.zeros(edges.size - 1, dtype=np.int64)
    for start in range(0, ta.size, chunk):
        t = ta[start:start + chunk]
        i0 = np.searchsorted(tb, t + lo, side="left")
        i1 = np.searchsorted(tb, t + edges[-1], side="left")
        n = i1 - i0
        total = int(n.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(t.size), n)
        idx = np.arange(total) - np.repeat(np.cumsum(n) - n, n) + np.repeat(i0, n)
        diffs = tb[idx] - t[owner]
        hist += np.bincount((diffs - lo) // bin_width, minlength=hist.size)[: hist.size]
    return edges, hist


def find_delay(a, b, search_range=DEFAULT_SEARCH_RANGE, bin_width=DEFAULT_BIN, significance=1e-6):
    """Delay (ps) of Bob's stream relative to Alice's from the cross-correlation peak.

    The peak must stand at least three times above the accidental floor and be
    improbable as a Poisson fluctuation of that floor across all bins;
    otherwise :class:`NoPeakError` is raised. The returned value is the
    floor-subtracted centroid around the peak, rounded to 1 ps.
    """
    if len(a) == 0 or len(b) == 0:
        raise NoPeakError("cannot correlate an empty stream")
    margin = 20 * bin_width
    edges, hist = correlation_histogram(a, b, -search_range - margin, search_range + margin, bin_width)
    centers = edges[:-1] + bin_width / 2
    inside = np.flatnonzero(np.abs(centers) <= search_range + bin_width / 2)
    k = inside[np.argmax(hist[inside])]
    peak = hist[k]

    mask = np.ones(hist.size, dtype=bool)
    mask[max(0, k - 10): k + 11] = False
    floor = float(hist[mask].mean()) if mask.any() else 0.0
    p_tail = poisson.sf(peak - 1, floor) if floor > 0 else 0.0
    if peak < 3 or peak < 3 * floor or p_tail * hist.size > significance:
        raise NoPeakError(f"no significant coincidence peak (peak {peak}, floor {floor:.2f})")

    # iterate a floor-subtracted centroid over +-10 bins
    center = centers[k]
    for _ in range(3):
        sel = np.abs(centers - center) <= 10.5 * bin_width
        w = np.clip(hist[sel] - floor, 0, None)
        if w.sum() <= 0:
            break
        center = float(np.sum(w * centers[sel]) / w.sum())
    return int(round(center))


def match_events(a, b, delay, window):
    if window <= 0:
        raise ValueError("coincidence window must be positive")
    return greedy_match(a.times, b.times, np.int64(delay), np.int64(window))


def count_coincidences(a, b, delay, window=DEFAULT_WINDOW, acquisition_seconds=None):
    """4x4 table C(Ai, Bj) of pairs with |t_a - (t_b - delay)| <= window/2, greedy one-to-one."""
    ia, ib = match_events(a, b, delay, window)
    counts = np.zeros((4, 4), dtype=np.int64)
    np.add.at(counts, (a.detectors[ia].astype(np.int64) - 1, b.detectors[ib].astype(np.int64) - 1), 1)
    if acquisition_seconds is None:
        acquisition_seconds = max(a.duration, b.duration) / PS_PER_S
    return CoincidenceTable(counts, int(window), int(delay), float(acquisition_seconds))


class WindowChoice(NamedTuple):
    window: int
    table: CoincidenceTable
    met: bool


def optimize_window(a, b, delay, qber_limit=11.0, window_grid=None, acquisition_seconds=None):
    """Grid-scan the coincidence window.

    Returns the window with the largest keyrate among those whose QBER stays
    at or below ``qber_limit``. If none qualifies, the minimum-QBER window is
    returned with ``met=False``.
    """
    if len(a) == 0 or len(b) == 0:
        raise MubqkdError("cannot optimize the window on empty streams")
    grid = sorted(window_grid) if window_grid is not None else [250, 500, 750, 1000, 1500, 2000, 3000, 4000]
    if not grid:
        raise ValueError("window grid is empty")
    scored = []
    for w in grid:
        table = count_coincidences(a, b, delay, w, acquisition_seconds)
        try:
            q = protocol.qber(table)
        except MubqkdError:
            q = np.inf
        scored.append((w, table, q, protocol.keyrate(table)))
    ok = [s for s in scored if s[2] <= qber_limit]
    if ok:
        # ties go to the wider window
        w, table, _, _ = max(ok, key=lambda s: (s[3], s[0]))
        return WindowChoice(w, table, True)
    w, table, _, _ = min(scored, key=lambda s: (s[2], s[0]))
    return WindowChoice(w, table, False)


def write_ttag(path, stream):
    """Binary form: ``TTAG1`` then little-endian (u8 detector, u64 ps) records."""
    if len(stream) and stream.times[0] < 0:
        raise StreamFormatError("binary stream format cannot hold negative times")
    rec = np.empty(len(stream), dtype=_RECORD)
    rec["det"] = stream.detectors
    rec["t"] = stream.times
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(rec.tobytes())


def read_ttag(path, party="alice"):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise StreamFormatError(f"{path}: missing TTAG1 magic")
    body = data[len(MAGIC):]
    if len(body) % _RECORD.itemsize:
        raise StreamFormatError(f"{path}: truncated record")
    rec = np.frombuffer(body, dtype=_RECORD)
    if rec.size and rec["t"].max() > np.iinfo(np.int64).max:
        raise StreamFormatError(f"{path}: timestamp out of range")
    return TimestampStream(rec["det"].copy(), rec["t"].astype(np.int64), party)


def write_csv(path, stream):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("detector,ps\n")
        for d, t in zip(stream.detectors.tolist(), stream.times.tolist()):
            fh.write(f"{d},{t}\n")


def read_csv(path, party="alice"):
    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise StreamFormatError(f"{path}: {exc}") from None
    if raw.size == 0:
        raw = raw.reshape(0, 2)
    return TimestampStream(raw[:, 0], raw[:, 1], party)


def read_stream(path, party="alice"):
    """Dispatch on content: binary if it starts with the magic, CSV otherwise."""
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    return read_ttag(path, party) if head == MAGIC else read_csv(path, party)

