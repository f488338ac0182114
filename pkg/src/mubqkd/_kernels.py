"""Compiled inner loops over sorted timestamp arrays."""

import numba
import numpy as np


@numba.njit(cache=True)
def greedy_match(ta, tb, delay, window):
    """Match Alice events to Bob events with |ta - (tb - delay)| <= window / 2.

    Alice events are visited in time order and each takes the earliest Bob
    event still unmatched inside its window. Both arrays must be sorted.
    Returns index arrays (ia, ib) of the matched pairs.
    """
    na, nb = ta.shape[0], tb.shape[0]
    ia = np.empty(min(na, nb), dtype=np.int64)
    ib = np.empty(min(na, nb), dtype=np.int64)
    n = 0
    j = 0
    for i in range(na):
        t = ta[i]
        while j < nb and 2 * (t - (tb[j] - delay)) > window:
            j += 1
        if j < nb and 2 * ((tb[j] - delay) - t) <= window:
            ia[n] = i
            ib[n] = j
            n += 1
            j += 1
    return ia[:n], ib[:n]


@numba.njit(cache=True)
def dead_time_mask(times, detectors, dead_time, n_detectors):
    """Keep-mask dropping events that fall within ``dead_time`` of the last kept event on the same detector."""
    keep = np.ones(times.shape[0], dtype=np.bool_)
    last = np.full(n_detectors + 1, np.iinfo(np.int64).min // 2, dtype=np.int64)
    for k in range(times.shape[0]):
        d = detectors[k]
        if times[k] - last[d] < dead_time:
            keep[k] = False
        else:
            last[d] = times[k]
    return keep
