"""Empirical Kendall distributions from ranks.

The pseudo-observation of row ``m`` is the number of rows strictly below it
in every coordinate, divided by ``n + 1``. Only strict inequalities are used,
so ties in the data simply do not count.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit


class TiesWarning(UserWarning):
    """Input column contains tied values."""


@njit(cache=True)
def _dense_ranks(v):
    n = v.shape[0]
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(n, dtype=np.int64)
    cur = 0
    for i in range(n):
        idx = order[i]
        if i == 0 or v[idx] != v[order[i - 1]]:
            cur += 1
        ranks[idx] = cur
    return order, ranks, cur


@njit(cache=True)
def _dominance_counts(x, order_x, ry, k):
    # Fenwick tree over y-ranks; rows sharing an x value are queried before any is inserted
    n = x.shape[0]
    bit = np.zeros(k + 1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    i = 0
    while i < n:
        j = i
        xi = x[order_x[i]]
        while j < n and x[order_x[j]] == xi:
            j += 1
        for t in range(i, j):
            idx = order_x[t]
            r = ry[idx] - 1
            s = 0
            while r > 0:
                s += bit[r]
                r -= r & (-r)
            out[idx] = s
        for t in range(i, j):
            r = ry[order_x[t]]
            while r <= k:
                bit[r] += 1
                r += r & (-r)
        i = j
    return out


@njit(cache=True)
def _pair_counts(x, y):
    order_x, _, _ = _dense_ranks(x)
    _, ry, k = _dense_ranks(y)
    return _dominance_counts(x, order_x, ry, k)


@njit(cache=True)
def _triple_counts(x, y, z):
    n = x.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for m in range(n):
        c = 0
        for l in range(n):
            if x[l] < x[m] and y[l] < y[m] and z[l] < z[m]:
                c += 1
        out[m] = c
    return out


@njit(cache=True)
def batch_triple_distances(samples):
    """Distances for a stack of trivariate samples, shape ``(B, n, 3)`` -> ``(B, 3)``.

    Column order of the result: shared index 1, 2, 3 (see ``triple_distances``).
    """
    nb, n, _ = samples.shape
    out = np.empty((nb, 3), dtype=np.float64)
    norm = 1.0 / ((n + 1.0) * n)
    for b in range(nb):
        x0 = samples[b, :, 0].copy()
        x1 = samples[b, :, 1].copy()
        x2 = samples[b, :, 2].copy()
        o0, _, _ = _dense_ranks(x0)
        o1, r1, k1 = _dense_ranks(x1)
        _, r2, k2 = _dense_ranks(x2)
        c01 = np.sort(_dominance_counts(x0, o0, r1, k1))
        c02 = np.sort(_dominance_counts(x0, o0, r2, k2))
        c12 = np.sort(_dominance_counts(x1, o1, r2, k2))
        d1 = 0.0
        d2 = 0.0
        d3 = 0.0
        for m in range(n):
            d1 += abs(c01[m] - c02[m])
            d2 += abs(c01[m] - c12[m])
            d3 += abs(c02[m] - c12[m])
        out[b, 0] = d1 * norm
        out[b, 1] = d2 * norm
        out[b, 2] = d3 * norm
    return out


@dataclass(frozen=True)
class KendallSample:
    """Pseudo-observations in input row order, with a sorted copy."""

    w: np.ndarray
    sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        w.setflags(write=False)
        s = np.sort(w)
        s.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sorted", s)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def __eq__(self, other):
        if not isinstance(other, KendallSample):
            return NotImplemented
        return np.array_equal(self.w, other.w)

    __hash__ = None


def _columns(*cols):
    arrs = [np.ascontiguousarray(c, dtype=float) for c in cols]
    n = arrs[0].shape[0]
    for a in arrs:
        if a.ndim != 1:
            raise ValueError("pseudo-observations need one-dimensional columns")
        if a.shape[0] != n:
            raise ValueError(f"length mismatch: {[c.shape[0] for c in arrs]}")
    if n < 2:
        raise ValueError("need at least two observations")
    return arrs


def pair_counts_direct(x, y) -> np.ndarray:
    """Literal double sum, O(n^2); the reference for the fast path."""
    x, y = _columns(x, y)
    return ((x[None, :] < x[:, None]) & (y[None, :] < y[:, None])).sum(axis=1)


def pair_pseudo_obs(x, y, method: str = "fast") -> KendallSample:
    x, y = _columns(x, y)
    if method == "fast":
        counts = _pair_counts(x, y)
    elif method == "direct":
        counts = pair_counts_direct(x, y)
    else:
        raise ValueError(f"unknown method {method!r}")
    return KendallSample(counts / (x.shape[0] + 1.0))


def triple_pseudo_obs(x, y, z) -> KendallSample:
    x, y, z = _columns(x, y, z)
    return KendallSample(_triple_counts(x, y, z) / (x.shape[0] + 1.0))


def pseudo_obs(data) -> KendallSample:
    """Pseudo-observations of an ``n x 2`` or ``n x 3`` matrix."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] not in (2, 3):
        raise ValueError("expected an n x 2 or n x 3 matrix")
    if data.shape[1] == 2:
        return pair_pseudo_obs(data[:, 0], data[:, 1])
    return triple_pseudo_obs(data[:, 0], data[:, 1], data[:, 2])


def ecdf(ks: KendallSample, w):
    """Right-continuous empirical CDF of the pseudo-observations."""
    w = np.asarray(w, dtype=float)
    out = np.searchsorted(ks.sorted, w, side="right") / ks.n
    return out[()] if out.ndim == 0 else out


def l1_distance(a: KendallSample, b: KendallSample) -> float:
    """Integrated absolute difference of two empirical Kendall CDFs.

    Both CDFs jump by ``1/n`` at each order statistic, so the integral equals
    the mean absolute difference of the sorted pseudo-observations.
    """
    if a.n != b.n:
        raise ValueError(f"length mismatch: {a.n} vs {b.n}")
    return float(np.mean(np.abs(a.sorted - b.sorted)))


def l1_distance_integral(a: KendallSample, b: KendallSample) -> float:
    """Same quantity by exact integration of the step functions on their merged jump grid."""
    grid = np.union1d(a.sorted, b.sorted)
    grid = np.concatenate([grid, [max(1.0, grid[-1])]])
    fa = ecdf(a, grid[:-1])
    fb = ecdf(b, grid[:-1])
    return float(np.sum(np.abs(fa - fb) * np.diff(grid)))


def has_ties(x) -> bool:
    x = np.asarray(x)
    return np.unique(x).size < x.size


def warn_ties(data, labels=None) -> list:
    """Warn once per tied column; returns the offending labels."""
    data = np.asarray(data)
    labels = list(labels) if labels is not None else [str(j) for j in range(data.shape[1])]
    tied = [labels[j] for j in range(data.shape[1]) if has_ties(data[:, j])]
    if tied:
        warnings.warn(
            f"tied values in column(s) {', '.join(tied)}; strict inequalities are used, no jitter",
            TiesWarning,
            stacklevel=2,
        )
    return tied
