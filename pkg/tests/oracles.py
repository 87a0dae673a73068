"""Slow, obviously-correct reference computations used only by the tests."""

import itertools
import math

import numpy as np


def naive_dft(x):
    """O(n^2) DFT, evaluated in row blocks to bound memory."""
    x = np.asarray(x, dtype=complex)
    n = x.size
    j = np.arange(n)
    out = np.empty(n, dtype=complex)
    for start in range(0, n, 256):
        k = np.arange(start, min(n, start + 256))[:, None]
        # reduce k*j mod n first so the phase argument stays small and exact
        out[start : start + k.shape[0]] = np.exp(-2j * np.pi * ((k * j) % n) / n) @ x
    return out


def naive_band_power_ratio(samples, sample_rate, band, pad):
    x = np.zeros(pad)
    x[: len(samples)] = samples
    spec = np.abs(naive_dft(x)[: pad // 2 + 1]) ** 2
    freqs = np.arange(pad // 2 + 1) * sample_rate / pad
    in_band = (freqs >= band[0]) & (freqs <= band[1])
    total = spec[1:].sum()
    return spec[in_band].sum() / total if total > 0 else 0.0


def gini_of(labels):
    n = len(labels)
    return 1.0 - sum((labels.count(c) / n) ** 2 for c in set(labels))


def brute_force_split(X, y, features, tol=1e-12):
    """Try every (feature, midpoint) pair with plain Python lists.

    Returns (feature, threshold, decrease) or None, using the same tie rule
    as the production search: best decrease, then lowest feature, then
    lowest threshold.
    """
    rows = list(range(len(y)))
    labels = [int(v) for v in y]
    parent = gini_of(labels)
    candidates = []
    for f in sorted(features):
        values = sorted(set(float(X[r][f]) for r in rows))
        for a, b in zip(values, values[1:]):
            t = (a + b) / 2
            left = [labels[r] for r in rows if X[r][f] <= t]
            right = [labels[r] for r in rows if X[r][f] > t]
            n = len(rows)
            dec = parent - len(left) / n * gini_of(left) - len(right) / n * gini_of(right)
            candidates.append((f, t, dec))
    if not candidates:
        return None
    best = max(c[2] for c in candidates)
    if best <= tol:
        return None
    for f, t, dec in candidates:  # already ordered by feature, then threshold
        if dec >= best - tol:
            return f, t, dec


def raised_cosine_variance(depth):
    """Variance of depth*(1-cos)/2 over whole cycles: depth^2 / 8."""
    return depth**2 / 8.0


def count_local_maxima(x):
    x = np.asarray(x)
    return int(np.sum((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])))
