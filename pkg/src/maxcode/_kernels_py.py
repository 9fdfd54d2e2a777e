"""Pure-Python landscape kernels.

Reference implementation and import-time fallback for ``_kernels.pyx``.
Both must perform the same floating-point operations in the same order so
the two backends agree bit for bit.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

BACKEND = "python"


def _point(p, centers, heights, widths, coef, offset, modulus, cutoff, extent, base_peak, span):
    for v in p:
        if v < 0 or v >= extent:
            return False, 0.0
    h = offset
    for c, v in zip(coef, p):
        h += c * v
    if h % modulus < cutoff:
        return False, 0.0
    peak = 0.0
    for center, height, width in zip(centers, heights, widths):
        d2 = 0.0
        for v, c in zip(p, center):
            diff = v - c
            d2 += diff * diff
        g = height * math.exp(-d2 / (2.0 * width * width))
        if g > peak:
            peak = g
    s = 1.0 + span * ((peak - base_peak) / (1.0 - base_peak))
    if s < 0.0:
        s = 0.0
    top = 1.0 + span
    if s > top:
        s = top
    return True, s


def _unpack(model):
    return (
        model.centers.tolist(),
        model.heights.tolist(),
        model.widths.tolist(),
        model.coef.tolist(),
        int(model.offset),
        int(model.modulus),
        int(model.cutoff),
        int(model.extent),
        float(model.base_peak),
        float(model.span),
    )


def evaluate_points(points, model):
    """Correctness flags and speedups for an (N, D) integer array of parameter vectors."""
    args = _unpack(model)
    pts = np.asarray(points, dtype=np.int64)
    correct = np.zeros(len(pts), dtype=np.uint8)
    speed = np.zeros(len(pts), dtype=np.float64)
    for i, p in enumerate(pts.tolist()):
        ok, s = _point(p, *args)
        correct[i] = ok
        speed[i] = s
    return correct, speed


def grid_best(lo, hi, model):
    """Exhaustive scan of the inclusive box [lo, hi]; first maximum in lexicographic order wins.

    Returns (best_point or None, best_speedup, feasible_count).
    """
    args = _unpack(model)
    ranges = [range(int(a), int(b) + 1) for a, b in zip(lo, hi)]
    best = None
    best_s = -1.0
    feasible = 0
    for p in itertools.product(*ranges):
        ok, s = _point(p, *args)
        if not ok:
            continue
        feasible += 1
        if s > best_s:
            best, best_s = p, s
    if best is None:
        return None, 0.0, 0
    return np.asarray(best, dtype=np.int64), best_s, feasible


def ball_best(center, radius, model):
    """Best correct speedup within L1 distance ``radius`` of ``center``; -1.0 when none."""
    args = _unpack(model)
    extent = args[7]
    center = [int(c) for c in center]
    ranges = [range(max(0, c - radius), min(extent - 1, c + radius) + 1) for c in center]
    best_s = -1.0
    for p in itertools.product(*ranges):
        dist = 0
        for v, c in zip(p, center):
            dist += abs(v - c)
        if dist > radius:
            continue
        ok, s = _point(p, *args)
        if ok and s > best_s:
            best_s = s
    return best_s
