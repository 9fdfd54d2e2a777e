# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled landscape kernels. Mirrors ``_kernels_py`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND = "cython"


cdef inline bint _point(const long long[:] p, const double[:, :] centers,
                        const double[:] heights, const double[:] widths,
                        const long long[:] coef, long long offset, long long modulus,
                        long long cutoff, long long extent, double base_peak,
                        double span, double* out) noexcept nogil:
    cdef Py_ssize_t d = p.shape[0]
    cdef Py_ssize_t npk = heights.shape[0]
    cdef Py_ssize_t i, j
    cdef long long h
    cdef double peak, d2, diff, g, s, top
    for i in range(d):
        if p[i] < 0 or p[i] >= extent:
            out[0] = 0.0
            return False
    h = offset
    for i in range(d):
        h += coef[i] * p[i]
    if h % modulus < cutoff:
        out[0] = 0.0
        return False
    peak = 0.0
    for j in range(npk):
        d2 = 0.0
        for i in range(d):
            diff = <double>p[i] - centers[j, i]
            d2 += diff * diff
        g = heights[j] * exp(-d2 / (2.0 * widths[j] * widths[j]))
        if g > peak:
            peak = g
    s = 1.0 + span * ((peak - base_peak) / (1.0 - base_peak))
    if s < 0.0:
        s = 0.0
    top = 1.0 + span
    if s > top:
        s = top
    out[0] = s
    return True


def _arrays(model):
    return (
        np.ascontiguousarray(model.centers, dtype=np.float64),
        np.ascontiguousarray(model.heights, dtype=np.float64),
        np.ascontiguousarray(model.widths, dtype=np.float64),
        np.ascontiguousarray(model.coef, dtype=np.int64),
    )


def evaluate_points(points, model):
    cdef const double[:, :] centers
    cdef const double[:] heights, widths
    cdef const long long[:] coef
    centers, heights, widths, coef = _arrays(model)
    cdef const long long[:, :] pts = np.ascontiguousarray(points, dtype=np.int64).reshape(-1, coef.shape[0])
    cdef Py_ssize_t n = pts.shape[0]
    correct = np.zeros(n, dtype=np.uint8)
    speed = np.zeros(n, dtype=np.float64)
    cdef unsigned char[:] cv = correct
    cdef double[:] sv = speed
    cdef long long offset = model.offset, modulus = model.modulus
    cdef long long cutoff = model.cutoff, extent = model.extent
    cdef double base_peak = model.base_peak, span = model.span
    cdef double s
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            cv[k] = _point(pts[k], centers, heights, widths, coef, offset, modulus,
                           cutoff, extent, base_peak, span, &s)
            sv[k] = s
    return correct, speed


def grid_best(lo, hi, model):
    cdef const double[:, :] centers
    cdef const double[:] heights, widths
    cdef const long long[:] coef
    centers, heights, widths, coef = _arrays(model)
    cdef const long long[:] lov = np.ascontiguousarray(lo, dtype=np.int64)
    cdef const long long[:] hiv = np.ascontiguousarray(hi, dtype=np.int64)
    cdef Py_ssize_t d = lov.shape[0]
    cur = np.array(lov, dtype=np.int64)
    best = np.zeros(d, dtype=np.int64)
    cdef long long[:] cv = cur
    cdef long long[:] bv = best
    cdef long long offset = model.offset, modulus = model.modulus
    cdef long long cutoff = model.cutoff, extent = model.extent
    cdef double base_peak = model.base_peak, span = model.span
    cdef double s, best_s = -1.0
    cdef long long feasible = 0
    cdef Py_ssize_t i
    cdef bint found = False
    for i in range(d):
        if lov[i] > hiv[i]:
            return None, 0.0, 0
    with nogil:
        while True:
            if _point(cv, centers, heights, widths, coef, offset, modulus, cutoff,
                      extent, base_peak, span, &s):
                feasible += 1
                if s > best_s:
                    best_s = s
                    found = True
                    for i in range(d):
                        bv[i] = cv[i]
            # odometer increment, last dimension fastest
            i = d - 1
            while i >= 0:
                if cv[i] < hiv[i]:
                    cv[i] += 1
                    break
                cv[i] = lov[i]
                i -= 1
            if i < 0:
                break
    if not found:
        return None, 0.0, 0
    return best, best_s, feasible


def ball_best(center, long long radius, model):
    cdef const double[:, :] centers
    cdef const double[:] heights, widths
    cdef const long long[:] coef
    centers, heights, widths, coef = _arrays(model)
    cdef const long long[:] ctr = np.ascontiguousarray(center, dtype=np.int64)
    cdef Py_ssize_t d = ctr.shape[0]
    cdef long long extent = model.extent
    lo = np.array([max(0, c - radius) for c in ctr], dtype=np.int64)
    hi = np.array([min(extent - 1, c + radius) for c in ctr], dtype=np.int64)
    cdef long long[:] lov = lo
    cdef long long[:] hiv = hi
    cur = lo.copy()
    cdef long long[:] cv = cur
    cdef long long offset = model.offset, modulus = model.modulus
    cdef long long cutoff = model.cutoff
    cdef double base_peak = model.base_peak, span = model.span
    cdef double s, best_s = -1.0
    cdef long long dist
    cdef Py_ssize_t i
    for i in range(d):
        if lov[i] > hiv[i]:
            return best_s
    with nogil:
        while True:
            dist = 0
            for i in range(d):
                dist += cv[i] - ctr[i] if cv[i] >= ctr[i] else ctr[i] - cv[i]
            if dist <= radius:
                if _point(cv, centers, heights, widths, coef, offset, modulus, cutoff,
                          extent, base_peak, span, &s):
                    if s > best_s:
                        best_s = s
            i = d - 1
            while i >= 0:
                if cv[i] < hiv[i]:
                    cv[i] += 1
                    break
                cv[i] = lov[i]
                i -= 1
            if i < 0:
                break
    return best_s
