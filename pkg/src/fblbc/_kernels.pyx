# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled series kernels."""
from libc.math cimport exp, log, ceil, floor, INFINITY, fabs


cdef inline double _logterm(double s, double a, long j):
    cdef double base = j + a
    if base == 0.0:
        if s == 0.0:
            return 0.0
        return -INFINITY
    return -j - s * log(base)


def lerch_log(double s, double a, double rel_tol, long max_terms):
    """log of sum_j e^{-j} (j+a)^{-s}; returns (log_value, terms, converged, log_partial)."""
    cdef double jpk = -s - a
    cdef long j0 = 0
    cdef double scale, lt, t, r, acc = 0.0, comp = 0.0, y, tmp
    cdef long j
    if jpk > 0:
        j0 = <long>floor(jpk)
    # peak beyond the cap: scale by the largest reachable term
    if j0 > max_terms - 1:
        j0 = max_terms - 1
    scale = _logterm(s, a, j0)
    lt = _logterm(s, a, j0 + 1)
    if lt > scale:
        scale = lt
    lt = _logterm(s, a, 0)
    if lt > scale:
        scale = lt
    for j in range(max_terms):
        lt = _logterm(s, a, j)
        if lt == -INFINITY:
            continue
        t = exp(lt - scale)
        # Neumaier compensated sum
        tmp = acc + t
        if fabs(acc) >= fabs(t):
            comp += (acc - tmp) + t
        else:
            comp += (t - tmp) + acc
        acc = tmp
        if j + a > jpk and j + a > 0.0:
            r = exp(-1.0 - s * log((j + 1 + a) / (j + a)))
            if r < 1.0 and t * r / (1.0 - r) < rel_tol * (acc + comp):
                return scale + log(acc + comp), j + 1, True, scale + log(acc + comp)
    return scale + log(acc + comp), max_terms, False, scale + log(acc + comp)
