# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled particle-stepping kernel.

Must stay operation-for-operation identical to ``_kernels_py.advance`` so both
backends produce bitwise-equal trajectories.
"""

from libc.math cimport isfinite

cdef enum:
    _NONE = 0
    _TRIGGER = 1
    _BANKRUPT = 2
    _NONFINITE = 3

STOP_NONE = _NONE
STOP_TRIGGER = _TRIGGER
STOP_BANKRUPT = _BANKRUPT
STOP_NONFINITE = _NONFINITE


cdef inline double _mean(const double[::1] x) noexcept nogil:
    cdef Py_ssize_t i
    cdef Py_ssize_t n = x.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += x[i]
    return s / n


def mean(const double[::1] x):
    return _mean(x)


def advance(double[::1] x, double dt, double alpha0, double sigma1, double sigma2,
            const double[::1] dB1, const double[:, ::1] dB2, const double[:, ::1] jumps,
            Py_ssize_t start, Py_ssize_t stop, double level, Py_ssize_t check_from,
            double[::1] m_out):
    cdef Py_ssize_t n = x.shape[0]
    cdef bint has_idio = dB2.shape[0] > 0
    cdef bint has_jumps = jumps.shape[0] > 0
    cdef Py_ssize_t k, i
    cdef double m, common, d
    cdef int status = _NONE
    with nogil:
        m = _mean(x)
        k = start
        while k < stop:
            common = alpha0 * dt + sigma1 * dB1[k]
            for i in range(n):
                d = common
                if has_idio:
                    d = d + sigma2 * dB2[k, i]
                if has_jumps:
                    d = d + jumps[k, i]
                x[i] = x[i] + m * d
            m = _mean(x)
            m_out[k] = m
            k += 1
            if not isfinite(m):
                status = _NONFINITE
                break
            if m <= 0.0:
                status = _BANKRUPT
                break
            if k - 1 >= check_from and m >= level:
                status = _TRIGGER
                break
    return k, status
