# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exponential-integral kernels.

Same algorithm and API as ``_kernels_py``; see that module for the
description of the series / continued-fraction split.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log, M_PI

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex clog(double complex)
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)

cnp.import_array()

cdef double EULER_GAMMA = 0.57721566490153286061
cdef double SERIES_RADIUS = 2.0
cdef double SERIES_AXIS_BAND = 4.0
cdef int MAX_TERMS = 600
cdef double TINY = 1e-300


cdef inline bint _use_series(double complex z) nogil:
    cdef double r = cabs(z)
    return r <= SERIES_RADIUS or r + creal(z) <= SERIES_AXIS_BAND


cdef double INV[600]
cdef int _q
for _q in range(1, 600):
    INV[_q] = 1.0 / _q


cdef inline double _abs2(double complex z) nogil:
    return creal(z) * creal(z) + cimag(z) * cimag(z)


cdef double complex _ein(double complex z) nogil:
    cdef double complex term = z
    cdef double complex total = z
    cdef double complex add
    cdef double complex mz = -z
    cdef int k
    for k in range(2, MAX_TERMS):
        term = term * mz * INV[k]
        add = term * INV[k]
        total = total + add
        if _abs2(add) <= 1e-34 * _abs2(total):
            break
    return total


cdef double complex _e1_cf(double complex z) nogil:
    cdef double complex b = z + 1.0
    cdef double complex c = 1.0 / TINY
    cdef double complex d = 1.0 / b
    cdef double complex h = d
    cdef double complex delta
    cdef double a
    cdef int i
    for i in range(1, 4 * MAX_TERMS):
        a = -(<double>i) * i
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        if _abs2(delta - 1.0) <= 1e-32:
            break
    return h * cexp(-z)


cdef inline double complex _upper(double complex z) nogil:
    if cimag(z) == 0.0 and creal(z) < 0.0:
        return creal(z) + 0.0j
    return z


cdef double complex _e1(double complex z) nogil:
    z = _upper(z)
    if _use_series(z):
        return -EULER_GAMMA - clog(z) + _ein(z)
    return _e1_cf(z)


cdef double _h1(double complex w) nogil:
    cdef double complex zeta = -1j * w
    if _use_series(zeta):
        return (creal(_ein(zeta)) - EULER_GAMMA) / (2.0 * M_PI)
    return (creal(_e1_cf(zeta)) + log(cabs(zeta))) / (2.0 * M_PI)


def e1_array(z):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(
        np.atleast_1d(np.asarray(z, dtype=complex)).ravel())
    cdef Py_ssize_t n = zz.shape[0], i
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=complex)
    with nogil:
        for i in range(n):
            out[i] = _e1(zz[i])
    return out.reshape(np.shape(np.atleast_1d(z)))


def h1_array(w):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] ww = np.ascontiguousarray(
        np.atleast_1d(np.asarray(w, dtype=complex)).ravel())
    cdef Py_ssize_t n = ww.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=float)
    with nogil:
        for i in range(n):
            out[i] = _h1(ww[i])
    return out.reshape(np.shape(np.atleast_1d(w)))


def hhat_matrix(k, nodes, double h1_zero):
    cdef double complex kk = complex(k)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] z = np.ascontiguousarray(
        np.asarray(nodes, dtype=complex).ravel())
    cdef Py_ssize_t n = z.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, n), dtype=float)
    with nogil:
        for i in range(n):
            for j in range(n):
                if i == j:
                    out[i, j] = 0.0
                else:
                    out[i, j] = _h1(kk * (z[i] - z[j])) - h1_zero
    return out
