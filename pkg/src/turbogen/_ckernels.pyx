# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels (in-place, complex128)."""
cimport cython
import numpy as np


def apply_1q(double complex[::1] state, int bit, u):
    cdef double complex c00 = u[0, 0], c01 = u[0, 1], c10 = u[1, 0], c11 = u[1, 1]
    cdef double ar00 = c00.real, ai00 = c00.imag, ar01 = c01.real, ai01 = c01.imag
    cdef double ar10 = c10.real, ai10 = c10.imag, ar11 = c11.real, ai11 = c11.imag
    cdef Py_ssize_t n = state.shape[0]
    cdef Py_ssize_t step = (<Py_ssize_t>1) << bit
    cdef Py_ssize_t base, i, i1
    cdef double xr, xi, yr, yi
    # interleaved (re, im) doubles; explicit arithmetic avoids the C99
    # complex multiply with its inf/nan recovery branches
    cdef double* v = <double*> &state[0]
    with nogil:
        base = 0
        while base < n:
            for i in range(base, base + step):
                i1 = i + step
                xr = v[2 * i]
                xi = v[2 * i + 1]
                yr = v[2 * i1]
                yi = v[2 * i1 + 1]
                v[2 * i] = ar00 * xr - ai00 * xi + ar01 * yr - ai01 * yi
                v[2 * i + 1] = ar00 * xi + ai00 * xr + ar01 * yi + ai01 * yr
                v[2 * i1] = ar10 * xr - ai10 * xi + ar11 * yr - ai11 * yi
                v[2 * i1 + 1] = ar10 * xi + ai10 * xr + ar11 * yi + ai11 * yr
            base += 2 * step


def apply_cx(double complex[::1] state, int control_bit, int target_bit):
    cdef Py_ssize_t n = state.shape[0]
    cdef Py_ssize_t cmask = (<Py_ssize_t>1) << control_bit
    cdef Py_ssize_t tmask = (<Py_ssize_t>1) << target_bit
    cdef Py_ssize_t i, j
    cdef double complex tmp
    with nogil:
        for i in range(n):
            if (i & cmask) and not (i & tmask):
                j = i | tmask
                tmp = state[i]
                state[i] = state[j]
                state[j] = tmp


def norm_squared(double complex[::1] state):
    """Kahan-compensated sum of squared moduli, fixed sequential order."""
    cdef Py_ssize_t i, n = state.shape[0]
    cdef double total = 0.0, comp = 0.0, term, t
    with nogil:
        for i in range(n):
            term = state[i].real * state[i].real + state[i].imag * state[i].imag - comp
            t = total + term
            comp = (t - total) - term
            total = t
    return total
