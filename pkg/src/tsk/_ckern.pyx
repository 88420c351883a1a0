# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: weighted kernel pair sums and dual coordinate sweeps."""

from libc.math cimport exp, fabs


cdef inline double _sqdist(const double[:, ::1] X, Py_ssize_t i,
                           const double[:, ::1] Y, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t k
    cdef double acc = 0.0, diff, comp = 0.0, term, tmp
    if d <= 64:
        for k in range(d):
            diff = X[i, k] - Y[j, k]
            acc += diff * diff
    else:
        # Kahan summation; plain accumulation drifts for very wide rows
        for k in range(d):
            diff = X[i, k] - Y[j, k]
            term = diff * diff - comp
            tmp = acc + term
            comp = (tmp - acc) - term
            acc = tmp
    return acc


cdef inline double _l1dist(const double[:, ::1] X, Py_ssize_t i,
                           const double[:, ::1] Y, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t k
    cdef double acc = 0.0, diff, comp = 0.0, term, tmp
    if d <= 64:
        for k in range(d):
            diff = X[i, k] - Y[j, k]
            acc += fabs(diff)
    else:
        for k in range(d):
            diff = X[i, k] - Y[j, k]
            term = fabs(diff) - comp
            tmp = acc + term
            comp = (tmp - acc) - term
            acc = tmp
    return acc


def pair_sum(const double[:, ::1] X, const double[::1] wx,
             const double[:, ::1] Y, const double[::1] wy,
             int family, double width):
    """sum_ij wx_i * wy_j * k(x_i, y_j); family 0 = gaussian, 1 = laplacian.

    Accumulation order is fixed (full row sums, then rows in order), so the
    result does not depend on any blocking choice made by callers.
    """
    cdef Py_ssize_t m = X.shape[0], n = Y.shape[0]
    cdef Py_ssize_t i, j
    cdef double total = 0.0, row
    cdef double g = width * width
    with nogil:
        for i in range(m):
            row = 0.0
            if family == 0:
                for j in range(n):
                    row += wy[j] * exp(-_sqdist(X, i, Y, j) / g)
            else:
                for j in range(n):
                    row += wy[j] * exp(-_l1dist(X, i, Y, j) / width)
            total += wx[i] * row
    return total


def cd_sweep(const double[:, ::1] K, const double[::1] y,
             double[::1] alpha, double[::1] f, double box_c, double diag_floor):
    """One cyclic pass of box-constrained dual coordinate maximization.

    Updates alpha and f = K @ (alpha * y) in place; returns the largest
    coordinate change. Coordinates with K_ii <= diag_floor are skipped.
    """
    cdef Py_ssize_t n = K.shape[0]
    cdef Py_ssize_t i, j
    cdef double g, anew, delta, step, biggest = 0.0
    with nogil:
        for i in range(n):
            if K[i, i] <= diag_floor:
                continue
            g = 1.0 - y[i] * f[i]
            anew = alpha[i] + g / K[i, i]
            if anew < 0.0:
                anew = 0.0
            elif anew > box_c:
                anew = box_c
            delta = anew - alpha[i]
            if delta != 0.0:
                alpha[i] = anew
                step = delta * y[i]
                for j in range(n):
                    f[j] += step * K[i, j]
            if fabs(delta) > biggest:
                biggest = fabs(delta)
    return biggest
