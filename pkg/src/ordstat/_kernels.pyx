# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  ``_kernels_py`` mirrors every function here."""
import numpy as np

from libc.math cimport erfc, exp, log, sqrt, NAN

cdef double SQRT2 = 1.4142135623730951
cdef double SQRT2PI = 2.5066282746310002
cdef double P_LOW = 0.02425

cdef double[6] A = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                    1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00]
cdef double[5] B = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                    6.680131188771972e+01, -1.328068155288572e+01]
cdef double[6] C = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                    -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00]
cdef double[4] D = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                    3.754408661907416e+00]


cdef inline double _ppf_lower(double p) noexcept nogil:
    # p in (0, 0.5]; rational start then one Halley step
    cdef double q, r, x, e, u
    if p < P_LOW:
        q = sqrt(-2.0 * log(p))
        x = (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / \
            ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q / \
            (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    e = 0.5 * erfc(-x / SQRT2) - p
    u = e * SQRT2PI * exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def norm_ppf(const double[::1] p):
    cdef Py_ssize_t i, n = p.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double v
    with nogil:
        for i in range(n):
            v = p[i]
            if v <= 0.5:
                o[i] = _ppf_lower(v)
            else:
                o[i] = -_ppf_lower(1.0 - v)
    return out


def gamma_mt_candidates(double a, const double[::1] normals, const double[::1] uniforms):
    """Marsaglia-Tsang proposals for shape ``a >= 1``; rejected slots are NaN."""
    cdef Py_ssize_t i, n = normals.shape[0]
    cdef double d = a - 1.0 / 3.0
    cdef double c = 1.0 / sqrt(9.0 * d)
    cdef double x, v, u, x2
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            x = normals[i]
            v = 1.0 + c * x
            if v <= 0.0:
                o[i] = NAN
                continue
            v = v * v * v
            u = uniforms[i]
            x2 = x * x
            if u < 1.0 - 0.0331 * x2 * x2:
                o[i] = d * v
            elif log(u) < 0.5 * x2 + d * (1.0 - v + log(v)):
                o[i] = d * v
            else:
                o[i] = NAN
    return out


def mixed_loss(const double[::1] x1, const double[::1] x2, int target, bint is_scale,
               double c0, double comp, double alpha, double theta):
    """Loss of the mixed estimator at every draw.

    target 1: d1 = X1 (-|*) c0, d2 = X2 (-|*) comp; keeps d1 unless pooled.
    target 2: d1 = X1 (-|*) comp, d2 = X2 (-|*) c0; keeps d2 unless pooled.
    """
    cdef Py_ssize_t i, n = x1.shape[0]
    cdef double d1, d2, est, r
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            if target == 1:
                if is_scale:
                    d1 = c0 * x1[i]
                    d2 = comp * x2[i]
                else:
                    d1 = x1[i] - c0
                    d2 = x2[i] - comp
                est = d1 if d1 <= d2 else alpha * d1 + (1.0 - alpha) * d2
            else:
                if is_scale:
                    d1 = comp * x1[i]
                    d2 = c0 * x2[i]
                else:
                    d1 = x1[i] - comp
                    d2 = x2[i] - c0
                est = d2 if d1 <= d2 else alpha * d1 + (1.0 - alpha) * d2
            if is_scale:
                r = est / theta - 1.0
            else:
                r = est - theta
            o[i] = r * r
    return out


cdef double _pairwise(const double[::1] v, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t i, mid
    cdef double s = 0.0
    if hi - lo <= 128:
        for i in range(lo, hi):
            s += v[i]
        return s
    mid = lo + (hi - lo) // 2
    return _pairwise(v, lo, mid) + _pairwise(v, mid, hi)


cdef double _pairwise_sq(const double[::1] v, Py_ssize_t lo, Py_ssize_t hi, double mean) noexcept nogil:
    cdef Py_ssize_t i, mid
    cdef double s = 0.0, t
    if hi - lo <= 128:
        for i in range(lo, hi):
            t = v[i] - mean
            s += t * t
        return s
    mid = lo + (hi - lo) // 2
    return _pairwise_sq(v, lo, mid, mean) + _pairwise_sq(v, mid, hi, mean)


def mean_and_m2(const double[::1] v):
    """Mean and sum of squared deviations, both by pairwise summation."""
    cdef Py_ssize_t n = v.shape[0]
    cdef double mean, m2
    if n == 0:
        return 0.0, 0.0
    with nogil:
        mean = _pairwise(v, 0, n) / n
        m2 = _pairwise_sq(v, 0, n, mean)
    return mean, m2
