"""Numpy implementations of the compiled kernels; same signatures and arithmetic."""
import numpy as np
from scipy.special import erfc

_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425
_SQRT2 = 1.4142135623730951
_SQRT2PI = 2.5066282746310002


def _ppf_lower(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.sqrt(-2.0 * np.log(p))
        tail = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    body = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    x = np.where(p < _P_LOW, tail, body)
    e = 0.5 * erfc(-x / _SQRT2) - p
    u = e * _SQRT2PI * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def norm_ppf(p):
    p = np.ascontiguousarray(p, dtype=float)
    low = p <= 0.5
    return np.where(low, _ppf_lower(np.where(low, p, 0.5)), -_ppf_lower(np.where(low, 0.5, 1.0 - p)))


def gamma_mt_candidates(a, normals, uniforms):
    x = np.asarray(normals, float)
    u = np.asarray(uniforms, float)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    v = 1.0 + c * x
    pos = v > 0.0
    v = np.where(pos, v, 1.0) ** 3
    x2 = x * x
    with np.errstate(divide="ignore"):
        squeeze = u < 1.0 - 0.0331 * x2 * x2
        full = np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v))
    return np.where(pos & (squeeze | full), d * v, np.nan)


def mixed_loss(x1, x2, target, is_scale, c0, comp, alpha, theta):
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    if target == 1:
        d1, d2 = (c0 * x1, comp * x2) if is_scale else (x1 - c0, x2 - comp)
        est = np.where(d1 <= d2, d1, alpha * d1 + (1.0 - alpha) * d2)
    else:
        d1, d2 = (comp * x1, c0 * x2) if is_scale else (x1 - comp, x2 - c0)
        est = np.where(d1 <= d2, d2, alpha * d1 + (1.0 - alpha) * d2)
    r = est / theta - 1.0 if is_scale else est - theta
    return r * r


def mean_and_m2(v):
    v = np.asarray(v, float)
    if v.size == 0:
        return 0.0, 0.0
    mean = float(np.sum(v)) / v.size
    dev = v - mean
    return mean, float(np.sum(dev * dev))
