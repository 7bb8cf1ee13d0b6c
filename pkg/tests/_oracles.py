"""Independent reference computations built directly on scipy.

Nothing here goes through ordstat's pivot functions: the optimal pooling weight
is obtained from the joint density of (Z1, Z2) by writing the pooled-branch
error as e + alpha * g and minimising the quadratic in alpha.
"""
import math

import numpy as np
from scipy import integrate, special


def _normal_pdf(s1, s2, r):
    c = 1.0 / (2 * math.pi * s1 * s2 * math.sqrt(1 - r * r))

    def pdf(z):
        u, v = z[0] / s1, z[1] / s2
        return c * math.exp(-(u * u - 2 * r * u * v + v * v) / (2 * (1 - r * r)))
    return pdf


def _gamma_pdf(a1, a2):
    # scipy.special.gamma keeps this independent of ordstat's log-gamma path
    c = 1.0 / (special.gamma(a1) * special.gamma(a2))

    def pdf(z):
        if z[0] <= 0 or z[1] <= 0:
            return 0.0
        return c * z[0] ** (a1 - 1) * z[1] ** (a2 - 1) * math.exp(-z[0] - z[1])
    return pdf


LOC_FAMILIES = {
    "bivariate_normal": lambda s1, s2, r: (_normal_pdf(s1, s2, r), (-np.inf, np.inf), (-np.inf, np.inf)),
    "exponential": lambda s1, s2: (
        lambda z: math.exp(-z[0] / s1 - z[1] / s2) / (s1 * s2), (0, np.inf), (0, np.inf)),
}

SCALE_FAMILIES = {
    "gamma": lambda a1, a2: (_gamma_pdf(a1, a2), (0, np.inf), (0, np.inf)),
    "power": lambda a1, a2: (
        lambda z: a1 * a2 * z[0] ** (a1 - 1) * z[1] ** (a2 - 1), (0, 1), (0, 1)),
}


def _joint(name, params):
    table = LOC_FAMILIES if name in LOC_FAMILIES else SCALE_FAMILIES
    return table[name](*params)


def _dbl(fun, r1, r2_of):
    """Integrate fun(z1, z2) for z1 in r1 and z2 in r2_of(z1)."""
    def inner(z1):
        lo, hi = r2_of(z1)
        if not lo < hi:
            return 0.0
        return integrate.quad(lambda z2: fun(z1, z2), lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    return integrate.quad(inner, r1[0], r1[1], epsabs=1e-13, epsrel=1e-11, limit=200)[0]


def best_alpha(name, params, target, c0, companion, lam):
    """Risk-minimising pooling weight at gap lam, from the joint density alone."""
    pdf, r1, r2 = _joint(name, params)
    location = name in LOC_FAMILIES

    if location:
        theta = (0.0, lam)
        k1, k2 = (c0, companion) if target == "theta1" else (companion, c0)
        t = theta[0] if target == "theta1" else theta[1]

        def d(z1, z2):
            return z1 - k1, lam + z2 - k2

        def cut(z1):   # pooling happens for z2 below this
            return z1 - k1 - lam + k2
        norm = 1.0
    else:
        k1, k2 = (c0, companion) if target == "theta1" else (companion, c0)
        t = 1.0 if target == "theta1" else lam

        def d(z1, z2):
            return k1 * z1, k2 * lam * z2

        def cut(z1):
            return k1 * z1 / (k2 * lam)
        norm = t

    def e_g(z1, z2):
        d1, d2 = d(z1, z2)
        return (d2 - t) / norm, (d1 - d2) / norm

    def num(z1, z2):
        e, g = e_g(z1, z2)
        return e * g * pdf((z1, z2))

    def den(z1, z2):
        _, g = e_g(z1, z2)
        return g * g * pdf((z1, z2))

    def r2_of(z1):
        return r2[0], min(r2[1], cut(z1))

    return -_dbl(num, r1, r2_of) / _dbl(den, r1, r2_of)


def risk(name, params, target, c0, companion, alpha, lam):
    """Exact risk of a mixed estimator at gap lam by 2-D quadrature."""
    pdf, r1, r2 = _joint(name, params)
    location = name in LOC_FAMILIES
    k1, k2 = (c0, companion) if target == "theta1" else (companion, c0)
    if location:
        t = 0.0 if target == "theta1" else lam

        def d(z1, z2):
            return z1 - k1, lam + z2 - k2
        norm = 1.0
    else:
        t = 1.0 if target == "theta1" else lam

        def d(z1, z2):
            return k1 * z1, k2 * lam * z2
        norm = t

    def loss(z1, z2):
        d1, d2 = d(z1, z2)
        keep = d1 if target == "theta1" else d2
        est = keep if d1 <= d2 else alpha * d1 + (1 - alpha) * d2
        return ((est - t) / norm) ** 2 * pdf((z1, z2))

    return _dbl(loss, r1, lambda z1: r2)


def gamma_theta2_display(a1, a2):
    """alpha_2 at lambda = 1 in the reduced one-dimensional form (mpmath)."""
    import mpmath as mp
    k = mp.mpf(a1 + 1) / (a2 + 1)

    def g(t, p):
        return (1 / t - 1) ** p * (1 + k / t) ** (-(a1 + a2 + 2)) * t ** (-(a1 + 1))
    ratio = mp.quad(lambda t: g(t, 1), [0, 1]) / mp.quad(lambda t: g(t, 2), [0, 1])
    return float((a1 + 1 + ratio) / (a1 + a2 + 1))


def power_theta2_display(a2, lam):
    """alpha_2(lambda) for the power model at its designated beta."""
    num = integrate.quad(lambda t: (1 - t) * (lam - t) * t ** (a2 - 1), 0, 1)[0]
    den = integrate.quad(lambda t: (1 - t) ** 2 * t ** (a2 - 1), 0, 1)[0]
    return num / den


def bsee_gamma_risk(a1):
    return 1.0 / (a1 + 1.0)


def normal_beta0(s1, s2, r):
    return s2 * (s2 - r * s1) / (s1 * s1 + s2 * s2 - 2 * r * s1 * s2)


def isclose(a, b, tol):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
