"""Bivariate location and scale models and the functions derived from them.

A model is a pivot density ``f`` on a support rectangle plus the parameter
pair theta.  For the location kind X = theta + Z, for the scale kind
X = theta * Z (componentwise).  Everything the estimators need goes through
the law of the pivot Z = Z2 - Z1 (location) or Z = Z2 / Z1 (scale) and the
conditional moments psi_r(z) = E[Z1^r | Z = z].
"""
from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import rng
from .errors import (InvalidParameter, ModelFileError, MomentDivergence, NonPositiveTheta,
                     OutOfSupport, QuadratureFailure, UnsupportedFamily)
from .quadrature import integrate, integrate_many, peak_hint

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

INF = math.inf


class Kind(str, enum.Enum):
    LOCATION = "location"
    SCALE = "scale"


class Target(str, enum.Enum):
    THETA1 = "theta1"
    THETA2 = "theta2"

    @property
    def index(self) -> int:
        return 1 if self is Target.THETA1 else 2


def _positive(name, v):
    v = float(v)
    if not (v > 0.0 and math.isfinite(v)):
        raise InvalidParameter(f"{name} must be positive and finite, got {v!r}")
    return v


class Family:
    """Pivot law.  Subclasses with closed forms set ``closed_form = True``."""

    name = "family"
    kind: Kind
    closed_form = False
    support: tuple = ((-INF, INF), (-INF, INF))
    extra_breakpoints: tuple = ()

    params: tuple = ()

    def pdf(self, z1, z2):
        raise NotImplementedError

    def log_pdf(self, z1, z2):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(z1, z2))

    def sample_pivots(self, gen, n):
        raise UnsupportedFamily(f"{self.name}: no sampler available")

    def moments(self):
        """(E Z1, E Z1^2, E Z2, E Z2^2) when known in closed form."""
        return None

    # -- closed-form hooks (only on built-ins) --
    def log_fz(self, z):
        raise NotImplementedError

    def psi1(self, z):
        raise NotImplementedError

    def psi2(self, z):
        raise NotImplementedError

    # -- geometry --
    @property
    def z_support(self) -> tuple[float, float]:
        (lo1, hi1), (lo2, hi2) = self.support
        if self.kind is Kind.LOCATION:
            return lo2 - hi1, hi2 - lo1
        lo = 0.0 if (lo2 == 0.0 or hi1 == INF) else lo2 / hi1
        hi = INF if (lo1 == 0.0 or hi2 == INF) else hi2 / lo1
        return lo, hi

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where f_Z or psi_r may fail to be smooth."""
        (lo1, hi1), (lo2, hi2) = self.support
        zl, zh = self.z_support
        cands = list(self.extra_breakpoints)
        with np.errstate(all="ignore"):
            if self.kind is Kind.LOCATION:
                cands += [lo2 - lo1, hi2 - hi1]
            else:
                if lo1 > 0 and lo2 > 0:
                    cands.append(lo2 / lo1)
                if math.isfinite(hi1) and math.isfinite(hi2):
                    cands.append(hi2 / hi1)
        return tuple(sorted({float(c) for c in cands if math.isfinite(c) and zl < c < zh}))

    def describe(self) -> dict:
        return {"family": self.name, "params": list(self.params)}


@dataclass(frozen=True)
class BivariateNormal(Family):
    s1: float
    s2: float
    rho: float
    name = "bivariate_normal"
    kind = Kind.LOCATION
    closed_form = True

    def __post_init__(self):
        _positive("sigma1", self.s1)
        _positive("sigma2", self.s2)
        if not -1.0 < float(self.rho) < 1.0:
            raise InvalidParameter(f"rho must lie in (-1, 1), got {self.rho!r}")

    @property
    def params(self):
        return (self.s1, self.s2, self.rho)

    @property
    def tau2(self):
        return self.s1 ** 2 + self.s2 ** 2 - 2.0 * self.rho * self.s1 * self.s2

    def pdf(self, z1, z2):
        u1 = np.asarray(z1, float) / self.s1
        u2 = np.asarray(z2, float) / self.s2
        r = self.rho
        q = (u1 * u1 - 2.0 * r * u1 * u2 + u2 * u2) / (1.0 - r * r)
        return np.exp(-0.5 * q) / (2.0 * math.pi * self.s1 * self.s2 * math.sqrt(1.0 - r * r))

    def log_pdf(self, z1, z2):
        u1 = np.asarray(z1, float) / self.s1
        u2 = np.asarray(z2, float) / self.s2
        r = self.rho
        q = (u1 * u1 - 2.0 * r * u1 * u2 + u2 * u2) / (1.0 - r * r)
        return -0.5 * q - math.log(2.0 * math.pi * self.s1 * self.s2 * math.sqrt(1.0 - r * r))

    def log_fz(self, z):
        z = np.asarray(z, float)
        return -0.5 * z * z / self.tau2 - 0.5 * math.log(2.0 * math.pi * self.tau2)

    def psi1(self, z):
        return self.s1 * (self.rho * self.s2 - self.s1) * np.asarray(z, float) / self.tau2

    def psi2(self, z):
        return np.asarray(z, float) + self.psi1(z)

    def moments(self):
        return 0.0, self.s1 ** 2, 0.0, self.s2 ** 2

    def sample_pivots(self, gen, n):
        e1 = rng.std_normals(gen, n)
        e2 = rng.std_normals(gen, n)
        return self.s1 * e1, self.s2 * (self.rho * e1 + math.sqrt(1.0 - self.rho ** 2) * e2)


@dataclass(frozen=True)
class ExponentialLocation(Family):
    s1: float
    s2: float
    name = "exponential"
    kind = Kind.LOCATION
    closed_form = True
    support = ((0.0, INF), (0.0, INF))

    def __post_init__(self):
        _positive("sigma1", self.s1)
        _positive("sigma2", self.s2)

    @property
    def params(self):
        return (self.s1, self.s2)

    def pdf(self, z1, z2):
        z1 = np.asarray(z1, float)
        z2 = np.asarray(z2, float)
        inside = (z1 >= 0) & (z2 >= 0)
        with np.errstate(over="ignore"):
            v = np.exp(-z1 / self.s1 - z2 / self.s2) / (self.s1 * self.s2)
        return np.where(inside, v, 0.0)

    def log_pdf(self, z1, z2):
        z1 = np.asarray(z1, float)
        z2 = np.asarray(z2, float)
        v = -z1 / self.s1 - z2 / self.s2 - math.log(self.s1 * self.s2)
        return np.where((z1 >= 0) & (z2 >= 0), v, -INF)

    def log_fz(self, z):
        z = np.asarray(z, float)
        return np.where(z < 0, z / self.s1, -z / self.s2) - math.log(self.s1 + self.s2)

    def psi1(self, z):
        z = np.asarray(z, float)
        return np.maximum(-z, 0.0) + self.s1 * self.s2 / (self.s1 + self.s2)

    def psi2(self, z):
        return np.asarray(z, float) + self.psi1(z)

    def moments(self):
        return self.s1, 2.0 * self.s1 ** 2, self.s2, 2.0 * self.s2 ** 2

    def sample_pivots(self, gen, n):
        return self.s1 * rng.std_exponentials(gen, n), self.s2 * rng.std_exponentials(gen, n)


@dataclass(frozen=True)
class GammaScale(Family):
    a1: float
    a2: float
    name = "gamma"
    kind = Kind.SCALE
    closed_form = True
    support = ((0.0, INF), (0.0, INF))

    def __post_init__(self):
        _positive("a1", self.a1)
        _positive("a2", self.a2)

    @property
    def params(self):
        return (self.a1, self.a2)

    def pdf(self, z1, z2):
        z1 = np.asarray(z1, float)
        z2 = np.asarray(z2, float)
        inside = (z1 > 0) & (z2 > 0)
        s1 = np.where(inside, z1, 1.0)
        s2 = np.where(inside, z2, 1.0)
        lg = ((self.a1 - 1) * np.log(s1) - s1 + (self.a2 - 1) * np.log(s2) - s2
              - math.lgamma(self.a1) - math.lgamma(self.a2))
        return np.where(inside, np.exp(lg), 0.0)

    def log_pdf(self, z1, z2):
        z1 = np.asarray(z1, float)
        z2 = np.asarray(z2, float)
        inside = (z1 > 0) & (z2 > 0)
        s1 = np.where(inside, z1, 1.0)
        s2 = np.where(inside, z2, 1.0)
        lg = ((self.a1 - 1) * np.log(s1) - s1 + (self.a2 - 1) * np.log(s2) - s2
              - math.lgamma(self.a1) - math.lgamma(self.a2))
        return np.where(inside, lg, -INF)

    def log_fz(self, z):
        z = np.asarray(z, float)
        A = self.a1 + self.a2
        with np.errstate(divide="ignore", invalid="ignore"):
            v = (math.lgamma(A) - math.lgamma(self.a1) - math.lgamma(self.a2)
                 + (self.a2 - 1) * np.log(z) - A * np.log1p(z))
        return np.where(z > 0, v, -INF)

    def psi1(self, z):
        return (self.a1 + self.a2) / (1.0 + np.asarray(z, float))

    def psi2(self, z):
        A = self.a1 + self.a2
        return A * (A + 1.0) / (1.0 + np.asarray(z, float)) ** 2

    def moments(self):
        return self.a1, self.a1 * (self.a1 + 1), self.a2, self.a2 * (self.a2 + 1)

    def sample_pivots(self, gen, n):
        return rng.std_gammas(gen, self.a1, n), rng.std_gammas(gen, self.a2, n)


@dataclass(frozen=True)
class PowerScale(Family):
    a1: float
    a2: float
    name = "power"
    kind = Kind.SCALE
    closed_form = True
    support = ((0.0, 1.0), (0.0, 1.0))

    def __post_init__(self):
        _positive("a1", self.a1)
        _positive("a2", self.a2)

    @property
    def params(self):
        return (self.a1, self.a2)

    def pdf(self, z1, z2):
        z1 = np.asarray(z1, float)
        z2 = np.asarray(z2, float)
        inside = (z1 > 0) & (z1 < 1) & (z2 > 0) & (z2 < 1)
        s1 = np.where(inside, z1, 0.5)
        s2 = np.where(inside, z2, 0.5)
        v = self.a1 * self.a2 * s1 ** (self.a1 - 1) * s2 ** (self.a2 - 1)
        return np.where(inside, v, 0.0)

    def log_pdf(self, z1, z2):
        z1 = np.asarray(z1, float)
        z2 = np.asarray(z2, float)
        inside = (z1 > 0) & (z1 < 1) & (z2 > 0) & (z2 < 1)
        s1 = np.where(inside, z1, 0.5)
        s2 = np.where(inside, z2, 0.5)
        v = math.log(self.a1 * self.a2) + (self.a1 - 1) * np.log(s1) + (self.a2 - 1) * np.log(s2)
        return np.where(inside, v, -INF)

    def log_fz(self, z):
        z = np.asarray(z, float)
        A = self.a1 + self.a2
        with np.errstate(divide="ignore", invalid="ignore"):
            lz = np.log(z)
            v = math.log(self.a1 * self.a2 / A) + (self.a2 - 1) * lz - A * np.maximum(lz, 0.0)
        return np.where(z > 0, v, -INF)

    def psi1(self, z):
        A = self.a1 + self.a2
        return A / (A + 1.0) * np.minimum(1.0, 1.0 / np.asarray(z, float))

    def psi2(self, z):
        A = self.a1 + self.a2
        return A / (A + 2.0) * np.minimum(1.0, 1.0 / np.asarray(z, float)) ** 2

    def moments(self):
        a1, a2 = self.a1, self.a2
        return a1 / (a1 + 1), a1 / (a1 + 2), a2 / (a2 + 1), a2 / (a2 + 2)

    def sample_pivots(self, gen, n):
        return rng.power_variates(gen, self.a1, n), rng.power_variates(gen, self.a2, n)


@dataclass(frozen=True, eq=False)
class CustomDensity(Family):
    """User-supplied pivot density.

    ``pdf(z1, z2)`` must be vectorised and vanish off ``support``.  The
    density is checked to integrate to one; ``sampler(gen, n)`` returning
    ``(z1, z2)`` is needed only for Monte Carlo.
    """

    pdf_fn: Callable
    kind: Kind
    support: tuple = ((-INF, INF), (-INF, INF))
    sampler: Callable | None = None
    extra_breakpoints: tuple = ()
    name: str = "custom"
    check_normalised: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        sup = tuple((float(lo), float(hi)) for lo, hi in self.support)
        if len(sup) != 2 or any(not lo < hi for lo, hi in sup):
            raise InvalidParameter(f"bad support rectangle {self.support!r}")
        if self.kind is Kind.SCALE and any(lo < 0 for lo, _ in sup):
            raise InvalidParameter("a scale-family support must lie in the positive quadrant")
        object.__setattr__(self, "support", sup)
        if self.check_normalised:
            total = _marginal_moment(self, 0, 0)
            if abs(total - 1.0) > 1e-6:
                raise InvalidParameter(f"density integrates to {total:.9g}, not 1")

    @property
    def params(self):
        return ()

    def pdf(self, z1, z2):
        return np.asarray(self.pdf_fn(np.asarray(z1, float), np.asarray(z2, float)), float)

    def sample_pivots(self, gen, n):
        if self.sampler is None:
            raise UnsupportedFamily(f"{self.name}: no sampler supplied")
        z1, z2 = self.sampler(gen, n)
        return np.asarray(z1, float), np.asarray(z2, float)


@dataclass(frozen=True)
class ModelSpec:
    kind: Kind
    family: Family
    theta: tuple = (0.0, 0.0)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is not self.family.kind:
            raise UnsupportedFamily(f"family {self.family.name} is a {self.family.kind.value} family")
        th = tuple(float(t) for t in self.theta)
        if len(th) != 2 or not all(math.isfinite(t) for t in th):
            raise InvalidParameter(f"theta must be two finite numbers, got {self.theta!r}")
        if kind is Kind.SCALE and min(th) <= 0:
            raise NonPositiveTheta(f"scale parameters must be positive, got {th}")
        object.__setattr__(self, "theta", th)

    def with_theta(self, theta) -> "ModelSpec":
        return ModelSpec(self.kind, self.family, tuple(theta))

    def to_mapping(self) -> dict:
        return {"kind": self.kind.value, "family": self.family.name,
                "params": [float(p) for p in self.family.params], "theta": list(self.theta)}


def bivariate_normal(s1, s2, rho, theta=(0.0, 0.0)):
    return ModelSpec(Kind.LOCATION, BivariateNormal(float(s1), float(s2), float(rho)), theta)


def exponential_location(s1, s2, theta=(0.0, 0.0)):
    return ModelSpec(Kind.LOCATION, ExponentialLocation(float(s1), float(s2)), theta)


def gamma_scale(a1, a2, theta=(1.0, 1.0)):
    return ModelSpec(Kind.SCALE, GammaScale(float(a1), float(a2)), theta)


def power_scale(a1, a2, theta=(1.0, 1.0)):
    return ModelSpec(Kind.SCALE, PowerScale(float(a1), float(a2)), theta)


_FAMILIES = {
    "bivariate_normal": (BivariateNormal, 3, Kind.LOCATION),
    "exponential": (ExponentialLocation, 2, Kind.LOCATION),
    "gamma": (GammaScale, 2, Kind.SCALE),
    "power": (PowerScale, 2, Kind.SCALE),
}
_ALIASES = {"normal": "bivariate_normal", "bvn": "bivariate_normal",
            "exponential_location": "exponential", "exp": "exponential",
            "gamma_scale": "gamma", "power_scale": "power"}
_MODEL_KEYS = {"kind", "family", "params", "theta"}


def family_name(name: str) -> str:
    key = str(name).strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in _FAMILIES:
        raise UnsupportedFamily(f"unknown family {name!r}; custom densities are built in Python")
    return key


def model_from_mapping(d: dict) -> ModelSpec:
    extra = set(d) - _MODEL_KEYS
    if extra:
        raise ModelFileError(f"unknown model keys: {sorted(extra)}")
    missing = {"kind", "family", "params"} - set(d)
    if missing:
        raise ModelFileError(f"missing model keys: {sorted(missing)}")
    try:
        kind = Kind(str(d["kind"]).lower())
    except ValueError:
        raise ModelFileError(f"kind must be 'location' or 'scale', got {d['kind']!r}") from None
    cls, arity, fkind = _FAMILIES[family_name(d["family"])]
    params = d["params"]
    if not isinstance(params, (list, tuple)) or len(params) != arity:
        raise ModelFileError(f"family {cls.name} takes {arity} params, got {params!r}")
    if fkind is not kind:
        raise ModelFileError(f"family {cls.name} is a {fkind.value} family, not {kind.value}")
    theta = d.get("theta", (0.0, 0.0) if kind is Kind.LOCATION else (1.0, 1.0))
    if not isinstance(theta, (list, tuple)) or len(theta) != 2:
        raise ModelFileError(f"theta must be an array of two numbers, got {theta!r}")
    try:
        fam = cls(*(float(p) for p in params))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise ModelFileError(str(exc)) from None
    return ModelSpec(kind, fam, tuple(theta))


def load_model(path) -> ModelSpec:
    with open(path, "rb") as fh:
        try:
            d = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ModelFileError(f"{path}: {exc}") from None
    return model_from_mapping(d)


# ---------------------------------------------------------------------------
# densities and sampling

def density(model: ModelSpec, x) -> np.ndarray:
    """Joint density of X at points ``x`` (shape (..., 2))."""
    x = np.asarray(x, float)
    t1, t2 = model.theta
    if model.kind is Kind.LOCATION:
        return model.family.pdf(x[..., 0] - t1, x[..., 1] - t2)
    if np.any(x <= 0):
        raise OutOfSupport("scale-model density needs points in the positive quadrant")
    return model.family.pdf(x[..., 0] / t1, x[..., 1] / t2) / (t1 * t2)


def to_observations(model: ModelSpec, z1, z2):
    t1, t2 = model.theta
    if model.kind is Kind.LOCATION:
        return t1 + z1, t2 + z2
    return t1 * z1, t2 * z2


def sample(model: ModelSpec, n: int, seed: int = rng.DEFAULT_SEED) -> np.ndarray:
    """``n`` draws of X as an (n, 2) array; reproducible for a given seed."""
    out = np.empty((int(n), 2))
    for blk, start in enumerate(range(0, int(n), rng.BLOCK)):
        m = min(rng.BLOCK, int(n) - start)
        gen = rng.stream(seed, rng.SAMPLE, 0, blk)
        z1, z2 = model.family.sample_pivots(gen, m)
        out[start:start + m, 0], out[start:start + m, 1] = to_observations(model, z1, z2)
    return out


# ---------------------------------------------------------------------------
# quadrature route for the pivot law

_LOG_NEGLIGIBLE = -800.0


def conditional_integrals(fam: Family, z, fn, rtol: float = 1e-11):
    """Integrals along the line {Z = z} for each z.

    Location:  int fn(s, z) f(s, s + z) ds.   Scale:  int fn(s, z) f(s, s z) s ds.
    ``fn(s, z)`` may return a trailing axis of components; the result has
    shape (len(z), p).
    """
    z = np.atleast_1d(np.asarray(z, float))
    (lo1, hi1), (lo2, hi2) = fam.support
    if fam.kind is Kind.LOCATION:
        a = np.maximum(lo1, lo2 - z)
        b = np.minimum(hi1, hi2 - z)

        def logj(s, zz):
            return fam.log_pdf(s, s + zz)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.maximum(lo1, np.where(z > 0, lo2 / z, INF))
            b = np.minimum(hi1, np.where(z > 0, hi2 / z, -INF))

        def logj(s, zz):
            with np.errstate(divide="ignore"):
                return fam.log_pdf(s, s * zz) + np.log(np.abs(s))
    probe = np.asarray(fn(np.ones((1, 1)), np.ones((1, 1))), float)
    p = probe.shape[-1] if probe.ndim == 3 else 1
    out = np.zeros((z.size, p))
    ok = a < b
    if not ok.any():
        return out
    zi, ai, bi = z[ok], a[ok], b[ok]
    peak, width, top = peak_hint(lambda s: logj(s, zi[:, None]), ai, bi, with_top=True)
    # below this the row's value underflows to zero whatever the integral of exp(logj - top)
    live = top > _LOG_NEGLIGIBLE
    if not live.any():
        return out
    zi, ai, bi, peak, width, top = (v[live] for v in (zi, ai, bi, peak, width, top))
    scale = np.where(np.isfinite(ai), np.maximum(peak - ai, width),
                     np.where(np.isfinite(bi), np.maximum(bi - peak, width), width))

    def g(s, idx):
        zz = zi[idx][:, None]
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            v = np.exp(logj(s, zz) - top[idx][:, None])
        w = np.asarray(fn(s, zz), float)
        if w.ndim == 2:
            w = w[..., None]
        v = v[..., None]
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(v > 0, v * w, 0.0)

    vals = integrate_many(g, ai, bi, rtol=rtol, atol=0.0, scale=scale, center=peak)
    rows = np.flatnonzero(ok)[live]
    with np.errstate(under="ignore"):
        out[rows] = vals * np.exp(top)[:, None]
    return out


def _nested_rows(fam: Family, z, powers):
    """int s^r f_(s | line) ds for r in ``powers``; see conditional_integrals."""
    pw = np.asarray(powers, float)

    def fn(s, zz):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.abs(s)[..., None] ** pw if fam.kind is Kind.SCALE else s[..., None] ** pw
    return conditional_integrals(fam, z, fn)


def _marginal_moment(fam: Family, comp: int, r: int) -> float:
    """E[Z_comp^r] by nested quadrature (comp 0 or 1)."""
    (lo1, hi1), (lo2, hi2) = fam.support
    if comp == 0:
        olo, ohi, ilo, ihi = lo1, hi1, lo2, hi2

        def joint(o, i):
            return fam.pdf(o, i)
    else:
        olo, ohi, ilo, ihi = lo2, hi2, lo1, hi1

        def joint(o, i):
            return fam.pdf(i, o)

    def marg(o):
        o = np.asarray(o, float)
        flat = o.reshape(-1)
        m = flat.size
        a = np.full(m, ilo)
        b = np.full(m, ihi)
        peak, width = peak_hint(lambda s: np.log(np.maximum(joint(flat[:, None], s), 1e-300)), a, b)
        scale = np.where(np.isfinite(a), np.maximum(peak - a, width), width)
        v = integrate_many(lambda s, idx: joint(flat[idx][:, None], s), a, b, rtol=1e-10,
                           atol=1e-300, scale=scale, center=peak)
        return v.reshape(o.shape)

    probe_lo = olo if math.isfinite(olo) else -1.0
    pk, wd = peak_hint(lambda s: np.log(np.maximum(marg(s), 1e-300)), np.array([olo]), np.array([ohi]))
    sc = max(float(pk[0]) - probe_lo, float(wd[0])) if math.isfinite(olo) else float(wd[0])
    # cheap tail test first: |o|^(r+1) * marginal must decay for the moment to exist
    for sign, end in ((1.0, ohi), (-1.0, olo)):
        if math.isfinite(end):
            continue
        far = float(pk[0]) + sign * np.array([1e5, 1e7]) * max(sc, 1.0)
        g = np.abs(far) ** (r + 1) * marg(far)
        if g[1] > 1e-12 and g[1] >= 0.5 * g[0]:
            raise MomentDivergence(f"E[Z{comp + 1}^{r}] diverges: tail decays too slowly")
    try:
        val = integrate(lambda o: marg(o) * (o ** r if r else 1.0), olo, ohi, rtol=1e-9,
                        atol=1e-13, scale=sc, center=float(pk[0]))
    except QuadratureFailure as exc:
        raise MomentDivergence(f"E[Z{comp + 1}^{r}] did not converge: {exc}") from None
    if not math.isfinite(val):
        raise MomentDivergence(f"E[Z{comp + 1}^{r}] is not finite")
    return val


# ---------------------------------------------------------------------------
# derived functions

@dataclass(frozen=True, eq=False)
class DerivedFunctions:
    """f_Z and the conditional moments psi_r for one family.

    The scale-kind quantities follow the usual convention
    psi3 = z psi1, psi4 = z^2 psi2, psi = psi1/psi2, psi_star = psi3/psi4.
    Location models use psi2(z) = z + psi1(z) instead.
    """

    kind: Kind
    source: str
    z_support: tuple
    breakpoints: tuple
    _log_fz: Callable = field(repr=False)
    _psi1: Callable = field(repr=False)
    _psi2: Callable = field(repr=False)

    def _check(self, z):
        z = np.asarray(z, float)
        lo, hi = self.z_support
        bad = ~(z >= lo) | (z > hi)
        if self.kind is Kind.SCALE:
            bad |= z <= 0
        if np.any(bad):
            raise OutOfSupport(f"z outside the support ({lo}, {hi}) of Z")
        return z

    def log_fz(self, z):
        z = np.asarray(z, float)
        lo, hi = self.z_support
        inside = (z > lo) & (z < hi) if self.kind is Kind.SCALE else (z >= lo) & (z <= hi)
        safe = np.where(inside, z, 0.5 * (lo + hi) if math.isfinite(lo + hi) else
                        (lo + 1.0 if math.isfinite(lo) else (hi - 1.0 if math.isfinite(hi) else 0.0)))
        return np.where(inside, self._log_fz(safe), -INF)

    def fz(self, z):
        return np.exp(self.log_fz(z))

    def psi1(self, z, check=True):
        return self._psi1(self._check(z) if check else np.asarray(z, float))

    def psi2(self, z, check=True):
        if self.kind is Kind.LOCATION:
            z = self._check(z) if check else np.asarray(z, float)
            return z + self._psi1(z)
        return self._psi2(self._check(z) if check else np.asarray(z, float))

    def psi3(self, z, check=True):
        z = self._check(z) if check else np.asarray(z, float)
        return z * self.psi1(z, check=False)

    def psi4(self, z, check=True):
        z = self._check(z) if check else np.asarray(z, float)
        return z * z * self.psi2(z, check=False)

    def psi(self, z, check=True):
        z = self._check(z) if check else np.asarray(z, float)
        return self.psi1(z, check=False) / self.psi2(z, check=False)

    def psi_star(self, z, check=True):
        z = self._check(z) if check else np.asarray(z, float)
        # psi3/psi4 with one factor of z cancelled, so tiny z does not underflow
        return self.psi1(z, check=False) / (z * self.psi2(z, check=False))


@lru_cache(maxsize=64)
def _derived(fam: Family, source: str) -> DerivedFunctions:
    if source == "closed-form":
        if not fam.closed_form:
            raise UnsupportedFamily(f"{fam.name} has no closed forms")
        return DerivedFunctions(fam.kind, source, fam.z_support, fam.breakpoints,
                                fam.log_fz, fam.psi1, fam.psi2)

    def rows(z):
        z = np.asarray(z, float)
        flat = z.reshape(-1)
        r = _nested_rows(fam, flat, (0, 1, 2))
        return z.shape, r

    def log_fz(z):
        shape, r = rows(z)
        with np.errstate(divide="ignore"):
            return np.log(r[:, 0]).reshape(shape)

    def psi1(z):
        shape, r = rows(z)
        with np.errstate(all="ignore"):
            return (r[:, 1] / r[:, 0]).reshape(shape)

    def psi2(z):
        shape, r = rows(z)
        with np.errstate(all="ignore"):
            return (r[:, 2] / r[:, 0]).reshape(shape)
    return DerivedFunctions(fam.kind, "quadrature", fam.z_support, fam.breakpoints, log_fz, psi1, psi2)


def derived_functions(model: ModelSpec, source: str = "auto") -> DerivedFunctions:
    """Derived functions of the pivot law; ``source`` is auto, closed-form or quadrature."""
    fam = model.family
    if source == "auto":
        source = "closed-form" if fam.closed_form else "quadrature"
    if source not in ("closed-form", "quadrature"):
        raise ValueError(f"unknown source {source!r}")
    return _derived(fam, source)


def fz_density(model: ModelSpec, z) -> np.ndarray:
    """Density of Z; zero off its support."""
    return derived_functions(model).fz(z)


@lru_cache(maxsize=64)
def _constants(fam: Family, source: str):
    if source == "closed-form":
        m = fam.moments()
    else:
        m = (_marginal_moment(fam, 0, 1), _marginal_moment(fam, 0, 2),
             _marginal_moment(fam, 1, 1), _marginal_moment(fam, 1, 2))
    e1, e1s, e2, e2s = m
    if fam.kind is Kind.LOCATION:
        return float(e1), float(e2)
    return float(e1 / e1s), float(e2 / e2s)


def blee_bsee_constants(model: ModelSpec, source: str = "auto") -> tuple[float, float]:
    """(c01, c02): E[Z_i] for location, E[Z_i]/E[Z_i^2] for scale."""
    fam = model.family
    if source == "auto":
        source = "closed-form" if fam.closed_form else "quadrature"
    return _constants(fam, source)
