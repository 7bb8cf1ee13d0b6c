"""Risk-minimising pooling weights alpha(lambda) and the intervals they span.

For fixed lambda the risk of a mixed estimator is a quadratic in alpha; its
minimiser is a ratio of two integrals over the pooling region of the pivot Z.
The weights are evaluated on log scale relative to their peak so that large
lambda (a far tail of f_Z) does not underflow.
"""
from __future__ import annotations

import enum
import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._backend import kernels
from .errors import DegenerateDenominator, HypothesisNotVerified, Inconclusive, QuadratureFailure
from .models import Kind, ModelSpec, Target, blee_bsee_constants, derived_functions, to_observations
from .quadrature import integrate_ratio

RTOL = 1e-10
LIMIT_K_MAX = 40
DIVERGE_AT = 1e6
SETTLE_AT = 1e-5


def lambda_floor(kind: Kind) -> float:
    return 0.0 if kind is Kind.LOCATION else 1.0


def default_grid(kind: Kind, n: int = 30) -> np.ndarray:
    """Log-spaced grid on [0, 10] (location) or [1, 20] (scale)."""
    if kind is Kind.LOCATION:
        return np.geomspace(1.0, 11.0, n) - 1.0
    return np.geomspace(1.0, 20.0, n)


def _check_lambda(kind, lam):
    lam = float(lam)
    if not math.isfinite(lam) or lam < lambda_floor(kind):
        raise ValueError(f"lambda must be >= {lambda_floor(kind)} for {kind.value} models, got {lam}")
    return lam


def _probe_reference(logw, xs):
    with np.errstate(all="ignore"):
        lw = np.asarray(logw(xs), float)
    ok = np.isfinite(lw)
    if not ok.any():
        raise DegenerateDenominator("pooling region carries no probability mass")
    return float(np.max(lw[ok])), xs[ok], lw[ok]


# ---------------------------------------------------------------------------
# location kind

def _location_ratio(model, shift, psi_fn, c):
    """Integrals of (psi(z+s) - c) z f_Z(z+s) and z^2 f_Z(z+s) over z < 0."""
    df = derived_functions(model)
    zlo, zhi = df.z_support
    a = zlo - shift
    b = min(0.0, zhi - shift)
    if not a < b:
        raise DegenerateDenominator("P(Z in pooling region) = 0")
    pts = [p - shift for p in df.breakpoints if a < p - shift < b]

    def logw(z):
        return df.log_fz(z + shift)

    d = np.geomspace(1e-9, 1e9, 109)
    xs = b - d
    xs = xs[xs > a] if math.isfinite(a) else xs
    if xs.size == 0:
        xs = np.array([0.5 * (a + b)])
    ref, px, plw = _probe_reference(logw, xs)
    with np.errstate(divide="ignore"):
        mass = plw + 2.0 * np.log(np.abs(px))
    scale = max(b - float(px[np.argmax(mass)]), 1e-12)

    def g(z):
        w = z + shift
        with np.errstate(all="ignore"):
            wt = np.exp(logw(z) - ref)
            num = (psi_fn(w, check=False) - c) * z * wt
        num = np.where(wt > 0, num, 0.0)
        return np.stack([num, z * z * wt], axis=-1)

    num, den = integrate_ratio(g, a, b, points=pts, rtol=RTOL, scale=scale)
    if not den > 0:
        raise DegenerateDenominator("denominator integral vanished")
    return num, den


def alpha1_star_location(model: ModelSpec, nu: float, lam: float) -> float:
    lam = _check_lambda(model.kind, lam)
    c01, _ = blee_bsee_constants(model)
    df = derived_functions(model)
    num, den = _location_ratio(model, nu - c01 - lam, df.psi1, c01)
    return num / den


def alpha1_location(model: ModelSpec, nu: float, lam: float) -> float:
    """Weight minimising the theta1 risk at lambda = theta2 - theta1."""
    return 1.0 + alpha1_star_location(model, nu, lam)


def alpha2_location(model: ModelSpec, beta: float, lam: float) -> float:
    lam = _check_lambda(model.kind, lam)
    _, c02 = blee_bsee_constants(model)
    df = derived_functions(model)
    num, den = _location_ratio(model, c02 - beta - lam, df.psi2, c02)
    return num / den


# ---------------------------------------------------------------------------
# scale kind

def _scale_ratio(model, m, num_fn, weight_fn, logv):
    """Integrals over t in (0, 1) with u = m t.

    weight_fn is the t-profile, num_fn(t, u) the numerator factor and
    logv(u) the log of the model weight (psi_r f_Z).
    """
    df = derived_functions(model)
    zlo, zhi = df.z_support
    a = max(0.0, zlo / m)
    b = min(1.0, zhi / m)
    if not a < b:
        raise DegenerateDenominator("P(Z in pooling region) = 0")
    pts = [p / m for p in df.breakpoints if a < p / m < b]
    ts = np.unique(np.concatenate([np.geomspace(1e-12, 1.0, 49), [0.5 * (a + b)]]))
    ts = ts[(ts > a) & (ts < b)] if ts.size else ts
    if ts.size == 0:
        ts = np.array([0.5 * (a + b)])
    ref, _, _ = _probe_reference(lambda t: logv(m * t), ts)

    def g(t):
        u = m * t
        with np.errstate(all="ignore"):
            prof = weight_fn(t)
            lp = np.log(np.abs(prof))
            base = logv(u) - ref
            num = np.sign(prof) * num_fn(u) * np.exp(lp + base)
            den = np.exp(2.0 * lp + base)
        live = np.isfinite(base) & (prof != 0)
        num = np.where(live, num, 0.0)
        den = np.where(live, den, 0.0)
        return np.stack([num, den], axis=-1)

    num, den = integrate_ratio(g, a, b, points=pts, rtol=RTOL)
    if not den > 0:
        raise DegenerateDenominator("denominator integral vanished")
    return num, den


def alpha1_star_scale(model: ModelSpec, nu: float, lam: float) -> float:
    lam = _check_lambda(model.kind, lam)
    if not nu > 0:
        raise ValueError("nu must be positive for scale models")
    c01, _ = blee_bsee_constants(model)
    df = derived_functions(model)

    def logv(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            return df.log_fz(u) + np.log(df.psi2(u, check=False))

    num, den = _scale_ratio(model, c01 / (nu * lam),
                            lambda u: df.psi(u, check=False) - c01,
                            lambda t: 1.0 - t, logv)
    return num / den / c01


def alpha1_scale(model: ModelSpec, nu: float, lam: float) -> float:
    """Weight minimising the theta1 risk at lambda = theta2 / theta1."""
    return 1.0 + alpha1_star_scale(model, nu, lam)


def alpha2_scale(model: ModelSpec, beta: float, lam: float) -> float:
    lam = _check_lambda(model.kind, lam)
    if not beta > 0:
        raise ValueError("beta must be positive for scale models")
    _, c02 = blee_bsee_constants(model)
    df = derived_functions(model)

    def logv(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            return df.log_fz(u) + np.log(df.psi2(u, check=False)) + 2.0 * np.log(u)

    num, den = _scale_ratio(model, beta / (lam * c02),
                            lambda u: df.psi_star(u, check=False) - c02,
                            lambda t: 1.0 / t - 1.0, logv)
    return num / den / c02


def alpha_value(model: ModelSpec, target, companion: float, lam: float) -> float:
    target = Target(target)
    if model.kind is Kind.LOCATION:
        fn = alpha1_location if target is Target.THETA1 else alpha2_location
    else:
        fn = alpha1_scale if target is Target.THETA1 else alpha2_scale
    return fn(model, companion, lam)


# ---------------------------------------------------------------------------
# limits, curves, intervals

class LimitKind(str, enum.Enum):
    FINITE = "Finite"
    PLUS_INFINITY = "PlusInfinity"
    MINUS_INFINITY = "MinusInfinity"


@dataclass(frozen=True)
class Limit:
    kind: LimitKind
    value: float  # +-inf for the divergent kinds

    def __str__(self):
        return f"Finite({self.value:.10g})" if self.kind is LimitKind.FINITE else self.kind.value


def infinity_limit(model: ModelSpec, target, companion: float, *, k_max: int = LIMIT_K_MAX) -> Limit:
    """Classify alpha(lambda) as lambda grows, probing lambda = floor + 2^k."""
    base = lambda_floor(model.kind)
    lams, vals = [], []
    for k in range(k_max + 1):
        lam = base + 2.0 ** k
        try:
            v = alpha_value(model, target, companion, lam)
        except (DegenerateDenominator, QuadratureFailure) as exc:
            raise Inconclusive(f"alpha not computable at lambda={lam:g}: {exc}", lams, vals) from None
        lams.append(lam)
        vals.append(v)
        if len(vals) < 4:
            continue
        d = np.diff(vals[-4:])
        if abs(v) > DIVERGE_AT and (np.all(d > 0) or np.all(d < 0)) and abs(d[-1]) >= 0.9 * abs(d[-2]):
            return Limit(LimitKind.PLUS_INFINITY if v > 0 else LimitKind.MINUS_INFINITY,
                         math.inf if v > 0 else -math.inf)
        if abs(d[-1]) < SETTLE_AT and abs(d[-2]) < 10 * SETTLE_AT:
            return Limit(LimitKind.FINITE, _extrapolate(vals))
    raise Inconclusive(f"no convergence or divergence by lambda = 2^{k_max}", lams, vals)


def _extrapolate(vals) -> float:
    """Aitken delta-squared on the last three terms; plain value if unstable."""
    x0, x1, x2 = vals[-3:]
    d1, d2 = x1 - x0, x2 - x1
    denom = d2 - d1
    if denom == 0 or d1 == 0 or not (0 <= d2 / d1 < 0.95):
        return float(x2)
    return float(x2 - d2 * d2 / denom)


@dataclass
class AlphaCurve:
    target: Target
    kind: Kind
    companion: float
    lambda_grid: np.ndarray
    values: np.ndarray
    method: str = "quadrature"
    limit: Limit | None = None

    @property
    def boundary_value(self) -> float:
        return float(self.values[0])

    @property
    def infinity_limit(self) -> Limit | None:
        return self.limit

    def rows(self):
        for lam, a in zip(self.lambda_grid, self.values):
            yield float(lam), float(a), self.method


def alpha_curve(model: ModelSpec, target, companion: float, lambda_grid=None, *,
                with_limit: bool = True, method: str = "quadrature", n: int = 200_000,
                seed: int = rng.DEFAULT_SEED) -> AlphaCurve:
    """alpha(lambda) sampled on a grid whose first point is the boundary lambda.

    With ``method="oracle"`` the values come from the Monte Carlo argmin.
    """
    target = Target(target)
    grid = default_grid(model.kind) if lambda_grid is None else np.asarray(lambda_grid, float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be non-empty and strictly increasing")
    if method == "quadrature":
        vals = np.array([alpha_value(model, target, companion, lam) for lam in grid])
    elif method == "oracle":
        vals = np.array([oracle_best_alpha(model, target, companion, lam, n, seed, cell=i)
                         for i, lam in enumerate(grid)])
    else:
        raise ValueError(f"unknown method {method!r}")
    limit = infinity_limit(model, target, companion) if with_limit else None
    return AlphaCurve(target, model.kind, float(companion), grid, vals, method, limit)


_THEOREM = {(Kind.LOCATION, Target.THETA1): "T311", (Kind.LOCATION, Target.THETA2): "T321",
            (Kind.SCALE, Target.THETA1): "T411", (Kind.SCALE, Target.THETA2): "T421"}


@dataclass
class AdmissibleInterval:
    low: float
    high: float
    direction: str
    theorem: str
    trusted: bool
    boundary_value: float
    limit: Limit
    report: object = field(default=None, repr=False)

    @property
    def dominance_rule(self) -> str:
        return ("any weight outside [low, high] is improved upon by the nearer endpoint; "
                "weights inside are admissible within the class")

    def contains(self, alpha: float) -> bool:
        return self.low <= alpha <= self.high

    def to_dict(self) -> dict:
        def enc(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {"low": enc(self.low), "high": enc(self.high), "direction": self.direction,
                "theorem": self.theorem, "trusted": self.trusted}

    def __str__(self):
        lo = "(-inf" if self.low == -math.inf else f"[{self.low:.6g}"
        hi = "+inf)" if self.high == math.inf else f"{self.high:.6g}]"
        return f"{lo}, {hi}"


def admissible_interval(model: ModelSpec, target, companion: float, report=None) -> AdmissibleInterval:
    """Weight interval spanned by alpha(lambda), oriented by the lemma case.

    Raises Inconclusive if the large-lambda limit cannot be classified; warns
    HypothesisNotVerified (and marks the result untrusted) when the lemma
    hypotheses are not certified on the grid.
    """
    from .assumptions import classify_lemma_case

    target = Target(target)
    if report is None:
        report = classify_lemma_case(model, target, companion)
    boundary = alpha_value(model, target, companion, lambda_floor(model.kind))
    limit = infinity_limit(model, target, companion)
    lo, hi = sorted((boundary, limit.value))
    case = report.lemma_case
    trusted = case in ("CaseA", "CaseB")
    if not trusted:
        warnings.warn("lemma hypotheses not certified; interval is untrusted", HypothesisNotVerified,
                      stacklevel=2)
    if limit.kind is LimitKind.FINITE and abs(limit.value - boundary) <= 1e-7 * max(1.0, abs(boundary)):
        direction = "Constant"
        lo = hi = boundary
    elif trusted:
        direction = "Increasing" if case == "CaseA" else "Decreasing"
    else:
        direction = "Increasing" if limit.value > boundary else "Decreasing"
    part = "a" if (case == "CaseA" or (not trusted and direction != "Decreasing")) else "b"
    return AdmissibleInterval(lo, hi, direction, _THEOREM[(model.kind, target)] + part, trusted,
                              boundary, limit, report)


# ---------------------------------------------------------------------------
# Monte Carlo oracle

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _lambda_key(lam: float) -> int:
    return int.from_bytes(struct.pack("<d", float(lam)), "little")


def oracle_best_alpha(model: ModelSpec, target, companion: float, lam: float, n: int = 200_000,
                      seed: int = rng.DEFAULT_SEED, *, cell: int | None = None, tol: float = 1e-5) -> float:
    """Golden-section argmin over alpha of the simulated risk (common draws)."""
    target = Target(target)
    lam = _check_lambda(model.kind, lam)
    if n < 10_000:
        raise ValueError("oracle needs n >= 1e4")
    key = _lambda_key(lam) if cell is None else int(cell)
    th = (0.0, lam) if model.kind is Kind.LOCATION else (1.0, lam)
    m = model.with_theta(th)
    x1 = np.empty(n)
    x2 = np.empty(n)
    for blk, start in enumerate(range(0, n, rng.BLOCK)):
        cnt = min(rng.BLOCK, n - start)
        z1, z2 = model.family.sample_pivots(rng.stream(seed, rng.ORACLE, key, blk), cnt)
        x1[start:start + cnt], x2[start:start + cnt] = to_observations(m, z1, z2)
    c01, c02 = blee_bsee_constants(model)
    c0 = c01 if target is Target.THETA1 else c02
    t_idx = 1 if target is Target.THETA1 else 2
    goal = th[t_idx - 1]
    is_scale = model.kind is Kind.SCALE

    # risk is flat in alpha unless some draws land in the pooling region
    d_t, d_c = (c0 * x1, companion * x2) if t_idx == 1 else (companion * x1, c0 * x2)
    if not is_scale:
        d_t, d_c = (x1 - c0, x2 - companion) if t_idx == 1 else (x1 - companion, x2 - c0)
    pooled = int(np.count_nonzero(d_t > d_c))
    if pooled < 10:
        raise DegenerateDenominator(f"only {pooled} of {n} draws fall in the pooling region")

    def risk(a):
        loss = kernels.mixed_loss(x1, x2, t_idx, is_scale, c0, float(companion), float(a), goal)
        return kernels.mean_and_m2(loss)[0]

    lo, hi = -5.0, 5.0
    for _ in range(12):
        best = _golden(risk, lo, hi, tol)
        width = hi - lo
        if best - lo < 1e-3 * width:
            lo -= width
        elif hi - best < 1e-3 * width:
            hi += width
        else:
            return best
    return best


def _golden(f, lo, hi, tol):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)
