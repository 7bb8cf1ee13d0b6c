"""Grid checks of the shape and monotonicity hypotheses behind the alpha-curve monotonicity.

Everything here is numerical certification on a finite grid (default 512
points, slack 1e-9 relative), not proof.  Each check keeps both one-sided
verdicts internally, so a constant function counts as both increasing and
decreasing; public enums then apply the tie rule "report Increasing"
(and "report LogConcave" for log-linear densities).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfSupport, ZeroDensity
from .models import Kind, ModelSpec, Target, blee_bsee_constants, derived_functions

GRID = 512
SLACK = 1e-9
RATIO_THETAS = (0.25, 0.5, 0.75)
LOCATION_PROBES = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)


class Shape(str, enum.Enum):
    LOG_CONCAVE = "LogConcave"
    LOG_CONVEX = "LogConvex"
    NEITHER = "Neither"


class Direction(str, enum.Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    NEITHER = "Neither"


def default_probes(kind: Kind):
    shift = 0.0 if kind is Kind.LOCATION else 1.0
    return tuple(p + shift for p in LOCATION_PROBES)


def grid(interval, n: int = GRID, scale: float = 1.0) -> np.ndarray:
    """Interior grid; an infinite end is reached through the exp-sinh map."""
    lo, hi = (float(v) for v in interval)
    if not lo < hi:
        raise ValueError(f"empty interval {interval!r}")
    if n < 16:
        raise ValueError("grid needs at least 16 points")
    t = np.linspace(-2.0, 2.0, n)
    reach = scale * np.exp(0.5 * math.pi * np.sinh(t))
    if math.isfinite(lo) and math.isfinite(hi):
        return np.linspace(lo, hi, n + 2)[1:-1]
    if math.isfinite(hi):
        return np.sort(hi - reach)
    if math.isfinite(lo):
        return lo + reach
    return scale * np.sinh(np.linspace(-8.0, 8.0, n))


def _monotone_flags(v) -> tuple[bool, bool]:
    v = np.asarray(v, float)
    if not np.all(np.isfinite(v)):
        return False, False
    d = np.diff(v)
    tol = SLACK * np.maximum(1.0, np.maximum(np.abs(v[:-1]), np.abs(v[1:])))
    return bool(np.all(d >= -tol)), bool(np.all(d <= tol))


def _concavity_flags(x, lf) -> tuple[bool, bool]:
    """Three-point chord test on consecutive triples of a (possibly uneven) grid."""
    x0, x1, x2 = x[:-2], x[1:-1], x[2:]
    f0, f1, f2 = lf[:-2], lf[1:-1], lf[2:]
    chord = ((x2 - x1) * f0 + (x1 - x0) * f2) / (x2 - x0)
    gap = f1 - chord
    tol = SLACK * np.maximum(1.0, np.maximum.reduce([np.abs(f0), np.abs(f1), np.abs(f2)]))
    return bool(np.all(gap >= -tol)), bool(np.all(gap <= tol))


def _direction(flags) -> Direction:
    inc, dec = flags
    if inc:
        return Direction.INCREASING
    return Direction.DECREASING if dec else Direction.NEITHER


def _shape(flags) -> Shape:
    cc, cv = flags
    if cc:
        return Shape.LOG_CONCAVE
    return Shape.LOG_CONVEX if cv else Shape.NEITHER


def _log_values(fz, x, is_log):
    with np.errstate(divide="ignore"):
        lf = np.asarray(fz(x), float) if is_log else np.log(np.asarray(fz(x), float))
    if np.any(~np.isfinite(lf)):
        bad = x[~np.isfinite(lf)][0]
        raise ZeroDensity(f"density vanishes (or is not finite) at interior grid point {bad!r}")
    return lf


def log_shape_flags(fz, interval, n: int = GRID, *, is_log: bool = False, scale: float = 1.0):
    x = grid(interval, n, scale)
    return _concavity_flags(x, _log_values(fz, x, is_log))


def check_log_shape(fz, interval, n: int = GRID, *, is_log: bool = False) -> Shape:
    """LogConcave / LogConvex / Neither for ``fz`` on ``interval``.

    Pass ``is_log=True`` when ``fz`` already returns the log-density; that
    avoids underflow deep in the tails.
    """
    return _shape(log_shape_flags(fz, interval, n, is_log=is_log))


def monotone_flags(g, interval, n: int = GRID, *, scale: float = 1.0):
    x = grid(interval, n, scale)
    return _monotone_flags(g(x))


def check_monotone(g, interval, n: int = GRID) -> Direction:
    return _direction(monotone_flags(g, interval, n))


# ---------------------------------------------------------------------------
# model-specific pieces

@dataclass
class _Setup:
    kind: Kind
    target: Target
    c: float            # c01 for theta1, c02 for theta2
    companion: float
    interval: tuple     # domain of the shape / psi checks
    psi: object         # psi1 / psi2 (location) or psi / psi_star (scale)
    ratio_psi: object   # psi2 (theta1) or psi4 (theta2); scale only
    edge: float = 0.0   # nu - c01 or c02 - beta (location)


def _setup(model: ModelSpec, target: Target, companion: float) -> _Setup:
    df = derived_functions(model)
    c01, c02 = blee_bsee_constants(model)
    zlo, zhi = df.z_support
    if model.kind is Kind.LOCATION:
        if target is Target.THETA1:
            c, edge, psi = c01, companion - c01, df.psi1
        else:
            c, edge, psi = c02, c02 - companion, df.psi2
        iv = (zlo, min(edge, zhi))
        return _Setup(model.kind, target, c, companion, iv, psi, None, edge)
    if target is Target.THETA1:
        c, edge, psi, rp = c01, c01 / companion, df.psi, df.psi2
    else:
        c, edge, psi, rp = c02, companion / c02, df.psi_star, df.psi4
    return _Setup(model.kind, target, c, companion, (max(zlo, 0.0), min(edge, zhi)), psi, rp)


def _k_values(model, s: _Setup, lam, z):
    if s.kind is Kind.LOCATION:
        return (s.psi(z + s.edge - lam, check=False) - s.c) / z
    if s.target is Target.THETA1:
        u = s.c * z / (s.companion * lam)
        return (s.psi(u, check=False) - s.c) / (1.0 - z)
    u = s.companion * z / (lam * s.c)
    return (s.psi(u, check=False) - s.c) / (1.0 / z - 1.0)


def _k_domain(kind):
    return (-math.inf, 0.0) if kind is Kind.LOCATION else (0.0, 1.0)


def k_flags(model, target, companion, lambda_probes=None, n: int = GRID):
    target = Target(target)
    s = _setup(model, target, companion)
    probes = default_probes(model.kind) if lambda_probes is None else tuple(lambda_probes)
    if not probes:
        raise ValueError("need at least one lambda probe")
    z = grid(_k_domain(model.kind), n)
    inc = dec = True
    per_probe = []
    for lam in probes:
        with np.errstate(all="ignore"):
            v = _k_values(model, s, float(lam), z)
        fi, fd = _monotone_flags(v)
        inc &= fi
        dec &= fd
        per_probe.append({"lambda": float(lam), "values": v.tolist()})
    return (inc, dec), z, per_probe


def check_k_direction(model: ModelSpec, target, companion: float, lambda_probes=None,
                      n: int = GRID) -> Direction:
    """Direction of k(z, lambda) in z, required to agree for every probe."""
    return _direction(k_flags(model, target, companion, lambda_probes, n)[0])


def _ratio_flags(fun, interval, n, is_log):
    """Monotonicity in t of fun(theta t)/fun(t) for each theta, combined."""
    t = grid(interval, n)
    inc = dec = True
    out = {}
    for th in RATIO_THETAS:
        with np.errstate(all="ignore"):
            r = fun(th * t) - fun(t) if is_log else fun(th * t) / fun(t)
            v = np.exp(r) if is_log else r
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ZeroDensity("ratio undefined on the grid")
        fi, fd = _monotone_flags(v)
        inc &= fi
        dec &= fd
        out[str(th)] = v.tolist()
    return (inc, dec), t, out


def _shape_flags(model, s: _Setup, interval, n):
    """(concave-slot, convex-slot) flags plus audit data."""
    df = derived_functions(model)
    if s.kind is Kind.LOCATION:
        x = grid(interval, n)
        lf = _log_values(df.log_fz, x, True)
        return _concavity_flags(x, lf), {"x": x.tolist(), "log_fz": lf.tolist()}
    (fi, fd), t, fz_r = _ratio_flags(df.log_fz, interval, n, True)
    (pi, pd), _, ps_r = _ratio_flags(lambda u: s.ratio_psi(u, check=False), interval, n, False)
    return (fi and pi, fd and pd), {"t": t.tolist(), "fz_ratio": fz_r, "psi_ratio": ps_r}


def _cases(shape, psi, k):
    (cc, cv), (pi, pd), (ki, kd) = shape, psi, k
    return ((cc and pi and ki) or (cv and pi and kd)), ((cc and pd and kd) or (cv and pd and ki))


def _cases_scale(shape, psi, k):
    (ri, rd), (pi, pd), (ki, kd) = shape, psi, k
    return (pd and ((ri and ki) or (rd and kd))), (pi and ((ri and kd) or (rd and ki)))


@dataclass
class AssumptionReport:
    fz_shape: str
    psi_direction: str
    k_direction: str
    lemma_case: str
    interval: tuple
    grid_size: int
    lambda_probes: tuple
    shape_basis: str
    note: str = ""
    grids: dict = field(default_factory=dict, repr=False)

    @property
    def certified(self) -> bool:
        return self.lemma_case in ("CaseA", "CaseB")

    def to_dict(self, with_grids: bool = True) -> dict:
        def enc(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        d = {"fz_shape": self.fz_shape, "psi_direction": self.psi_direction,
             "k_direction": self.k_direction, "lemma_case": self.lemma_case,
             "interval": [enc(v) for v in self.interval], "grid_size": self.grid_size,
             "lambda_probes": list(self.lambda_probes), "shape_basis": self.shape_basis,
             "status": "numerically certified on grid" if self.certified else "not certified",
             "note": self.note}
        if with_grids:
            d["grids"] = self.grids
        return d


def classify_lemma_case(model: ModelSpec, target, companion: float, n: int = GRID,
                        lambda_probes=None) -> AssumptionReport:
    """Run the shape, psi and k checks and combine them into CaseA / CaseB / Unverified.

    When both patterns hold (degenerate, constant alpha) the density-shape
    condition is re-checked over the whole support of Z and the pattern that
    survives is reported; a remaining tie goes to CaseA.
    """
    target = Target(target)
    s = _setup(model, target, companion)
    probes = default_probes(model.kind) if lambda_probes is None else tuple(lambda_probes)
    basis = "log-density" if model.kind is Kind.LOCATION else "ratio"
    lo, hi = s.interval
    if not lo < hi:
        return AssumptionReport(Shape.NEITHER.value, Direction.NEITHER.value, Direction.NEITHER.value,
                                "Unverified", s.interval, n, probes, basis,
                                note="hypothesis interval is empty")
    grids = {}
    note = ""
    try:
        shape, grids["shape"] = _shape_flags(model, s, s.interval, n)
    except ZeroDensity as exc:
        shape, note = (False, False), str(exc)
    try:
        x = grid(s.interval, n)
        pv = s.psi(x)
        psi = _monotone_flags(pv)
        grids["psi"] = {"x": x.tolist(), "values": np.asarray(pv).tolist()}
    except OutOfSupport as exc:
        psi, note = (False, False), str(exc)
    k, kz, kvals = k_flags(model, target, companion, probes, n)
    grids["k"] = {"z": kz.tolist(), "probes": kvals}

    combine = _cases if model.kind is Kind.LOCATION else _cases_scale
    a, b = combine(shape, psi, k)
    if a and b:
        zs = derived_functions(model).z_support
        wide = (zs[0], zs[1]) if model.kind is Kind.LOCATION else (max(zs[0], 0.0), zs[1])
        try:
            wshape, _ = _shape_flags(model, s, wide, n)
            wa, wb = combine(wshape, psi, k)
        except (ZeroDensity, ValueError):
            wa = wb = True
        if wa != wb:
            a, b = wa, wb
            note = "both patterns hold on the lemma interval; tie broken by the shape over the whole support"
        else:
            note = "both patterns hold; tie reported as CaseA"
    case = "CaseA" if a else "CaseB" if b else "Unverified"
    if case == "Unverified" and not note:
        note = "no lemma pattern matched (mixed certification)"
    shape_enum = _shape(shape)
    return AssumptionReport(shape_enum.value, _direction(psi).value, _direction(k).value, case,
                            s.interval, n, probes, basis, note, grids)


# ---------------------------------------------------------------------------
# sign checks at the boundary lambda

def boundary_sign_check(model: ModelSpec, target, companion: float, n: int = GRID) -> dict:
    """Sign of the boundary weight implied by psi monotone over the whole support of Z.

    Location theta1 compares alpha at lambda = 0 with 1, theta2 with 0.  The
    monotonicity must hold on the whole support (a Chebyshev-type argument),
    so that is where psi is checked.
    """
    from .alpha_analysis import alpha_value

    target = Target(target)
    if model.kind is not Kind.LOCATION:
        raise ValueError("the boundary sign check is defined for location models")
    df = derived_functions(model)
    fn = df.psi1 if target is Target.THETA1 else df.psi2
    inc, dec = monotone_flags(fn, df.z_support, n)
    value = alpha_value(model, target, companion, 0.0)
    pivot = 1.0 if target is Target.THETA1 else 0.0
    tol = 1e-7
    holds = True
    if inc:
        holds &= value >= pivot - tol
    if dec:
        holds &= value <= pivot + tol
    return {"psi_increasing": inc, "psi_decreasing": dec, "alpha0": value, "pivot": pivot,
            "holds": bool(holds), "applicable": bool(inc or dec)}
