"""Monte Carlo risk of mixed estimators, a quadrature cross-check, and dominance reports.

Replications for the lambda cell ``i`` are split into fixed-size blocks,
block ``b`` drawing from the stream (seed, RISK, i, b).  Block moments are
merged in block order, so results do not depend on how cells are spread over
threads, and every estimator evaluated in one call sees the same draws.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._backend import kernels
from .errors import UnknownPanel
from .estimators import EstimatorSpec, named_estimator
from .models import (Kind, ModelSpec, Target, conditional_integrals, derived_functions,
                     exponential_location, gamma_scale, to_observations)
from .quadrature import integrate, peak_hint

Z_LIMIT = 3.0


@dataclass
class RiskCurve:
    estimator_id: str
    lambda_grid: np.ndarray
    risk: np.ndarray
    std_err: np.ndarray
    n: int
    seed: int

    def rows(self):
        for lam, r, se in zip(self.lambda_grid, self.risk, self.std_err):
            yield float(lam), self.estimator_id, float(r), float(se), self.n, self.seed


@dataclass
class _Moments:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def merge(self, n, mean, m2):
        if n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = n, mean, m2
            return
        tot = self.n + n
        delta = mean - self.mean
        self.mean += delta * n / tot
        self.m2 += m2 + delta * delta * self.n * n / tot
        self.n = tot

    @property
    def se(self) -> float:
        if self.n < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


def theta_at(kind: Kind, lam: float, theta1: float | None = None):
    if kind is Kind.LOCATION:
        t1 = 0.0 if theta1 is None else float(theta1)
        return t1, t1 + lam
    t1 = 1.0 if theta1 is None else float(theta1)
    return t1, t1 * lam


def _check_specs(model, specs):
    for s in specs:
        if s.kind is not model.kind:
            raise ValueError(f"estimator {s.id} is for {s.kind.value} models")


def _losses(spec: EstimatorSpec, x1, x2, theta):
    t = 1 if spec.target is Target.THETA1 else 2
    return kernels.mixed_loss(x1, x2, t, spec.kind is Kind.SCALE, spec.c0, spec.companion,
                              spec.alpha, theta[t - 1])


def _cell(model, specs, pairs, lam, n, seed, cell, theta1):
    """Moments of each estimator's loss and of paired loss differences in one cell."""
    theta = theta_at(model.kind, lam, theta1)
    m = model.with_theta(theta)
    mom = [_Moments() for _ in specs]
    dmom = [_Moments() for _ in pairs]
    for blk, start in enumerate(range(0, n, rng.BLOCK)):
        cnt = min(rng.BLOCK, n - start)
        z1, z2 = model.family.sample_pivots(rng.stream(seed, rng.RISK, cell, blk), cnt)
        x1, x2 = to_observations(m, z1, z2)
        x1 = np.ascontiguousarray(x1)
        x2 = np.ascontiguousarray(x2)
        losses = [_losses(s, x1, x2, theta) for s in specs]
        for acc, loss in zip(mom, losses):
            acc.merge(cnt, *kernels.mean_and_m2(loss))
        for acc, (i, j) in zip(dmom, pairs):
            acc.merge(cnt, *kernels.mean_and_m2(losses[i] - losses[j]))
    return mom, dmom


def _run_cells(model, specs, pairs, grid, n, seed, theta1, workers):
    def job(i):
        return _cell(model, specs, pairs, float(grid[i]), n, seed, i, theta1)
    idx = range(len(grid))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(job, idx))
    return [job(i) for i in idx]


def _grid(kind, lambda_grid):
    from .alpha_analysis import default_grid, lambda_floor
    g = default_grid(kind) if lambda_grid is None else np.asarray(lambda_grid, float)
    if g.ndim != 1 or g.size == 0 or np.any(g < lambda_floor(kind)):
        raise ValueError(f"lambda grid must be values >= {lambda_floor(kind)}")
    return g


def simulate_risks(model: ModelSpec, specs, lambda_grid=None, n: int = 10_000,
                   seed: int = rng.DEFAULT_SEED, *, theta1=None, workers: int = 1) -> list[RiskCurve]:
    """Risk curves of several estimators under shared random numbers."""
    specs = list(specs)
    _check_specs(model, specs)
    grid = _grid(model.kind, lambda_grid)
    n = int(n)
    cells = _run_cells(model, specs, [], grid, n, seed, theta1, workers)
    out = []
    for k, s in enumerate(specs):
        risk = np.array([c[0][k].mean for c in cells])
        se = np.array([c[0][k].se for c in cells])
        out.append(RiskCurve(s.id, grid.copy(), risk, se, n, int(seed)))
    return out


def simulate_risk(model: ModelSpec, estimator: EstimatorSpec, lambda_grid=None, n: int = 10_000,
                  seed: int = rng.DEFAULT_SEED, *, theta1=None, workers: int = 1) -> RiskCurve:
    """Mean loss and its standard error at each lambda."""
    return simulate_risks(model, [estimator], lambda_grid, n, seed, theta1=theta1, workers=workers)[0]


# ---------------------------------------------------------------------------
# dominance

@dataclass
class DominanceReport:
    challenger: str
    incumbent: str
    lambda_grid: np.ndarray
    gap: np.ndarray       # challenger risk - incumbent risk
    se: np.ndarray        # standard error of the paired difference
    z: np.ndarray
    verdict: str
    curves: tuple = field(default=(), repr=False)

    @property
    def cells(self):
        return [{"lambda": float(l), "gap": float(g), "se": float(s), "z": float(z)}
                for l, g, s, z in zip(self.lambda_grid, self.gap, self.se, self.z)]


def _verdict(gap, se):
    worse = gap > Z_LIMIT * se
    better = gap < -Z_LIMIT * se
    if not worse.any():
        return "DominatesWithinMC"
    return "Mixed" if better.any() else "NoDominance"


def _zscores(gap, se):
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, gap / se, np.where(gap == 0, 0.0, np.sign(gap) * np.inf))
    return z


def _report(ch, inc, grid, cells, i, j, k, curves=()):
    gap = np.array([c[1][k].mean for c in cells])
    se = np.array([c[1][k].se for c in cells])
    return DominanceReport(ch.id, inc.id, grid.copy(), gap, se, _zscores(gap, se), _verdict(gap, se), curves)


def dominance_report(model: ModelSpec, challenger: EstimatorSpec, incumbent: EstimatorSpec,
                     lambda_grid=None, n: int = 10_000, seed: int = rng.DEFAULT_SEED,
                     *, workers: int = 1) -> DominanceReport:
    """Does ``challenger`` stay within 3 paired standard errors of ``incumbent`` everywhere?"""
    if challenger.target is not incumbent.target or challenger.kind is not incumbent.kind:
        raise ValueError("estimators must share target and kind")
    _check_specs(model, [challenger, incumbent])
    grid = _grid(model.kind, lambda_grid)
    cells = _run_cells(model, [challenger, incumbent], [(0, 1)], grid, int(n), seed, None, workers)
    return _report(challenger, incumbent, grid, cells, 0, 1, 0)


# ---------------------------------------------------------------------------
# quadrature risk (location kind)

def quadrature_risk_location(model: ModelSpec, estimator: EstimatorSpec, lam: float,
                             rtol: float = 1e-9) -> float:
    """Risk by nested quadrature over (Z, Z1), split at the pooling boundary.

    With theta = (0, lam): the estimator pools exactly when
    Z < k2 - k1 - lam, where (k1, k2) are the constants subtracted from X1, X2.
    """
    if model.kind is not Kind.LOCATION:
        raise ValueError("quadrature risk is implemented for location models")
    lam = float(lam)
    fam = model.family
    s = estimator
    k1, k2 = (s.c0, s.companion) if s.target is Target.THETA1 else (s.companion, s.c0)
    a = s.alpha
    t1 = s.target is Target.THETA1
    cut = k2 - k1 - lam
    df = derived_functions(model)

    def loss(sv, zz, pooled):
        d1 = sv - k1                   # X1 - k1 - theta1 with theta1 = 0
        d2 = sv + zz + lam - k2        # X2 - k2 (theta1 = 0)
        if pooled:
            est = a * d1 + (1.0 - a) * d2
        else:
            est = d1 if t1 else d2
        r = est if t1 else est - lam
        return r * r

    zlo, zhi = df.z_support
    pts = list(df.breakpoints)
    pk, wd = peak_hint(lambda x: df.log_fz(x), np.array([zlo]), np.array([zhi]))
    total = 0.0
    for lo, hi, pooled in ((zlo, min(cut, zhi), True), (max(cut, zlo), zhi, False)):
        if not lo < hi:
            continue

        def outer(z, pooled=pooled):
            flat = np.asarray(z, float).reshape(-1)
            v = conditional_integrals(fam, flat, lambda sv, zz: loss(sv, zz, pooled), rtol=rtol)
            return v[:, 0].reshape(np.shape(z))
        sc = float(wd[0])
        if math.isfinite(lo) and not math.isfinite(hi):
            sc = max(sc, float(pk[0]) - lo)
        elif math.isfinite(hi) and not math.isfinite(lo):
            sc = max(sc, hi - float(pk[0]))
        total += integrate(outer, lo, hi, points=[p for p in pts if lo < p < hi], rtol=100 * rtol,
                           atol=1e-15, scale=sc, center=float(pk[0]))
    return total


# ---------------------------------------------------------------------------
# figures

FIG1_PANELS = ((1.0, 0.5), (0.5, 1.5), (3.0, 2.0), (5.0, 10.0), (10.0, 15.0), (15.0, 12.0))
FIG2_PANELS = ((0.1, 0.2), (0.8, 0.5), (1.0, 1.0), (2.0, 1.0))
FIG1_LEGEND = ("blee", "rmle-min", "ire-blee", "exp-dominator")
FIG2_LEGEND = ("bsee", "ire-bsee", "gamma-dominator")


@dataclass
class FigureResult:
    figure: int
    panel: tuple
    model: ModelSpec
    curves: list
    reports: dict    # challenger id -> DominanceReport against the incumbent

    @property
    def name(self) -> str:
        return f"fig{self.figure}_{_fmt(self.panel[0])},{_fmt(self.panel[1])}"


def _fmt(v: float) -> str:
    return f"{v:g}"


def figure_id(figure) -> int:
    key = str(figure).lower().removeprefix("fig")
    if key in ("1", "2"):
        return int(key)
    raise UnknownPanel(f"unknown figure {figure!r}")


def figure_panel(figure, panel) -> tuple:
    fid = figure_id(figure)
    try:
        p = tuple(float(v) for v in panel)
    except (TypeError, ValueError):
        raise UnknownPanel(f"bad panel {panel!r}") from None
    panels = FIG1_PANELS if fid == 1 else FIG2_PANELS
    for q in panels:
        if len(p) == 2 and all(math.isclose(x, y, rel_tol=1e-12) for x, y in zip(p, q)):
            return q
    raise UnknownPanel(f"panel {panel!r} is not one of {panels}")


def reproduce_figure(figure, panel, n: int = 10_000, seed: int = rng.DEFAULT_SEED,
                     lambda_grid=None, *, workers: int = 1) -> FigureResult:
    """All legend estimators of one panel plus dominance reports against the incumbent."""
    fid = figure_id(figure)
    p = figure_panel(fid, panel)
    if fid == 1:
        model, legend = exponential_location(*p), FIG1_LEGEND
    else:
        model, legend = gamma_scale(*p), FIG2_LEGEND
    specs = [named_estimator(model, tag, Target.THETA1) for tag in legend]
    grid = _grid(model.kind, lambda_grid)
    pairs = [(k, 0) for k in range(1, len(specs))]
    cells = _run_cells(model, specs, pairs, grid, int(n), seed, None, workers)
    curves = []
    for k, s in enumerate(specs):
        curves.append(RiskCurve(s.id, grid.copy(), np.array([c[0][k].mean for c in cells]),
                                np.array([c[0][k].se for c in cells]), int(n), int(seed)))
    reports = {specs[i].id: _report(specs[i], specs[0], grid, cells, i, 0, k)
               for k, (i, _) in enumerate(pairs)}
    return FigureResult(fid, p, model, curves, reports)
