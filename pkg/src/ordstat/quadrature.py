"""Double-exponential quadrature with level refinement and bisection fallback.

Finite pieces use the tanh-sinh map, half-lines the exp-sinh map.  Each
refinement level halves the step and reuses every earlier node, so the
difference between consecutive levels serves as the error estimate.
Integrands are evaluated on whole node arrays at once, and may return an
extra trailing axis of components.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import QuadratureFailure

T_MAX = 6.0
MIN_LEVEL = 3
MAX_LEVEL = 8
MAX_DEPTH = 6
_TINY_WEIGHT = 1e-250

FINITE, RIGHT, LEFT = 0, 1, 2


@lru_cache(maxsize=None)
def _unit_nodes(level: int):
    h = 2.0 ** -level
    if level == 0:
        t = np.arange(-T_MAX, T_MAX + 0.5, 1.0)
    else:
        k = np.arange(1, int(round(2 * T_MAX / h)), 2)
        t = -T_MAX + k * h
    q = 0.5 * math.pi * np.sinh(t)
    ch = 0.5 * math.pi * np.cosh(t)
    e = np.exp(-2.0 * np.abs(q))
    delta = e / (1.0 + e)               # distance to nearer end, as a fraction of width
    w_ts = 2.0 * ch * e / (1.0 + e) ** 2
    eq = np.exp(q)
    w_es = eq * ch
    for arr in (t, delta, w_ts, eq, w_es):
        arr.setflags(write=False)
    return t, delta, w_ts, eq, w_es


@dataclass
class _Segs:
    kind: np.ndarray
    a: np.ndarray
    b: np.ndarray
    scale: np.ndarray

    def __len__(self):
        return len(self.kind)

    def take(self, idx):
        return _Segs(self.kind[idx], self.a[idx], self.b[idx], self.scale[idx])

    def split(self) -> tuple["_Segs", np.ndarray]:
        """Halve every piece; returns new pieces and their parent index."""
        kinds, aa, bb, ss, parent = [], [], [], [], []
        for i in range(len(self)):
            k, a, b, s = int(self.kind[i]), self.a[i], self.b[i], self.scale[i]
            if k == FINITE:
                m = 0.5 * (a + b)
                kinds += [FINITE, FINITE]
                aa += [a, m]
                bb += [m, b]
                ss += [s, s]
            elif k == RIGHT:
                m = a + s
                kinds += [FINITE, RIGHT]
                aa += [a, m]
                bb += [m, math.inf]
                ss += [s, 2.0 * s]
            else:
                m = b - s
                kinds += [LEFT, FINITE]
                aa += [-math.inf, m]
                bb += [m, b]
                ss += [2.0 * s, s]
            parent += [i, i]
        return (
            _Segs(np.array(kinds), np.array(aa, float), np.array(bb, float), np.array(ss, float)),
            np.array(parent),
        )


def _pieces(a: float, b: float, points, scale: float, center: float | None):
    """Split [a, b] at the interior break points into DE-ready segments."""
    if not a < b:
        return None
    cuts = sorted({float(p) for p in points if a < p < b})
    if math.isinf(a) and math.isinf(b) and not cuts:
        cuts = [0.0 if center is None else float(center)]
    edges = [a] + cuts + [b]
    kinds, aa, bb = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isinf(lo) and math.isinf(hi):
            raise AssertionError("unsplit infinite piece")
        if math.isinf(lo):
            kinds.append(LEFT)
        elif math.isinf(hi):
            kinds.append(RIGHT)
        else:
            kinds.append(FINITE)
        aa.append(lo)
        bb.append(hi)
    n = len(kinds)
    return _Segs(np.array(kinds), np.array(aa, float), np.array(bb, float), np.full(n, float(scale)))


def _map(segs: _Segs, level: int):
    t, delta, w_ts, eq, w_es = _unit_nodes(level)
    kind = segs.kind[:, None]
    a = np.where(np.isfinite(segs.a), segs.a, 0.0)[:, None]
    b = np.where(np.isfinite(segs.b), segs.b, 0.0)[:, None]
    s = segs.scale[:, None]
    width = b - a
    x_fin = np.where(t < 0, a + width * delta, b - width * delta)
    x = np.where(kind == FINITE, x_fin, np.where(kind == RIGHT, a + s * eq, b - s * eq))
    w = np.where(kind == FINITE, width * w_ts, s * w_es)
    return x, w


def _levels(f, segs: _Segs, max_level: int):
    """Yield per-segment estimates, one refinement level at a time."""
    acc = None
    for level in range(max_level + 1):
        x, w = _map(segs, level)
        vals = np.asarray(f(x), dtype=float)
        ww = w if vals.ndim == 2 else w[..., None]
        contrib = vals * ww
        bad = ~np.isfinite(contrib)
        if bad.any():
            ends = (x == segs.a[:, None]) | (x == segs.b[:, None]) | (w < _TINY_WEIGHT)
            if vals.ndim == 3:
                ends = ends[..., None]
            if np.any(bad & ~ends):
                xb = np.broadcast_to(x[..., None] if vals.ndim == 3 else x, bad.shape)[bad & ~ends]
                raise QuadratureFailure(f"integrand not finite at x={xb[0]!r}")
            contrib = np.where(bad, 0.0, contrib)
        part = contrib.sum(axis=1)
        acc = part if acc is None else acc + part
        yield level, acc * 2.0 ** -level


def _run(f, segs, converged, max_level):
    prev = None
    for level, est in _levels(f, segs, max_level):
        if prev is not None and level >= MIN_LEVEL and converged(prev.sum(axis=0), est.sum(axis=0)):
            return est.sum(axis=0)
        prev = est
    return None


def _adaptive(f, segs, converged, max_level, what):
    for _ in range(MAX_DEPTH + 1):
        out = _run(f, segs, converged, max_level)
        if out is not None:
            return out
        segs, _ = segs.split()
    raise QuadratureFailure(f"{what}: refinement stalled above tolerance")


def integrate(f, a: float, b: float, *, points=(), rtol: float = 1e-8, atol: float = 1e-14,
              scale: float = 1.0, center: float | None = None, max_level: int = MAX_LEVEL):
    """Integrate a vectorised ``f`` over [a, b]; either end may be infinite.

    ``f`` maps an array of abscissae to values of the same shape, optionally
    with one extra trailing axis of components (the result then has that
    length).  ``points`` are interior break points where ``f`` is not smooth;
    ``scale`` sets the length scale of half-infinite pieces.
    """
    segs = _pieces(float(a), float(b), points, scale, center)
    if segs is None:
        return 0.0

    def ok(prev, est):
        return bool(np.all(np.abs(est - prev) <= np.maximum(rtol * np.abs(est), atol)))

    out = _adaptive(f, segs, ok, max_level, "integrate")
    return float(out) if np.ndim(out) == 0 else out


def integrate_ratio(f, a: float, b: float, *, points=(), rtol: float = 1e-9,
                    scale: float = 1.0, max_level: int = MAX_LEVEL):
    """Integrate a two-component integrand and return (num, den).

    Refinement stops once num/den and den have both settled to ``rtol``;
    tolerating absolute error in num relative to den keeps cancellation in the
    numerator from stalling the refinement.
    """
    segs = _pieces(float(a), float(b), points, scale, None)
    if segs is None:
        return 0.0, 0.0

    def ok(prev, est):
        if est[1] == 0.0:
            return prev[1] == 0.0 and prev[0] == est[0]
        r1 = est[0] / est[1]
        r0 = prev[0] / prev[1] if prev[1] != 0.0 else math.inf
        return abs(r1 - r0) <= rtol * max(1.0, abs(r1)) and abs(est[1] - prev[1]) <= rtol * abs(est[1])

    out = _adaptive(f, segs, ok, max_level, "integrate_ratio")
    return float(out[0]), float(out[1])


def integrate_many(f, a, b, *, rtol: float = 1e-8, atol: float = 1e-14, scale=1.0, center=0.0,
                   max_level: int = MAX_LEVEL):
    """Integrate a family of problems at once.

    Problem ``i`` runs over [a[i], b[i]].  ``f(x, idx)`` receives a 2-D node
    array whose row ``r`` belongs to problem ``idx[r]``.  Problems that do not
    converge in the batch fall back to the scalar routine.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    m = a.size
    scale = np.broadcast_to(np.asarray(scale, float), (m,))
    center = np.broadcast_to(np.asarray(center, float), (m,))
    kinds, aa, bb, ss, owner = [], [], [], [], []
    for i in range(m):
        lo, hi = a[i], b[i]
        if not lo < hi:
            continue
        if math.isinf(lo) and math.isinf(hi):
            c = center[i]
            kinds += [LEFT, RIGHT]
            aa += [-math.inf, c]
            bb += [c, math.inf]
            ss += [scale[i]] * 2
            owner += [i, i]
            continue
        kinds.append(LEFT if math.isinf(lo) else RIGHT if math.isinf(hi) else FINITE)
        aa.append(lo)
        bb.append(hi)
        ss.append(scale[i])
        owner.append(i)
    owner = np.array(owner, dtype=int)
    result = None
    if owner.size == 0:
        probe = np.asarray(f(np.zeros((1, 1)), np.zeros(1, dtype=int)), float)
        return np.zeros((m,) + probe.shape[2:])

    segs = _Segs(np.array(kinds), np.array(aa, float), np.array(bb, float), np.array(ss, float))

    def g(x):
        return f(x, owner)

    prev = None
    done = None
    for level, est in _levels(g, segs, max_level):
        tot = np.zeros((m,) + est.shape[1:])
        np.add.at(tot, owner, est)
        if prev is not None and level >= MIN_LEVEL:
            err = np.abs(tot - prev) <= np.maximum(rtol * np.abs(tot), atol)
            done = err.reshape(m, -1).all(axis=1)
            if done.all():
                return tot
        prev = tot
    result = prev
    for i in np.flatnonzero(~done):
        def fi(x, i=i):
            flat = np.asarray(x, float).reshape(1, -1)
            v = np.asarray(f(flat, np.array([i])), float)
            return v.reshape(np.shape(x) + v.shape[2:])
        result[i] = integrate(fi, a[i], b[i], rtol=rtol, atol=atol, scale=float(scale[i]),
                              center=float(center[i]), max_level=max_level)
    return result


def peak_hint(logf, lo, hi, n: int = 161, with_top: bool = False):
    """Rough location and width of the mode of exp(logf) for each row.

    ``logf(x)`` takes a (m, n) array.  Used to pick the centre and length
    scale of infinite pieces in nested quadratures.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    u = np.sinh(np.linspace(-9.0, 9.0, n)) / np.sinh(9.0) * 4000.0
    grid = np.empty((lo.size, n))
    both = np.isinf(lo) & np.isinf(hi)
    right = np.isfinite(lo) & np.isinf(hi)
    left = np.isinf(lo) & np.isfinite(hi)
    fin = np.isfinite(lo) & np.isfinite(hi)
    pos = np.abs(u)[None, :]
    grid[right] = lo[right, None] + pos
    grid[left] = hi[left, None] - pos
    if fin.any():
        s = np.linspace(0.0, 1.0, n)[None, :]
        grid[fin] = lo[fin, None] + (hi[fin] - lo[fin])[:, None] * s
    rows = np.arange(lo.size)
    shift = np.zeros(lo.size)
    spread = np.ones(lo.size)
    for _ in range(12):
        # a two-sided row whose maximum sits on the grid edge gets recentred and widened
        grid[both] = shift[both, None] + spread[both, None] * u[None, :]
        with np.errstate(all="ignore"):
            lv = np.asarray(logf(grid), float)
        lv = np.where(np.isfinite(lv), lv, -np.inf)
        j = np.argmax(lv, axis=1)
        edge = both & ((j == 0) | (j == n - 1)) & np.isfinite(lv[rows, j])
        if not edge.any():
            break
        shift[edge] = grid[edge, j[edge]]
        spread[edge] *= 4.0
    moved = both & (spread > 1.0)
    for _ in range(3 if moved.any() else 0):
        # re-centre at the original resolution; the grid is densest at its middle
        shift[moved] = grid[moved, j[moved]]
        grid[moved] = shift[moved, None] + u[None, :]
        with np.errstate(all="ignore"):
            lv = np.asarray(logf(grid), float)
        lv = np.where(np.isfinite(lv), lv, -np.inf)
        j = np.argmax(lv, axis=1)
    top = lv[rows, j]
    near = lv >= (top[:, None] - 4.0)
    gx = np.where(near, grid, np.nan)
    with np.errstate(all="ignore"):
        width = 0.5 * (np.nanmax(gx, axis=1) - np.nanmin(gx, axis=1))
    step = np.abs(np.diff(np.sort(grid, axis=1), axis=1))
    jj = np.clip(j, 0, n - 2)
    width = np.where(np.isfinite(width) & (width > 0), width, step[rows, jj])
    width = np.maximum(width, 1e-12)
    if with_top:
        return grid[rows, j], width, top
    return grid[rows, j], width
