"""Deterministic random streams and the variate generators built on them.

Every stream is addressed by ``(seed, *key)`` through ``SeedSequence`` spawn
keys.  Variates are produced by explicit inversion or rejection formulas from
raw 64-bit outputs, so the compiled and numpy backends see identical inputs.
"""
from __future__ import annotations

import math

import numpy as np

from ._backend import kernels

DEFAULT_SEED = 0xC0FFEE
BLOCK = 16384
_MASK64 = (1 << 64) - 1

# stream purposes, kept apart so that e.g. the oracle never reuses risk draws
RISK, ORACLE, SAMPLE = 0, 1, 2


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def uniforms(gen: np.random.Generator, n: int) -> np.ndarray:
    """Open-interval uniforms on the grid (k + 1/2) / 2**52."""
    raw = gen.bit_generator.random_raw(n) >> np.uint64(12)
    return (raw.astype(np.float64) + 0.5) * 2.0 ** -52


def std_normals(gen, n):
    return kernels.norm_ppf(uniforms(gen, n))


def std_exponentials(gen, n):
    return -np.log(uniforms(gen, n))


def power_variates(gen, a: float, n):
    """Density a x^(a-1) on (0, 1)."""
    return np.exp(np.log(uniforms(gen, n)) / a)


def std_gammas(gen, a: float, n: int) -> np.ndarray:
    """Unit-scale gamma variates (Marsaglia-Tsang, boosted for a < 1)."""
    boost = a < 1.0
    shape = a + 1.0 if boost else a
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        m = int(math.ceil(need * 1.08)) + 16
        x = std_normals(gen, m)
        u = uniforms(gen, m)
        cand = kernels.gamma_mt_candidates(shape, x, u)
        acc = cand[np.isfinite(cand)][:need]
        out[filled:filled + acc.size] = acc
        filled += acc.size
    if boost:
        out *= np.exp(np.log(uniforms(gen, n)) / a)
    return out
