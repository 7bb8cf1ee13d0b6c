"""The compiled kernels and their numpy fallback must agree."""
import numpy as np
import pytest
from scipy import stats

from ordstat import _backend, _kernels_py, rng

compiled = pytest.importorskip("ordstat._kernels")
KERNELS = [pytest.param(_kernels_py, id="numpy"), pytest.param(compiled, id="compiled")]


@pytest.fixture(scope="module")
def probs():
    g = rng.stream(5)
    return np.concatenate([rng.uniforms(g, 50_000), [2.0 ** -52 * 0.5, 1e-300, 0.02425, 0.5,
                                                     1 - 2.0 ** -53, 0.97575]])


@pytest.mark.parametrize("k", KERNELS)
def test_norm_ppf_matches_scipy(k, probs):
    got = k.norm_ppf(probs)
    ref = stats.norm.ppf(probs)
    assert np.allclose(got, ref, rtol=1e-13, atol=1e-14)


def test_norm_ppf_backends_agree(probs):
    assert np.allclose(compiled.norm_ppf(probs), _kernels_py.norm_ppf(probs), rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("a", [0.6, 1.0, 1.3, 4.0, 40.0])
def test_gamma_candidates_agree(a):
    g = rng.stream(9)
    x = rng.std_normals(g, 30_000)
    u = rng.uniforms(g, 30_000)
    c1 = compiled.gamma_mt_candidates(a, x, u)
    c2 = _kernels_py.gamma_mt_candidates(a, x, u)
    assert np.array_equal(np.isnan(c1), np.isnan(c2))
    ok = ~np.isnan(c1)
    assert np.allclose(c1[ok], c2[ok], rtol=1e-15, atol=0)
    assert ok.mean() > 0.9


@pytest.mark.parametrize("target", [1, 2])
@pytest.mark.parametrize("is_scale", [False, True])
def test_mixed_loss_agrees(target, is_scale):
    g = rng.stream(3)
    x1 = np.exp(rng.std_normals(g, 20_000)) if is_scale else rng.std_normals(g, 20_000)
    x2 = np.exp(rng.std_normals(g, 20_000)) if is_scale else rng.std_normals(g, 20_000)
    args = (target, is_scale, 0.7, 0.4, 0.35, 1.3)
    a = compiled.mixed_loss(x1, x2, *args)
    b = _kernels_py.mixed_loss(x1, x2, *args)
    assert np.allclose(a, b, rtol=1e-15, atol=0)


def test_mean_and_m2_agree_with_two_pass():
    v = rng.std_exponentials(rng.stream(4), 100_003) * 1e3 + 1e6
    for k in (compiled, _kernels_py):
        mean, m2 = k.mean_and_m2(v)
        assert mean == pytest.approx(np.mean(v), rel=1e-14)
        assert m2 == pytest.approx(np.sum((v - np.mean(v)) ** 2), rel=1e-10)
    assert compiled.mean_and_m2(np.empty(0)) == (0.0, 0.0)


def test_backend_is_selected():
    assert _backend.NAME in ("compiled", "python")


def test_risk_curves_agree_across_backends(monkeypatch):
    from ordstat import models, risk_engine
    from ordstat.estimators import named_estimator
    m = models.gamma_scale(0.8, 0.5)
    spec = named_estimator(m, "gamma-dominator", "theta1")
    grid = [1.0, 2.0, 7.0]
    monkeypatch.setattr(risk_engine, "kernels", compiled)
    monkeypatch.setattr(rng, "kernels", compiled)
    fast = risk_engine.simulate_risk(m, spec, grid, n=20_000)
    monkeypatch.setattr(risk_engine, "kernels", _kernels_py)
    monkeypatch.setattr(rng, "kernels", _kernels_py)
    slow = risk_engine.simulate_risk(m, spec, grid, n=20_000)
    assert np.allclose(fast.risk, slow.risk, rtol=1e-12)
    assert np.allclose(fast.std_err, slow.std_err, rtol=1e-9)
