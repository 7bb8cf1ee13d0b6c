import math

import numpy as np
import pytest
from scipy import integrate as si
from scipy import stats

from ordstat import models as M
from ordstat.errors import (InvalidParameter, ModelFileError, MomentDivergence, NonPositiveTheta,
                            OutOfSupport, UnsupportedFamily)
from ordstat.models import Kind

from _oracles import LOC_FAMILIES, SCALE_FAMILIES

BUILTINS = [
    ("bivariate_normal", (1.0, 2.0, 0.3)),
    ("bivariate_normal", (2.0, 1.0, -0.6)),
    ("exponential", (1.0, 1.0)),
    ("exponential", (2.0, 0.5)),
    ("gamma", (1.0, 1.0)),
    ("gamma", (0.5, 2.5)),
    ("power", (2.0, 1.5)),
    ("power", (0.7, 3.0)),
]


def _model(name, params):
    return {"bivariate_normal": M.bivariate_normal, "exponential": M.exponential_location,
            "gamma": M.gamma_scale, "power": M.power_scale}[name](*params)


def _scipy_pivot(name, params, z):
    """(f_Z, psi1, psi2) at one z, integrating the joint density along Z = z."""
    table = LOC_FAMILIES if name in LOC_FAMILIES else SCALE_FAMILIES
    pdf, r1, r2 = table[name](*params)
    if name in LOC_FAMILIES:
        lo, hi = max(r1[0], r2[0] - z), min(r1[1], r2[1] - z)
        w = lambda s: pdf((s, s + z))
    else:
        lo, hi = r1[0], min(r1[1], r2[1] / z)
        w = lambda s: s * pdf((s, s * z))
    pts = None
    if math.isinf(lo) and math.isinf(hi):
        pieces = [(-np.inf, -z), (-z, np.inf)]
    else:
        pieces = [(lo, hi)]
    out = []
    for k in range(2 if name in LOC_FAMILIES else 3):
        tot = 0.0
        for a, b in pieces:
            tot += si.quad(lambda s: s ** k * w(s), a, b, epsabs=0, epsrel=1e-12, limit=400, points=pts)[0]
        out.append(tot)
    if name in LOC_FAMILIES:      # second slot is E[Z2 | Z = z] for location pivots
        return out[0], out[1] / out[0], z + out[1] / out[0]
    return out[0], out[1] / out[0], out[2] / out[0]


def _zs(name, params):
    if name == "bivariate_normal":
        return [-3.0, -0.4, 0.0, 1.1, 4.0]
    if name == "exponential":
        return [-2.5, -0.3, 0.2, 1.7]
    if name == "gamma":
        return [0.05, 0.7, 1.0, 3.0, 20.0]
    return [0.1, 0.6, 1.0, 1.4, 6.0]


@pytest.mark.parametrize("name, params", BUILTINS)
def test_closed_forms_match_independent_quadrature(name, params):
    m = _model(name, params)
    df = M.derived_functions(m, "closed-form")
    for z in _zs(name, params):
        fz, p1, p2 = _scipy_pivot(name, params, z)
        assert df.fz(z) == pytest.approx(fz, rel=1e-8)
        assert df.psi1(z) == pytest.approx(p1, rel=1e-8, abs=1e-12)
        assert df.psi2(z) == pytest.approx(p2, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("name, params", BUILTINS)
def test_quadrature_route_matches_closed_forms(name, params):
    m = _model(name, params)
    cf = M.derived_functions(m, "closed-form")
    qd = M.derived_functions(m, "quadrature")
    z = np.array(_zs(name, params))
    assert qd.fz(z) == pytest.approx(cf.fz(z), rel=1e-9)
    assert qd.psi1(z) == pytest.approx(cf.psi1(z), rel=1e-9, abs=1e-12)
    assert qd.psi2(z) == pytest.approx(cf.psi2(z), rel=1e-9, abs=1e-12)
    assert M.blee_bsee_constants(m, "quadrature") == pytest.approx(M.blee_bsee_constants(m), rel=1e-9)


@pytest.mark.parametrize("name, params", BUILTINS)
def test_fz_integrates_to_one(name, params):
    df = M.derived_functions(_model(name, params))
    lo, hi = df.z_support
    pts = [p for p in df.breakpoints if lo < p < hi]
    edges = [lo] + sorted(pts) + [hi]
    if not pts and math.isinf(lo) and math.isinf(hi):
        edges = [lo, 0.0, hi]
    total = sum(si.quad(lambda z: float(df.fz(z)), a, b, epsrel=1e-11, limit=300)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    assert total == pytest.approx(1.0, abs=1e-8)


def test_derived_identities_scale():
    df = M.derived_functions(M.gamma_scale(1.3, 0.8))
    z = np.array([0.2, 1.0, 5.0])
    assert np.allclose(df.psi3(z), z * df.psi1(z))
    assert np.allclose(df.psi4(z), z ** 2 * df.psi2(z))
    assert np.allclose(df.psi(z), df.psi1(z) / df.psi2(z))
    assert np.allclose(df.psi_star(z), df.psi3(z) / df.psi4(z), rtol=1e-14)


def test_derived_identity_location():
    df = M.derived_functions(M.exponential_location(1.0, 3.0))
    z = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(df.psi2(z), z + df.psi1(z))


def test_normal_conditional_mean_is_linear():
    s1, s2, r = 1.5, 0.7, 0.4
    tau2 = s1 * s1 + s2 * s2 - 2 * r * s1 * s2
    df = M.derived_functions(M.bivariate_normal(s1, s2, r))
    z = np.linspace(-5, 5, 11)
    assert np.allclose(df.psi1(z), s1 * (r * s2 - s1) * z / tau2, atol=1e-15)
    assert np.allclose(df.fz(z), stats.norm(0, math.sqrt(tau2)).pdf(z))


def test_gamma_fz_is_beta_prime():
    a1, a2 = 0.5, 2.5
    df = M.derived_functions(M.gamma_scale(a1, a2))
    z = np.geomspace(1e-3, 1e3, 13)
    assert np.allclose(df.fz(z), stats.betaprime(a2, a1).pdf(z), rtol=1e-12)


@pytest.mark.parametrize("name, params, expect", [
    ("bivariate_normal", (1.0, 2.0, 0.3), (0.0, 0.0)),
    ("exponential", (2.0, 0.5), (2.0, 0.5)),
    ("gamma", (1.0, 3.0), (0.5, 0.25)),
    ("power", (2.0, 1.0), (4 / 3, 1.5)),
])
def test_blee_bsee_constants(name, params, expect):
    assert M.blee_bsee_constants(_model(name, params)) == pytest.approx(expect, rel=1e-14, abs=1e-15)


def test_psi_outside_support_is_signalled():
    df = M.derived_functions(M.gamma_scale(1, 1))
    with pytest.raises(OutOfSupport):
        df.psi1(-1.0)
    with pytest.raises(OutOfSupport):
        df.psi_star(0.0)
    assert df.fz(-1.0) == 0.0
    pw = M.derived_functions(M.power_scale(2, 2))
    assert pw.fz(np.array([-1.0, 0.0]))[0] == 0.0


def test_density_checks_scale_support():
    m = M.gamma_scale(2, 3, theta=(1.5, 2.0))
    assert M.density(m, [1.0, 1.0]) == pytest.approx(
        stats.gamma(2, scale=1.5).pdf(1.0) * stats.gamma(3, scale=2.0).pdf(1.0))
    with pytest.raises(OutOfSupport):
        M.density(m, [-1.0, 1.0])


def test_parameter_validation():
    with pytest.raises(InvalidParameter):
        M.bivariate_normal(1, 1, 1.0)
    with pytest.raises(InvalidParameter):
        M.exponential_location(-1, 1)
    with pytest.raises(InvalidParameter):
        M.gamma_scale(0, 1)
    with pytest.raises(NonPositiveTheta):
        M.gamma_scale(1, 1, theta=(0.0, 1.0))
    with pytest.raises(UnsupportedFamily):
        M.ModelSpec(Kind.SCALE, M.ExponentialLocation(1.0, 1.0))


def test_model_files(tmp_path):
    good = tmp_path / "m.toml"
    good.write_text('kind = "scale"\nfamily = "gamma"\nparams = [2.0, 0.5]\ntheta = [1.0, 3.0]\n')
    m = M.load_model(good)
    assert m.family == M.GammaScale(2.0, 0.5) and m.theta == (1.0, 3.0)
    assert M.model_from_mapping(m.to_mapping()) == m

    for body in ['kind = "scale"\nfamily = "gamma"\nparams = [2.0]\n',
                 'kind = "location"\nfamily = "gamma"\nparams = [2.0, 1.0]\n',
                 'kind = "scale"\nfamily = "gamma"\nparams = [2.0, 1.0]\ncolour = 1\n',
                 'kind = "sideways"\nfamily = "gamma"\nparams = [2.0, 1.0]\n',
                 'kind = "scale"\nfamily = "gamma"\nparams = [2.0, 1.0\n']:
        bad = tmp_path / "bad.toml"
        bad.write_text(body)
        with pytest.raises(ModelFileError):
            M.load_model(bad)
    bad.write_text('kind = "scale"\nfamily = "weibull"\nparams = [2.0, 1.0]\n')
    with pytest.raises(UnsupportedFamily):
        M.load_model(bad)


def test_sample_moments_and_reproducibility():
    m = M.exponential_location(2.0, 0.5, theta=(1.0, 4.0))
    x = M.sample(m, 50_000, seed=3)
    assert np.array_equal(x, M.sample(m, 50_000, seed=3))
    assert abs(x[:, 0].mean() - 3.0) < 6 * 2.0 / math.sqrt(50_000)
    assert abs(x[:, 1].mean() - 4.5) < 6 * 0.5 / math.sqrt(50_000)
    assert x[:, 0].min() >= 1.0


def test_normal_sampler_correlation():
    m = M.bivariate_normal(1.0, 3.0, -0.7)
    x = M.sample(m, 100_000, seed=1)
    assert np.corrcoef(x.T)[0, 1] == pytest.approx(-0.7, abs=0.01)
    assert x[:, 1].std() == pytest.approx(3.0, rel=0.01)


def test_custom_density_matches_builtin():
    s1, s2 = 1.0, 2.0

    def pdf(z1, z2):
        inside = (z1 >= 0) & (z2 >= 0)
        return np.where(inside, np.exp(-np.where(inside, z1 / s1 + z2 / s2, 0.0)) / (s1 * s2), 0.0)

    fam = M.CustomDensity(pdf, "location", support=((0, np.inf), (0, np.inf)))
    custom = M.ModelSpec(Kind.LOCATION, fam)
    ref = M.derived_functions(M.exponential_location(s1, s2))
    got = M.derived_functions(custom)
    assert got.source == "quadrature"
    z = np.array([-1.5, -0.2, 0.3, 2.0])
    assert got.psi1(z) == pytest.approx(ref.psi1(z), rel=1e-8)
    assert got.fz(z) == pytest.approx(ref.fz(z), rel=1e-8)
    assert M.blee_bsee_constants(custom) == pytest.approx((s1, s2), rel=1e-8)
    with pytest.raises(UnsupportedFamily):
        M.sample(custom, 10)


def test_custom_density_normalisation_and_moments():
    with pytest.raises(InvalidParameter):
        M.CustomDensity(lambda a, b: 2 * np.exp(-a - b) * (a > 0) * (b > 0), "location",
                        support=((0, np.inf), (0, np.inf)))
    # product of Cauchy marginals: no mean
    cauchy = M.CustomDensity(lambda a, b: 1 / (np.pi * (1 + a * a)) / (np.pi * (1 + b * b)), "location")
    with pytest.raises(MomentDivergence):
        M.blee_bsee_constants(M.ModelSpec(Kind.LOCATION, cauchy))


def _grid64(name, params):
    if name == "bivariate_normal":
        return np.linspace(-6.0, 6.0, 64)
    if name == "exponential":
        return np.linspace(-5.0, 5.0, 64)
    if name == "gamma":
        return np.geomspace(1e-2, 1e2, 64)
    return np.geomspace(0.02, 20.0, 64)


@pytest.mark.parametrize("name, params", BUILTINS)
def test_quadrature_route_on_64_point_grid(name, params):
    m = _model(name, params)
    cf = M.derived_functions(m, "closed-form")
    qd = M.derived_functions(m, "quadrature")
    z = _grid64(name, params)
    for fn in ("fz", "psi1", "psi2"):
        assert getattr(qd, fn)(z) == pytest.approx(getattr(cf, fn)(z), rel=1e-6, abs=1e-300)
