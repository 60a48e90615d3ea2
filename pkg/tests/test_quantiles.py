import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, special, stats

from denaturefit.quantiles import f_quantile, t_quantile


def _t_cdf_numeric(t, dof):
    # direct quadrature of the density, independent of the incomplete beta
    logc = special.gammaln((dof + 1) / 2) - special.gammaln(dof / 2) - 0.5 * math.log(dof * math.pi)
    pdf = lambda x: math.exp(logc - (dof + 1) / 2 * math.log1p(x * x / dof))
    val, _ = integrate.quad(pdf, 0.0, abs(t), epsabs=1e-14, epsrel=1e-14)
    return 0.5 + math.copysign(val, t)


def _t_quantile_numeric(p, dof):
    return optimize.brentq(lambda t: _t_cdf_numeric(t, dof) - p, -200, 200, xtol=1e-14, rtol=1e-15)


def test_examples():
    assert t_quantile(0.5, 7) == 0.0
    assert t_quantile(0.75, 1) == pytest.approx(1.0, abs=1e-14)
    assert t_quantile(0.975, 1e12) == pytest.approx(1.959964, abs=1e-6)


@pytest.mark.parametrize("p,dof", [(0.8415, 54), (0.975, 54), (0.6, 3), (0.995, 10), (0.1, 20),
                                   (0.9995, 5), (0.55, 100), (0.025, 2)])
def test_matches_numeric_inversion(p, dof):
    assert t_quantile(p, dof) == pytest.approx(_t_quantile_numeric(p, dof), abs=1e-8)


@given(st.floats(0.001, 0.999), st.floats(1.0, 500.0))
def test_matches_scipy(p, dof):
    assert t_quantile(p, dof) == pytest.approx(stats.t.ppf(p, dof), rel=1e-8, abs=1e-10)


@given(st.floats(0.01, 0.99), st.integers(1, 5), st.integers(2, 200))
def test_f_matches_scipy(p, dfn, dfd):
    assert f_quantile(p, dfn, dfd) == pytest.approx(stats.f.ppf(p, dfn, dfd), rel=1e-8)


def test_invalid():
    with pytest.raises(ValueError):
        t_quantile(1.0, 5)
    with pytest.raises(ValueError):
        t_quantile(0.5, 0)
    assert f_quantile(0.0, 1, 10) == 0.0
