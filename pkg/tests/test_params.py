import math

import pytest
from hypothesis import given, strategies as st

from fastdiff.params import ModelParams, ParameterError, classify_regime, derive_constants


def test_default_constants():
    p = ModelParams(2, 0.75, 2.0)
    assert p.lam == pytest.approx(1.5)
    assert p.delta == pytest.approx(0.5)
    assert p.gamma == pytest.approx(6.0)
    assert p.alpha == pytest.approx(9.0)
    assert p.sigma == pytest.approx(1.0 / 3.0)
    assert p.k == pytest.approx(4.0)


def test_near_linear_limit_is_finite():
    p = ModelParams(2, 1.0 - 1e-9, 2.0)
    assert p.lam == pytest.approx(2.0, abs=1e-8)
    assert math.isfinite(p.gamma) and p.gamma == pytest.approx(2e9, rel=1e-6)


def test_critical_absorption_exponent():
    p = ModelParams(3, 2.0 / 3.0, 4.0 / 3.0)
    assert p.delta == pytest.approx(0.0, abs=1e-14)
    assert not classify_regime(p).diffusion_dominated


def test_log_critical_flag():
    assert classify_regime(ModelParams(2, 0.75, 2.25)).log_critical
    assert not classify_regime(ModelParams(2, 0.75, 2.0)).log_critical


def test_barenblatt_without_convergence():
    rep = classify_regime(ModelParams(4, 0.6, 2.0))
    assert rep.barenblatt_ok
    assert not rep.convergence_ok


@pytest.mark.parametrize("kw", [dict(n=1, m=0.5, p=2.0), dict(n=2, m=1.0, p=2.0),
                                dict(n=2, m=0.0, p=2.0), dict(n=2, m=0.5, p=1.0),
                                dict(n=2, m=0.5, p=2.0, epsilon=-1.0)])
def test_rejects_bad_exponents(kw):
    with pytest.raises(ParameterError):
        ModelParams(**kw)


exponents = st.tuples(st.integers(2, 6), st.floats(0.01, 0.99), st.floats(1.01, 6.0))


@given(exponents)
def test_alpha_equals_gamma_lambda(nmp):
    c = derive_constants(ModelParams(*nmp))
    assert abs(c.alpha - c.gamma * c.lam) <= 1e-12 * max(1.0, abs(c.alpha))


@given(st.integers(2, 6), st.floats(0.01, 0.98), st.floats(0.0, 0.5), st.floats(1.01, 6.0))
def test_flags_monotone_in_m(n, m, dm, p):
    m2 = min(m + dm, 0.99)
    lo, hi = classify_regime(ModelParams(n, m, p)), classify_regime(ModelParams(n, m2, p))
    assert hi.barenblatt_ok >= lo.barenblatt_ok
    assert hi.shannon_ok >= lo.shannon_ok


@given(exponents)
def test_delta_sign_matches_threshold(nmp):
    n, m, p = nmp
    d = ModelParams(n, m, p).delta
    if abs(p - (m + 2.0 / n)) > 1e-9:
        assert (d > 0.0) == (p > m + 2.0 / n)
