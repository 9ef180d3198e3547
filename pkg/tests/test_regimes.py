import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from loschmidt import regimes as R


# -- Bessel -------------------------------------------------------------------


def test_j2_zero():
    assert R.bessel_j2(0.0) == 0.0


def test_j2_table_values():
    assert R.bessel_j2(18.0) == pytest.approx(-0.00753, abs=5e-6)
    assert R.bessel_j2(7.0) == pytest.approx(-0.3014, abs=5e-5)


@pytest.mark.parametrize("x", [1e-6, 0.3, 2.0, 7.9999, 8.0, 8.0001, 18.0, 55.5, 200.0, 1500.0])
def test_j2_against_reference(x):
    assert abs(R.bessel_j2(x) - special.jv(2, x)) < 1e-10


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 400.0))
def test_j2_random(x):
    assert abs(R.bessel_j2(x) - special.jv(2, x)) < 1e-10


def test_j2_rejects_negative():
    with pytest.raises(ValueError):
        R.bessel_j2(-1.0)


# -- decay laws ---------------------------------------------------------------


def test_pt_examples():
    assert R.m_pt(0.0, 1.0, 1.0) == 1.0
    hbar, v2 = 0.01, 4e-6
    t = hbar / math.sqrt(v2)
    assert R.m_pt(t, v2, hbar) == pytest.approx(math.exp(-1), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(1e-12, 1e-6))
def test_pt_semigroup(t, s, v2):
    hbar = 1e-4
    lhs = R.m_pt(t, v2, hbar) * R.m_pt(s, v2, hbar)
    assert lhs == pytest.approx(float(R.m_pt(math.hypot(t, s), v2, hbar)), abs=1e-12)


def test_fgr_examples():
    assert R.m_fgr(0.0, 1.0, 1.0) == 1.0
    # rate Gamma/hbar = 0.05 per step
    hbar = 1e-3
    assert R.m_fgr(20.0, 0.05 * hbar, hbar) == pytest.approx(math.exp(-1), rel=1e-12)
    assert R.golden_rule_width(3e-11, 2e-5) == pytest.approx(3e-6)


def test_lyapunov_law():
    lam, D, sigma = 1.28, 1e-8, 1e-5
    m0 = float(R.m_lyapunov(0.0, lam, D, sigma))
    assert m0 == pytest.approx((1 + D / (2 * lam * sigma**2)) ** -0.5)
    assert m0 <= 1.0
    t = np.array([20.0, 40.0, 200.0])
    ratio = R.m_lyapunov(t, lam, D, sigma) / R.lyapunov_asymptote(t, lam, D, sigma)
    np.testing.assert_allclose(ratio, 1.0, rtol=1e-6)
    # no overflow far past the asymptote
    with np.errstate(over="raise", invalid="raise"):
        assert np.all(np.isfinite(R.m_lyapunov(np.array([1e3, 1e4]), lam, D, sigma)))


def test_lyapunov_unit_asymptote_and_slope():
    t = np.arange(0, 30.0)
    M = R.m_lyapunov(t, 1.28)
    assert M[0] == 1.0
    slope = np.polyfit(t, np.log(M), 1)[0]
    assert slope == pytest.approx(-1.28, rel=1e-12)
    # slope independent of D (hence eps) once lam t >> 1
    for D in (1e-9, 4e-9, 1.6e-8):
        tail = np.log(R.m_lyapunov(np.arange(15, 30.0), 1.28, D, 1e-5))
        assert np.polyfit(np.arange(15, 30.0), tail, 1)[0] == pytest.approx(-1.28, rel=1e-6)


def test_lyapunov_validation():
    with pytest.raises(ValueError):
        R.m_lyapunov(1.0, 1.0, 1e-8, -1.0)
    with pytest.raises(ValueError):
        R.m_lyapunov(1.0, 0.0, 1e-8, 1e-5)
    assert float(R.m_lyapunov(5.0, 1.0, 0.0, 1e-5)) == 1.0


def test_position_state_sigma_reproduces_prefactor():
    hbar, lam, D = 1e-6, 1.28, 1e-8
    s = R.position_state_sigma(hbar)
    pref = R.lyapunov_asymptote(0.0, lam, D, s)
    assert pref == pytest.approx(2 * hbar * math.sqrt(math.pi * lam / D), rel=1e-12)


# -- crossovers and floor -----------------------------------------------------


def test_crossover_fig2():
    e1, e2 = R.crossover_strengths(18.0, 3500, 2.21)
    assert e1 == pytest.approx(8.7e-5, rel=0.02)
    assert e1 < 5e-4 < e2


def test_crossover_fig3():
    _, e2 = R.crossover_strengths(7.0, 100_000, 1.28)
    assert e2 == pytest.approx(1.6e-4, rel=0.05)
    assert 5e-4 > e2


def test_crossover_scaling():
    a, _ = R.crossover_strengths(18.0, 500, 2.21)
    b, _ = R.crossover_strengths(18.0, 4000, 2.21)
    assert b / a == pytest.approx(8**-1.5, rel=1e-12)


def test_crossover_ordering_presets():
    for k, n, lam in ((18.0, 350, 2.21), (18.0, 3500, 2.21), (7.0, 100_000, 1.28)):
        e1, e2 = R.crossover_strengths(k, n, lam)
        assert e1 < e2


def test_crossover_invalid(monkeypatch):
    # min J2 is about -0.30, so the guard needs a stand-in to fire
    monkeypatch.setattr(R, "bessel_j2", lambda x: -0.6)
    with pytest.raises(ValueError, match="1 \\+ 2 J2"):
        R.crossover_strengths(7.0, 1000, 1.0)
    monkeypatch.undo()
    with pytest.raises(ValueError):
        R.crossover_strengths(18.0, 1, 1.0)
    with pytest.raises(ValueError):
        R.crossover_strengths(18.0, 100, 0.0)


@pytest.mark.parametrize("n, val", [(3500, 2.857e-4), (350, 2.857e-3), (100_000, 1e-5)])
def test_ergodic_floor(n, val):
    assert R.ergodic_floor(n) == pytest.approx(val, rel=1e-3)


def test_ergodic_floor_invalid():
    with pytest.raises(ValueError):
        R.ergodic_floor(1)


# -- RegimeParams -------------------------------------------------------------


def test_regime_params_consistency():
    rp = R.RegimeParams.build(K=4.6e-11, D=3.2e-9, lam=2.21, n=3500, sigma=1e-4)
    assert rp.hbar * 2 * math.pi * 3500 == pytest.approx(1.0)
    assert rp.gamma == pytest.approx(2 * 4.6e-11 / rp.hbar)
    assert rp.fgr_rate == pytest.approx(2 * 4.6e-11 / rp.hbar**2)
    assert rp.level_spacing * 3500 == pytest.approx(2 * math.pi * rp.hbar)
    curves = rp.curves(np.arange(5))
    assert curves["pt"][0] == 1.0 and curves["fgr"][0] == 1.0
    assert curves["lyap"][0] <= 1.0


def test_regime_params_rejects_negative():
    with pytest.raises(ValueError):
        R.RegimeParams.build(K=-1.0, D=1.0, lam=1.0, n=10)


def test_pt_variance_default_and_override():
    K, n = 4.6e-11, 350
    assert R.pt_matrix_element_variance(K, n) == pytest.approx(8 * K / n)
    assert R.pt_matrix_element_variance(K, n, time_reversal=False, parity=False) == pytest.approx(2 * K / n)
    rp = R.RegimeParams.build(K, 1.0, 1.0, n, v2=1e-12)
    assert rp.v2 == 1e-12


def test_fgr_rate_scales_as_eps_squared():
    # K is quadratic in eps, so the rate is too
    a = R.RegimeParams.build(1e-11, 1e-9, 1.0, 1000).fgr_rate
    b = R.RegimeParams.build(4e-11, 4e-9, 1.0, 1000).fgr_rate
    assert b / a == pytest.approx(4.0)


# -- fitting helpers ----------------------------------------------------------


def test_decay_window_and_fit():
    t = np.arange(60)
    M = np.exp(-0.1 * t)
    M[40:] = 1e-3
    w = R.decay_window(M, 0.5, 0.01)
    assert w.start == 7 and M[w.stop - 1] > 0.01 and M[w.stop] <= 0.01
    assert R.fit_decay_rate(t, M, w) == pytest.approx(0.1, rel=1e-10)


def test_decay_window_never_below():
    assert R.decay_window(np.ones(10), 0.5, 0.1) == slice(0, 0)
    with pytest.raises(ValueError):
        R.fit_decay_rate(np.arange(10), np.ones(10), slice(0, 1))
