import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as si

from hybridfemto.analytic_ppp import (
    InterferenceContext,
    SinrCurve,
    beta_factor,
    default_thresholds,
    rate_from_cdf,
    rho_factor,
    tau_f_alpha4,
    tau_f_general,
    tau_m_alpha4,
    tau_m_general,
    tau_m_rayleigh,
    varphi,
    zf_alpha4,
    zf_general,
    zm_alpha4,
    zm_general,
    zm_rayleigh,
)
from hybridfemto.config import default_config
from hybridfemto.fading import GammaFading, RayleighFading

CTX = InterferenceContext.from_config(default_config())


def test_varphi_closed_form_at_alpha4():
    for T in default_thresholds(25, 1e-3, 1e3):
        assert varphi(T, 4.0) == pytest.approx(math.sqrt(T) * math.atan(math.sqrt(T)), abs=1e-9)
    assert varphi(0.0, 4.0) == 0.0


@pytest.mark.parametrize("T", [0.01, 0.3, 1.0, 7.0, 100.0])
def test_macro_chain_agrees(T):
    a = zm_general(T, CTX)
    b = zm_rayleigh(T, CTX)
    c = float(zm_alpha4(T, CTX))
    assert a == pytest.approx(b, abs=1e-9)
    assert b == pytest.approx(c, abs=1e-9)


@pytest.mark.parametrize("T", [0.01, 0.3, 1.0, 7.0, 100.0])
def test_femto_general_matches_closed_form(T):
    assert zf_general(T, CTX) == pytest.approx(float(zf_alpha4(T, CTX)), abs=1e-9)


def _laplace_oracle_macro(T, ctx):
    # Z_m through the Laplace functional of the interference, evaluated by plain nested quadrature
    cfg, th, g = ctx.cfg, ctx.thinned, ctx.fading
    a, mu = cfg.alpha, cfg.mu

    def log_lt(r):
        s = mu * T * r**a
        mbs = si.quad(lambda x: (1 - g.laplace(s * x**-a)) * x, r, np.inf, limit=200)[0]
        fap = si.quad(lambda x: (1 - g.laplace(s * cfg.W * cfg.P_f / cfg.P_m * x**-a)) * x, 0, np.inf, limit=200)[0]
        return -2 * math.pi * (th.lambda_m_prime * mbs + th.lambda_f_prime * fap)

    lm = cfg.lambda_m
    f = lambda r: 2 * math.pi * lm * r * math.exp(-math.pi * lm * r * r + log_lt(r))
    return 1.0 - si.quad(f, 0, np.inf, limit=200, points=None)[0]


def _laplace_oracle_femto(T, ctx):
    cfg, th, g = ctx.cfg, ctx.thinned, ctx.fading
    a, mu = cfg.alpha, cfg.mu

    def lt(r):
        s = mu * T * r**a
        mbs = si.quad(lambda x: (1 - g.laplace(s * cfg.W * cfg.P_m / cfg.P_f * x**-a)) * x, 0, np.inf, limit=200)[0]
        fap = si.quad(lambda x: (1 - g.laplace(s * cfg.W**2 * x**-a)) * x, 0, np.inf, limit=200)[0]
        return math.exp(-2 * math.pi * (th.lambda_m_prime * mbs + th.lambda_f_prime * fap))

    return 1.0 - si.quad(lambda r: 2 * r / cfg.R_f**2 * lt(r), 0, cfg.R_f, limit=200)[0]


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("fading", [GammaFading(2.0, 1.0), GammaFading(0.7, 1.0)])
@pytest.mark.parametrize("T", [0.1, 2.0])
def test_general_fading_against_laplace_functional(fading, T):
    ctx = InterferenceContext.from_config(default_config(), fading)
    assert not ctx.rayleigh
    assert zm_general(T, ctx) == pytest.approx(_laplace_oracle_macro(T, ctx), abs=1e-6)
    assert zf_general(T, ctx) == pytest.approx(_laplace_oracle_femto(T, ctx), abs=1e-6)


def test_gamma_fading_with_unit_shape_is_rayleigh():
    ctx = InterferenceContext.from_config(default_config(), GammaFading(1.0, 1.0))
    assert zm_general(1.5, ctx) == pytest.approx(zm_rayleigh(1.5, CTX), abs=1e-9)


def test_noise_only_limits():
    # no active interferers: only the noise floor limits SINR
    cfg = default_config().replace(lambda_out=0.0, lambda_s=0.0, lambda_in=0.0, sigma2=1e-12, alpha=3.5)
    ctx = InterferenceContext.from_config(cfg)
    T = 2.0
    lm = cfg.lambda_m
    macro = 1 - si.quad(lambda r: 2 * math.pi * lm * r * math.exp(-math.pi * lm * r * r - T * r**3.5 * 1e-12 / cfg.P_m),
                        0, np.inf, limit=200)[0]
    femto = 1 - si.quad(lambda r: 2 * r / 100 * math.exp(-T * r**3.5 * 1e-12 / cfg.P_f), 0, 10)[0]
    assert zm_general(T, ctx) == pytest.approx(macro, abs=1e-9)
    assert zm_rayleigh(T, ctx) == pytest.approx(macro, abs=1e-9)
    assert zf_general(T, ctx) == pytest.approx(femto, abs=1e-9)


def test_rates_agree_across_routes():
    assert tau_m_rayleigh(CTX) == pytest.approx(tau_m_alpha4(CTX), rel=1e-7)
    assert tau_m_general(CTX) == pytest.approx(tau_m_alpha4(CTX), rel=1e-7)
    assert tau_f_general(CTX) == pytest.approx(tau_f_alpha4(CTX), rel=1e-7)


def test_rate_cdf_identity():
    assert rate_from_cdf(lambda T: float(zm_alpha4(T, CTX))) == pytest.approx(tau_m_alpha4(CTX), rel=1e-7)
    assert rate_from_cdf(lambda T: float(zf_alpha4(T, CTX))) == pytest.approx(tau_f_alpha4(CTX), rel=1e-7)


def test_femto_rate_infinite_without_interference():
    cfg = default_config().replace(lambda_out=0.0, lambda_s=0.0, lambda_in=0.0)
    assert tau_f_alpha4(InterferenceContext.from_config(cfg)) == math.inf


def test_factors_and_guards():
    assert rho_factor(4.0, CTX) > 0
    assert beta_factor(0.0, 4.0, CTX) == 0.0
    with pytest.raises(ValueError):
        beta_factor(1.0, 4.0, InterferenceContext.from_config(default_config().replace(lambda_out=0.0)))
    noisy = InterferenceContext.from_config(default_config().replace(sigma2=1e-13))
    with pytest.raises(ValueError):
        zm_alpha4(1.0, noisy)
    with pytest.raises(ValueError):
        zm_rayleigh(1.0, InterferenceContext.from_config(default_config(), GammaFading(2.0, 1.0)))
    assert InterferenceContext.from_config(default_config(), RayleighFading(2.0)).rayleigh is False


def test_sinr_curve_validation_and_distances():
    T = default_thresholds(5)
    a = SinrCurve(T, [0.1, 0.2, 0.3, 0.4, 0.5])
    b = SinrCurve(T, [0.1, 0.25, 0.3, 0.4, 0.45])
    assert a.is_monotone()
    assert a.sup_distance(b) == pytest.approx(0.05)
    assert a.l1_distance(b) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        SinrCurve(T[::-1], a.cdf)
    with pytest.raises(ValueError):
        SinrCurve(T, [0, 0, 0, 0, 1.5])
    with pytest.raises(ValueError):
        a.sup_distance(SinrCurve(default_thresholds(5, 0.1, 10), a.cdf))


@settings(max_examples=25, deadline=None)
@given(
    lambda_out=st.floats(1e-6, 1e-2),
    ms=st.integers(0, 20),
    w_db=st.floats(-20, 0),
    alpha=st.floats(2.5, 5.5),
)
def test_curves_are_cdfs(lambda_out, ms, w_db, alpha):
    cfg = default_config().with_overrides([f"lambda_out={lambda_out}", f"M_s={ms}", f"W_dB={w_db}", f"alpha={alpha}"])
    ctx = InterferenceContext.from_config(cfg)
    T = default_thresholds(8)
    zm = np.array([zm_rayleigh(t, ctx) for t in T])
    zf = np.array([zf_general(t, ctx) for t in T])
    for z in (zm, zf):
        assert np.all((z >= 0) & (z <= 1))
        assert np.all(np.diff(z) >= -1e-9)
    if alpha == 4.0:
        assert np.allclose(zm, zm_alpha4(T, ctx), atol=1e-8)


def test_macro_ue_worse_than_femto_ue_at_defaults():
    T = default_thresholds()
    assert np.all(zf_alpha4(T, CTX) <= zm_alpha4(T, CTX))
