import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as si

from hybridfemto.analytic_cluster import (
    ClusterKernelCache,
    disk_arc,
    eta,
    tau_f_cluster,
    tau_m_cluster,
    zf_cluster,
    zm_cluster,
)
from hybridfemto.analytic_ppp import InterferenceContext, default_thresholds, zf_alpha4
from hybridfemto.config import default_config
from hybridfemto.specfun import panel_rule

CFG = default_config("cluster")
CTX = InterferenceContext.from_config(CFG)
CACHE = ClusterKernelCache.from_context(CTX)
R = CFG.R_c
LC = CTX.thinned.lambda_c_prime


def _arc_oracle(rho, d, radius):
    # plain arccos form, fine away from tangency
    if rho <= abs(radius - d):
        return 2 * math.pi * rho if d < radius else 0.0
    if rho >= d + radius:
        return 0.0
    c = (rho * rho + d * d - radius * radius) / (2 * rho * d)
    return 2 * rho * math.acos(max(-1.0, min(1.0, c)))


def _disk_oracle(s, d):
    # 2-D integral over the disk in Cartesian coordinates
    f = lambda y, x: 1.0 / (1.0 + math.hypot(x + d, y) ** CFG.alpha / s)
    return si.dblquad(f, -R, R, lambda x: -math.sqrt(R * R - x * x), lambda x: math.sqrt(R * R - x * x),
                      epsabs=1e-10, epsrel=1e-10)[0]


def _disk_1d_oracle(s, d):
    f = lambda rho: _arc_oracle(rho, d, R) / (1.0 + rho**CFG.alpha / s)
    lo, hi = max(d - R, 0.0), d + R
    pts = [p for p in (abs(R - d), s ** (1 / CFG.alpha)) if lo < p < hi]
    return si.quad(f, lo, hi, points=pts or None, epsabs=0, epsrel=1e-12, limit=400)[0]


def _outer_oracle(s):
    f = lambda d: -math.expm1(-LC * _disk_1d_oracle(s, d)) * d
    a = s ** (1 / CFG.alpha)
    pts = sorted({R, a, R + a} - {0.0})
    near = si.quad(f, 0, 4 * (R + a), points=pts, epsabs=0, epsrel=1e-10, limit=400)[0]
    tail = si.quad(f, 4 * (R + a), np.inf, epsabs=0, epsrel=1e-10, limit=400)[0]
    return 2 * math.pi * (near + tail)


@pytest.mark.parametrize("rho, d", [(10.0, 0.0), (30.0, 20.0), (80.0, 60.0), (5.0, 200.0), (210.0, 200.0),
                                    (49.0, 1.0), (1e-3, 1e4)])
def test_disk_arc_matches_arccos_and_monte_carlo(rho, d):
    got = float(disk_arc(rho, d, R))
    assert got == pytest.approx(_arc_oracle(rho, d, R), rel=1e-10, abs=1e-12)
    theta = np.linspace(0, 2 * np.pi, 200001)[:-1]
    inside = (rho * np.cos(theta) - d) ** 2 + (rho * np.sin(theta)) ** 2 <= R * R
    assert got == pytest.approx(2 * np.pi * rho * inside.mean(), abs=2 * np.pi * rho * 2e-5)


def test_disk_arc_far_away_keeps_precision():
    # the chord-angle for a tiny disk far away, compared with the small-angle value
    d, radius = 1e8, 1.0
    got = float(disk_arc(d, d, radius))
    assert got == pytest.approx(2.0 * radius, rel=1e-6)


def test_disk_integral_centred_closed_form():
    # alpha = 4, s = 1: 2 pi int_0^R rho / (1 + rho^4) d rho = pi * atan(R^2)
    assert float(CACHE.disk_integral(1.0, 0.0)[0]) == pytest.approx(math.pi * math.atan(R * R), rel=1e-9)


@pytest.mark.parametrize("s, d", [(1.0, 70.0), (1e6, 30.0), (1e7, 120.0), (1e9, 0.0)])
def test_disk_integral_against_double_quadrature(s, d):
    assert float(CACHE.disk_integral(s, d)[0]) == pytest.approx(_disk_oracle(s, d), rel=1e-7)


def test_eta_range_and_trivial_cases():
    d = np.linspace(0, 500, 50)
    e = eta(1e7, d, CACHE)
    assert np.all((e > 0) & (e <= 1))
    assert np.all(np.diff(e) >= -1e-15)  # farther clusters hurt less
    assert eta(0.0, 3.0, CACHE) == 1.0
    empty = ClusterKernelCache(R, 0.0, 4.0, 1e-5)
    assert np.all(empty.eta(1e7, d) == 1.0)
    assert empty.outer(1e7) == 0.0


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("s", [1e2, 1e6, 1e8, 1e11])
def test_outer_against_nested_oracle(s):
    assert CACHE.outer_direct(s) == pytest.approx(_outer_oracle(s), rel=1e-6)


@pytest.mark.parametrize("s", [1e-3, 1e3, 1e7, 1e10, 1e14])
def test_outer_below_linearised_bound(s):
    # 1 - exp(-x) <= x turns the outer integral into the PPP value
    bound = CACHE.small_s_ratio() * s ** CACHE.delta
    assert 0 < CACHE.outer_direct(s) <= bound * (1 + 1e-9)


def test_outer_fast_matches_direct_on_random_probes():
    rng = np.random.default_rng(7)
    # table spans a / R_c in [1e-5, 1e7]
    log_a = rng.uniform(math.log(R * 1e-5), math.log(R * 1e7), 100)
    s = np.exp(CFG.alpha * log_a)
    fast = CACHE.outer_fast(s)
    direct = np.array([CACHE.outer_direct(v) for v in s])
    assert np.max(np.abs(fast / direct - 1)) < 1e-6


def test_outer_fast_asymptotes():
    tiny, huge = 1e-30, 1e60
    assert float(CACHE.outer_fast(tiny)) == pytest.approx(CACHE.small_s_ratio() * tiny**CACHE.delta, rel=1e-12)
    assert float(CACHE.outer_fast(huge)) == pytest.approx(CACHE.large_s_ratio() * huge**CACHE.delta, rel=1e-12)
    assert CACHE.outer_direct(1e-12) == pytest.approx(CACHE.small_s_ratio() * 1e-12**CACHE.delta, rel=1e-5)


@pytest.mark.parametrize("s, r", [(1e5, 3.0), (1e7, 8.0), (1e9, 0.5), (1e3, 10.0)])
def test_palm_disk_against_polar_grid(s, r):
    # tensor Gauss rule over the serving disk in polar coordinates around its centre
    t, wt = panel_rule(np.array([np.linspace(0, R, 41)]), 12)
    th, wth = panel_rule(np.array([np.linspace(0, 2 * np.pi, 41)]), 12)
    t, wt, th, wth = t[0], wt[0], th[0], wth[0]
    dist = np.hypot(t[:, None] * np.cos(th)[None, :] - r, t[:, None] * np.sin(th)[None, :])
    vals = CACHE.eta(s, dist.ravel()).reshape(dist.shape)
    oracle = float(np.sum(vals * (t * wt)[:, None] * wth[None, :]))
    assert CACHE.palm_disk(s, r) == pytest.approx(oracle, rel=1e-5)


def test_shared_cache_ignores_unrelated_parameters():
    other = InterferenceContext.from_config(CFG.replace(W=0.5))
    assert ClusterKernelCache.from_context(other) is CACHE
    with pytest.raises(ValueError):
        ClusterKernelCache.from_context(InterferenceContext.from_config(default_config()))


def test_femto_cdf_vanishes_at_zero_and_is_worse_than_ppp():
    assert zf_cluster(0.0, CTX) == 0.0
    assert zf_cluster(1e-6, CTX) < 1e-3
    ppp = InterferenceContext.from_config(default_config())
    for T in (0.1, 1.0, 10.0, 100.0):
        assert zf_cluster(T, CTX) >= float(zf_alpha4(T, ppp))


def test_macro_cdf_is_monotone_cdf():
    T = default_thresholds(12)
    z = np.array([zm_cluster(t, CTX) for t in T])
    assert np.all((z >= 0) & (z <= 1)) and np.all(np.diff(z) > 0)


def test_macro_rate_grid_matches_nested():
    assert tau_m_cluster(CTX) == pytest.approx(tau_m_cluster(CTX, method="nested"), rel=1e-6)


def test_femto_rate_swap_matches_cdf_integral():
    # rate in nats is int_0^inf (1 - Z_f(T)) / (1 + T) dT; integrate in log T on a fixed rule
    lo, hi = -12.0, 20.0
    x, w = panel_rule(np.array([np.linspace(lo, hi, 13)]), 5)
    T = np.exp(x[0])
    ccdf = np.array([1 - zf_cluster(t, CTX) for t in T])
    ref = float(np.sum(ccdf * T / (1 + T) * w[0]))
    # below lo the CCDF is 1; above hi it decays like T^(-2/alpha)
    ref += math.log1p(math.exp(lo)) + (1 - zf_cluster(math.exp(hi), CTX)) * CFG.alpha / 2
    assert tau_f_cluster(CTX) == pytest.approx(ref, rel=5e-4)


def test_femto_rate_infinite_without_outside_interference():
    cfg = CFG.replace(lambda_out=0.0, lambda_p=0.0)
    ctx = InterferenceContext.from_config(cfg)
    assert tau_f_cluster(ctx) == math.inf


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        tau_m_cluster(CTX, method="bogus")
    with pytest.raises(ValueError):
        tau_f_cluster(CTX, method="bogus")


@settings(max_examples=20, deadline=None)
@given(s=st.floats(1.0, 1e12), d=st.floats(0.0, 1000.0))
def test_disk_integral_bounded_by_disk_area(s, d):
    val = float(CACHE.disk_integral(s, d)[0])
    assert 0 <= val <= math.pi * R * R * (1 + 1e-9)
