import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfemto.config import default_config
from hybridfemto.load import (
    LoadDistribution,
    expected_min,
    expected_min_poisson,
    p_busy_f,
    p_busy_m,
    poisson_cdf,
    poisson_pmf,
    thin,
    uout_pgf,
    uout_pmf,
    voronoi_area_pdf,
)
from hybridfemto.specfun import integrate

MEANS = [0.01, 0.7, 4.71238898038469, 12.0, 40.0]
CAPS = [0, 1, 5, 10, 20]


@pytest.mark.parametrize("mean", MEANS)
@pytest.mark.parametrize("cap", CAPS)
def test_closed_form_min_matches_direct_sum(mean, cap):
    n = np.arange(0, 400)
    direct = float(np.sum(np.minimum(n, cap) * poisson_pmf(n, mean)))
    assert expected_min_poisson(mean, cap) == pytest.approx(direct, abs=1e-10)


def test_poisson_cdf_against_mpmath():
    for n, m in [(0, 1.0), (5, 4.7), (20, 4.7), (200, 180.0)]:
        exact = float(mpmath.nsum(lambda k: mpmath.e ** (-m) * mpmath.mpf(m) ** k / mpmath.factorial(k), [0, n]))
        assert poisson_cdf(n, m) == pytest.approx(exact, rel=1e-11)
    assert poisson_cdf(-1, 2.0) == 0.0


def test_voronoi_density_normalised_with_mean_cell_area():
    lm = 1e-5
    total = integrate(lambda s: voronoi_area_pdf(s, lm), 0.0, math.inf, points=[1e5, 1e6])
    mean = integrate(lambda s: s * voronoi_area_pdf(s, lm), 0.0, math.inf, points=[1e5, 1e6])
    assert total == pytest.approx(1.0, rel=1e-9)
    assert mean == pytest.approx(1.0 / lm, rel=1e-9)


def test_uout_pmf_is_taylor_series_of_generating_function():
    cfg = default_config()
    ratio = cfg.lambda_out / cfg.lambda_m
    mpmath.mp.dps = 30
    coeffs = mpmath.taylor(lambda z: mpmath.mpf(3.5) ** 3.5 * (3.5 - ratio * (z - 1)) ** -3.5, 0, 5)
    for i in range(6):
        assert uout_pmf(i, cfg) == pytest.approx(float(coeffs[i]), rel=1e-6)
    assert float(uout_pgf(1.0, ratio)) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(ratio=st.floats(1e-3, 300.0))
def test_uout_pmf_normalised_with_mean(ratio):
    loads = LoadDistribution(1.0, 1.0, ratio)
    p = loads.uout_table()
    assert p.sum() == pytest.approx(1.0, abs=1e-11)
    assert float(np.sum(np.arange(len(p)) * p)) == pytest.approx(ratio, rel=1e-8)


def test_busy_probabilities_two_ways():
    cfg = default_config()
    assert p_busy_f(cfg) == pytest.approx(p_busy_f(cfg, method="sum"), abs=1e-10)
    assert p_busy_m(cfg) == pytest.approx(p_busy_m(cfg, method="sum"), abs=1e-10)
    assert 0.0 < p_busy_f(cfg) < 1.0 and 0.0 < p_busy_m(cfg) < 1.0
    with pytest.raises(ValueError):
        p_busy_f(cfg, method="bogus")


def test_busy_probability_limits():
    cfg = default_config()
    assert p_busy_m(cfg.replace(lambda_out=0.0)) == 0.0
    assert p_busy_m(cfg.replace(lambda_out=1.0)) == pytest.approx(1.0, abs=1e-9)
    assert p_busy_f(cfg.replace(lambda_s=0.0, lambda_in=0.0)) == 0.0
    # closed access: only reserved subchannels are ever used
    closed = cfg.replace(M_s=0)
    assert p_busy_f(closed) == pytest.approx(expected_min_poisson(closed.mean_us, 20) / 20)


@settings(max_examples=40, deadline=None)
@given(ms=st.integers(0, 20), ls=st.floats(0, 0.05), li=st.floats(0, 0.05))
def test_busy_f_bounded_and_consistent(ms, ls, li):
    cfg = default_config().replace(M_s=ms, lambda_s=ls, lambda_in=li)
    p = p_busy_f(cfg)
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx(p_busy_f(cfg, method="sum"), abs=1e-10)


def test_thinning():
    cfg = default_config()
    th = thin(cfg)
    assert th.lambda_m_prime == pytest.approx(cfg.lambda_m * th.p_busy_m)
    assert th.lambda_f_prime == pytest.approx(cfg.lambda_f * th.p_busy_f)
    assert th.lambda_c_prime is None
    cl = thin(default_config("cluster"))
    assert cl.lambda_c_prime == pytest.approx(0.00127 * p_busy_f(default_config("cluster")))
    assert cl.lambda_p == 1e-5


def test_expected_min_table():
    p = poisson_pmf(np.arange(100), 3.0)
    assert expected_min(p, 100) == pytest.approx(3.0, rel=1e-12)
    assert expected_min(p, 0) == 0.0
