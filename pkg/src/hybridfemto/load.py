"""UE counts per cell and subchannel occupancy probabilities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .config import NetworkConfig
from .specfun import gamma_fn, upper_incomplete_gamma

__all__ = [
    "VORONOI_SHAPE",
    "TAIL_MASS",
    "LoadDistribution",
    "ThinnedIntensities",
    "voronoi_area_pdf",
    "uout_pgf",
    "uout_pmf",
    "poisson_pmf",
    "poisson_cdf",
    "expected_min_poisson",
    "expected_min",
    "p_busy_f",
    "p_busy_m",
    "thin",
]

# shape parameter of the gamma approximation to the Voronoi cell area
VORONOI_SHAPE = 3.5
# count sums stop once this much probability mass is left in the tail
TAIL_MASS = 1e-12


def voronoi_area_pdf(S, lambda_m: float):
    """Approximate density of the area of a typical macro cell."""
    S = np.asarray(S, dtype=float)
    x = S * lambda_m
    c = 343.0 / 15.0 * math.sqrt(7.0 / (2.0 * math.pi))
    out = c * x**2.5 * np.exp(-3.5 * x) * lambda_m
    return float(out) if out.ndim == 0 else out


def uout_pgf(z, ratio: float):
    """Generating function of the outside-nonsubscriber count of a macro cell.

    ``ratio`` is ``lambda_out / lambda_m``.
    """
    a = VORONOI_SHAPE
    return a**a * (a - ratio * (np.asarray(z, dtype=float) - 1.0)) ** (-a)


def _uout_pmf_ratio(i, ratio: float):
    i = np.asarray(i, dtype=float)
    a = VORONOI_SHAPE
    if ratio == 0:
        return np.where(i == 0, 1.0, 0.0)
    # Taylor coefficients of the generating function at z = 0:
    # a^a b^i (a+b)^(-a-i) (a)_i / i!
    log_p = (
        a * math.log(a / (a + ratio))
        + i * math.log(ratio / (a + ratio))
        + special.gammaln(a + i)
        - special.gammaln(a)
        - special.gammaln(i + 1.0)
    )
    return np.exp(log_p)


def uout_pmf(i, cfg: NetworkConfig):
    """``P{U_out = i}`` for a typical macro cell (vectorised over ``i``)."""
    out = _uout_pmf_ratio(i, cfg.lambda_out / cfg.lambda_m)
    return float(out) if np.ndim(out) == 0 else out


def poisson_pmf(i, mean: float):
    i = np.asarray(i, dtype=float)
    if mean == 0:
        out = np.where(i == 0, 1.0, 0.0)
    else:
        out = np.exp(i * math.log(mean) - mean - special.gammaln(i + 1.0))
    return float(out) if out.ndim == 0 else out


def poisson_cdf(n: int, mean: float) -> float:
    """``P{N <= n}`` for ``N ~ Poisson(mean)`` as ``Gamma(n+1, mean) / n!``."""
    if n < 0:
        return 0.0
    if mean == 0:
        return 1.0
    if n > 160:
        # n! overflows soon after; use the regularised form directly
        return float(special.gammaincc(n + 1, mean))
    return upper_incomplete_gamma(n + 1.0, mean) / gamma_fn(n + 1.0)


def expected_min_poisson(mean: float, cap: int) -> float:
    """``E[min(N, cap)]`` for ``N ~ Poisson(mean)`` in incomplete-gamma form.

    Equals ``cap + mean * F(cap - 1) - cap * F(cap)`` with ``F`` the Poisson
    cdf.
    """
    if cap <= 0 or mean == 0:
        return 0.0
    return cap + mean * poisson_cdf(cap - 1, mean) - cap * poisson_cdf(cap, mean)


def _support(pmf, start: int = 64) -> np.ndarray:
    """pmf values on 0..n with n grown until the tail mass is below TAIL_MASS."""
    n = start
    while True:
        p = pmf(np.arange(n + 1))
        if p.sum() >= 1.0 - TAIL_MASS or n > 10**8:
            return p
        n *= 2


def expected_min(pmf_values: np.ndarray, cap: int) -> float:
    """Truncated direct sum ``sum_i min(i, cap) p_i``."""
    i = np.arange(len(pmf_values))
    return float(np.sum(np.minimum(i, cap) * pmf_values))


@dataclass(frozen=True)
class LoadDistribution:
    """Count distributions attached to one FAP and one MBS."""

    mean_us: float
    mean_uin: float
    uout_ratio: float

    @classmethod
    def from_config(cls, cfg: NetworkConfig) -> "LoadDistribution":
        return cls(cfg.mean_us, cfg.mean_uin, cfg.lambda_out / cfg.lambda_m)

    def us_pmf(self, i):
        return poisson_pmf(i, self.mean_us)

    def uin_pmf(self, i):
        return poisson_pmf(i, self.mean_uin)

    def uout_pmf(self, i):
        out = _uout_pmf_ratio(i, self.uout_ratio)
        return float(out) if np.ndim(out) == 0 else out

    def us_table(self) -> np.ndarray:
        return _support(lambda i: poisson_pmf(i, self.mean_us))

    def uin_table(self) -> np.ndarray:
        return _support(lambda i: poisson_pmf(i, self.mean_uin))

    def uout_table(self) -> np.ndarray:
        return _support(lambda i: _uout_pmf_ratio(i, self.uout_ratio))

    @property
    def truncation(self) -> int:
        return max(len(self.us_table()), len(self.uin_table()), len(self.uout_table())) - 1


def p_busy_f(cfg: NetworkConfig, method: str = "gamma") -> float:
    """Probability that a given subchannel is used by an FAP.

    ``method="gamma"`` uses the incomplete-gamma closed form; ``"sum"`` the
    truncated direct sums over the Poisson counts.
    """
    if method == "gamma":
        total = expected_min_poisson(cfg.mean_us, cfg.M_r) + expected_min_poisson(cfg.mean_uin, cfg.M_s)
    elif method == "sum":
        loads = LoadDistribution.from_config(cfg)
        total = expected_min(loads.us_table(), cfg.M_r) + expected_min(loads.uin_table(), cfg.M_s)
    else:
        raise ValueError(f"unknown method {method!r}")
    return total / cfg.M


def p_busy_m(cfg: NetworkConfig, method: str = "finite") -> float:
    """Probability that a given subchannel is used by an MBS.

    ``"finite"`` evaluates ``M - sum_{i<M} (M - i) p_i`` exactly; ``"sum"``
    truncates ``sum_i min(i, M) p_i`` once the tail mass is negligible.
    """
    M = cfg.M
    if method == "finite":
        i = np.arange(M)
        p = uout_pmf(i, cfg)
        total = M - float(np.sum((M - i) * p))
    elif method == "sum":
        total = expected_min(LoadDistribution.from_config(cfg).uout_table(), M)
    else:
        raise ValueError(f"unknown method {method!r}")
    return min(max(total / M, 0.0), 1.0)


@dataclass(frozen=True)
class ThinnedIntensities:
    """Intensities of the access points active on one given subchannel."""

    p_busy_f: float
    p_busy_m: float
    lambda_m_prime: float
    lambda_f_prime: float
    lambda_c_prime: Optional[float] = None
    lambda_p: Optional[float] = None


def thin(cfg: NetworkConfig) -> ThinnedIntensities:
    pf = p_busy_f(cfg)
    pm = p_busy_m(cfg)
    if cfg.clustered:
        return ThinnedIntensities(pf, pm, cfg.lambda_m * pm, cfg.lambda_f * pf, cfg.lambda_c * pf, cfg.lambda_p)
    return ThinnedIntensities(pf, pm, cfg.lambda_m * pm, cfg.lambda_f * pf)
