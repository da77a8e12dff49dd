"""Fading models for the interference links.

The serving link always sees Rayleigh fading (``h ~ Exp(mu)``); the
interference fading ``g`` may follow any of the models below. Each model
exposes the handful of expectations the analytic formulas need, plus a
sampler for the simulator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .specfun import QuadratureSpec, integrate, upper_incomplete_gamma

__all__ = ["FadingModel", "RayleighFading", "GammaFading", "DensityFading"]


class FadingModel:
    """Distribution of the interference-link power fading ``g >= 0``."""

    name = "general"

    def pdf(self, g):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def expect(self, fn: Callable[[float], float], spec: Optional[QuadratureSpec] = None) -> float:
        """``E[fn(g)]`` by quadrature against the density."""
        spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)
        return integrate(lambda g: self.pdf(g) * fn(g), 0.0, math.inf, spec)

    def fractional_moment(self, delta: float) -> float:
        if delta == 0:
            return 1.0
        return self.expect(lambda g: g**delta)

    def laplace(self, s: float) -> float:
        if s == 0:
            return 1.0
        return self.expect(lambda g: math.exp(-s * g))

    def tail_moment(self, delta: float, x: float) -> float:
        """``E[g**delta * Gamma(-delta, x*g)]`` for ``0 < delta < 1``, ``x > 0``.

        Uses ``g**d Gamma(-d, x g) = (x**-d e**(-x g) - g**d Gamma(1-d, x g)) / d``,
        which stays finite as ``g -> 0``.
        """
        if x <= 0:
            raise ValueError("tail_moment requires x > 0")

        def term(g):
            if g == 0.0:
                return x**-delta / delta
            return (x**-delta * math.exp(-x * g) - g**delta * upper_incomplete_gamma(1.0 - delta, x * g)) / delta

        return self.expect(term)


@dataclass(frozen=True)
class RayleighFading(FadingModel):
    """Exponential power fading with rate ``mu``."""

    mu: float = 1.0
    name = "rayleigh"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("Rayleigh parameter mu must be positive")

    def pdf(self, g):
        return self.mu * np.exp(-self.mu * np.asarray(g, dtype=float))

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.mu, size)

    def fractional_moment(self, delta):
        return self.mu**-delta * math.gamma(1.0 + delta)

    def laplace(self, s):
        return self.mu / (self.mu + s)


@dataclass(frozen=True)
class GammaFading(FadingModel):
    """Nakagami-m power fading: ``g ~ Gamma(m, rate=m*mu)``, mean ``1/mu``.

    ``m = 1`` recovers :class:`RayleighFading`.
    """

    m: float = 2.0
    mu: float = 1.0
    name = "gamma"

    def __post_init__(self):
        if not (self.m > 0 and self.mu > 0):
            raise ValueError("gamma fading needs m > 0 and mu > 0")

    @property
    def rate(self) -> float:
        return self.m * self.mu

    def pdf(self, g):
        g = np.asarray(g, dtype=float)
        with np.errstate(divide="ignore"):
            logp = self.m * math.log(self.rate) + (self.m - 1) * np.log(g) - self.rate * g - special.gammaln(self.m)
        return np.exp(logp)

    def sample(self, rng, size):
        return rng.gamma(self.m, 1.0 / self.rate, size)

    def fractional_moment(self, delta):
        return math.exp(special.gammaln(self.m + delta) - special.gammaln(self.m)) * self.rate**-delta

    def laplace(self, s):
        return (1.0 + s / self.rate) ** -self.m


@dataclass(frozen=True)
class DensityFading(FadingModel):
    """Arbitrary fading given by a density and (optionally) a sampler."""

    density: Callable[[float], float] = field(default=None)
    sampler: Optional[Callable[[np.random.Generator, object], np.ndarray]] = None
    name = "density"

    def pdf(self, g):
        return self.density(g)

    def sample(self, rng, size):
        if self.sampler is None:
            raise NotImplementedError("DensityFading was built without a sampler")
        return self.sampler(rng, size)
