"""SINR distributions and mean rates with Poisson-distributed FAPs.

Macro UEs sit at the origin and are served by the nearest MBS; femto UEs
are uniform in the disk of radius ``R_f`` around their FAP. Interfering
MBSs and FAPs are the independently thinned processes from
:mod:`hybridfemto.load`. Three macro evaluators are provided, from the most
general (arbitrary interference fading) to the alpha=4 closed form, and
they must agree wherever their preconditions overlap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .config import NetworkConfig, check
from .fading import FadingModel, RayleighFading
from .load import ThinnedIntensities, thin
from .specfun import QuadratureSpec, gamma_fn, integrate

__all__ = [
    "SinrCurve",
    "InterferenceContext",
    "default_thresholds",
    "rate_from_cdf",
    "beta_factor",
    "zm_general",
    "tau_m_general",
    "varphi",
    "zm_rayleigh",
    "tau_m_rayleigh",
    "zm_alpha4",
    "tau_m_alpha4",
    "rho_factor",
    "zf_general",
    "tau_f_general",
    "zf_alpha4",
    "tau_f_alpha4",
]

_CURVE_TOL = 1e-6
# upper limit for t in rate integrals; expm1 overflows near 709
_T_RATE_MAX = 700.0


def default_thresholds(n: int = 60, lo: float = 1e-2, hi: float = 1e2) -> np.ndarray:
    """Log-spaced SINR thresholds (linear scale), -20 dB to +20 dB by default."""
    if n == 1:
        return np.array([lo])
    return np.logspace(math.log10(lo), math.log10(hi), n)


@dataclass
class SinrCurve:
    """CDF values ``Z(T)`` on an ascending grid of linear SINR thresholds."""

    thresholds: np.ndarray
    cdf: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        cdf = np.asarray(self.cdf, dtype=float)
        if self.thresholds.shape != cdf.shape or self.thresholds.ndim != 1:
            raise ValueError("thresholds and cdf must be 1-D arrays of equal length")
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly ascending")
        if np.any(cdf < -_CURVE_TOL) or np.any(cdf > 1 + _CURVE_TOL):
            raise ValueError("cdf values outside [0, 1]")
        self.cdf = np.clip(cdf, 0.0, 1.0)

    def is_monotone(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.diff(self.cdf) >= -tol))

    def sup_distance(self, other: "SinrCurve") -> float:
        self._check_grid(other)
        return float(np.max(np.abs(self.cdf - other.cdf)))

    def l1_distance(self, other: "SinrCurve") -> float:
        """Mean absolute CDF gap over the grid points."""
        self._check_grid(other)
        return float(np.mean(np.abs(self.cdf - other.cdf)))

    def _check_grid(self, other):
        if self.thresholds.shape != other.thresholds.shape or not np.allclose(
            self.thresholds, other.thresholds, rtol=1e-9, atol=0
        ):
            raise ValueError("curves are defined on different threshold grids")


@dataclass(frozen=True)
class InterferenceContext:
    """Everything the analytic evaluators need about one configuration."""

    cfg: NetworkConfig
    thinned: ThinnedIntensities
    fading: FadingModel = field(default=None)

    @classmethod
    def from_config(cls, cfg: NetworkConfig, fading: Optional[FadingModel] = None) -> "InterferenceContext":
        check(cfg)
        return cls(cfg, thin(cfg), fading if fading is not None else RayleighFading(cfg.mu))

    @property
    def delta(self) -> float:
        return 2.0 / self.cfg.alpha

    @property
    def rayleigh(self) -> bool:
        return isinstance(self.fading, RayleighFading) and self.fading.mu == self.cfg.mu

    @property
    def closed_form(self) -> bool:
        """Whether the alpha=4, noise-free, Rayleigh shortcuts apply."""
        return self.rayleigh and self.cfg.alpha == 4 and self.cfg.sigma2 == 0


def _require_rayleigh(ctx: InterferenceContext):
    if not ctx.rayleigh:
        raise ValueError("this evaluator needs Rayleigh interference fading with the serving-link mu")


def _require_closed_form(ctx: InterferenceContext):
    if not ctx.closed_form:
        raise ValueError("closed form needs alpha=4, sigma2=0 and Rayleigh interference fading")


def _gamma_product(delta: float) -> float:
    # Gamma(1 + d) Gamma(1 - d)
    return math.gamma(1.0 + delta) * math.gamma(1.0 - delta)


def rate_from_cdf(cdf: Callable[[float], float], spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-11)) -> float:
    """Mean of ``ln(1 + SINR)`` from its CDF: ``int_0^inf 1 - Z(e^t - 1) dt``."""
    return integrate(lambda t: 1.0 - cdf(math.expm1(t)), 0.0, _T_RATE_MAX, spec, points=[1.0, 5.0, 20.0])


# -- macro UEs, general interference fading ---------------------------------------------


def beta_factor(T: float, alpha: float, ctx: InterferenceContext) -> float:
    """Interference factor of the general macro-UE SINR distribution."""
    th, cfg = ctx.thinned, ctx.cfg
    if th.lambda_m_prime == 0:
        raise ValueError("beta is undefined when no MBS is active (lambda_m' = 0)")
    if T <= 0:
        return 0.0
    d = 2.0 / alpha
    mu_t = cfg.mu * T
    femto = 1.0 + th.lambda_f_prime * (cfg.W * cfg.P_f) ** d / (th.lambda_m_prime * cfg.P_m**d)
    inner = ctx.fading.tail_moment(d, mu_t) - femto * gamma_fn(-d) * ctx.fading.fractional_moment(d)
    return 2.0 * mu_t**d / alpha * inner


def _macro_decay_general(T: float, ctx: InterferenceContext) -> float:
    """``k`` with ``P(SINR > T | r) = exp(-pi k r^2)`` (noise aside), general fading.

    Written without dividing by lambda_m' so that an idle macro tier is a
    regular case: ``k = lambda_m + lambda_m'(beta - 1)`` expanded.
    """
    th, cfg = ctx.thinned, ctx.cfg
    d = ctx.delta
    mu_t = cfg.mu * T
    eg = ctx.fading.fractional_moment(d)
    macro = 0.0
    if th.lambda_m_prime > 0:
        x = 2.0 * mu_t**d / cfg.alpha * (ctx.fading.tail_moment(d, mu_t) - gamma_fn(-d) * eg)
        macro = th.lambda_m_prime * (x - 1.0)
    femto = th.lambda_f_prime * (mu_t * cfg.W * cfg.P_f / cfg.P_m) ** d * math.gamma(1.0 - d) * eg
    return cfg.lambda_m + macro + femto


def _macro_ccdf(T: float, k: float, ctx: InterferenceContext, spec: QuadratureSpec) -> float:
    """``pi lambda_m int_0^inf exp(-pi k v - mu T v^(a/2) sigma2 / P_m) dv``."""
    cfg = ctx.cfg
    if cfg.sigma2 == 0:
        noise = None
    else:
        c = cfg.mu * T * cfg.sigma2 / cfg.P_m
        scale = 1.0 / (math.pi * k)
        half = cfg.alpha / 2.0

        def noise(x):
            return c * (x * scale) ** half

    if noise is None:
        integral = integrate(lambda x: math.exp(-x), 0.0, math.inf, spec)
    else:
        integral = integrate(lambda x: math.exp(-x - noise(x)), 0.0, math.inf, spec)
    return cfg.lambda_m / k * integral


def zm_general(T: float, ctx: InterferenceContext, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """CDF of a macro UE's SINR for arbitrary interference fading."""
    if T <= 0:
        return 0.0
    return 1.0 - _macro_ccdf(T, _macro_decay_general(T, ctx), ctx, spec)


def _macro_double_integral(k_of_T: Callable[[float], float], ctx: InterferenceContext, spec: QuadratureSpec) -> float:
    """Rate as ``pi lambda_m int_v int_t exp(-pi v k(e^t - 1) - noise) dt dv``."""
    cfg = ctx.cfg
    k_cached = lru_cache(maxsize=None)(k_of_T)
    v_scale = 1.0 / (math.pi * cfg.lambda_m)
    half = cfg.alpha / 2.0

    def inner(x):
        v = x * v_scale

        def g(t):
            T = math.expm1(t)
            e = math.pi * v * k_cached(T) + cfg.mu * v**half * cfg.sigma2 * T / cfg.P_m
            return math.exp(-e)

        return integrate(g, 0.0, _T_RATE_MAX, spec, points=[1.0, 5.0, 20.0])

    # v = x / (pi lambda_m) turns pi lambda_m dv into dx
    return integrate(inner, 0.0, math.inf, spec)


def tau_m_general(ctx: InterferenceContext, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-7, abs_tol=1e-10)) -> float:
    """Mean rate (nats/s/Hz) of a macro UE, general fading, as a double integral."""
    return _macro_double_integral(lambda T: _macro_decay_general(T, ctx) if T > 0 else ctx.cfg.lambda_m, ctx, spec)


# -- macro UEs, Rayleigh interference -------------------------------------------------


@lru_cache(maxsize=65536)
def varphi(T: float, alpha: float) -> float:
    """``T^(2/a) int_{T^(-2/a)}^inf du / (1 + u^(a/2))``."""
    if T <= 0:
        return 0.0
    d = 2.0 / alpha
    lower = T**-d
    spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-300)
    val = integrate(lambda u: 1.0 / (1.0 + u ** (alpha / 2.0)), lower, math.inf, spec, points=[max(lower, 1.0) * 2])
    return T**d * val


def _macro_decay_rayleigh(T: float, ctx: InterferenceContext) -> float:
    th, cfg = ctx.thinned, ctx.cfg
    d = ctx.delta
    if T <= 0:
        return cfg.lambda_m
    femto = th.lambda_f_prime * (cfg.P_f * cfg.W * T / cfg.P_m) ** d * _gamma_product(d)
    return cfg.lambda_m + th.lambda_m_prime * varphi(T, cfg.alpha) + femto


def zm_rayleigh(T: float, ctx: InterferenceContext, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Macro-UE SINR CDF when interference links are Rayleigh faded."""
    _require_rayleigh(ctx)
    if T <= 0:
        return 0.0
    return 1.0 - _macro_ccdf(T, _macro_decay_rayleigh(T, ctx), ctx, spec)


def tau_m_rayleigh(ctx: InterferenceContext, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-7, abs_tol=1e-10)) -> float:
    _require_rayleigh(ctx)
    return _macro_double_integral(lambda T: _macro_decay_rayleigh(T, ctx), ctx, spec)


def _femto_macro_coupling(ctx: InterferenceContext) -> float:
    # (pi/2) (lambda_f'/lambda_m) sqrt(W P_f / P_m)
    cfg = ctx.cfg
    return 0.5 * math.pi * ctx.thinned.lambda_f_prime / cfg.lambda_m * math.sqrt(cfg.W * cfg.P_f / cfg.P_m)


def zm_alpha4(T, ctx: InterferenceContext):
    """Closed-form macro-UE SINR CDF (alpha=4, no noise, Rayleigh). Vectorised."""
    _require_closed_form(ctx)
    T = np.asarray(T, dtype=float)
    root = np.sqrt(np.maximum(T, 0.0))
    z = 1.0 - 1.0 / (1.0 + root * (np.arctan(root) * ctx.thinned.p_busy_m + _femto_macro_coupling(ctx)))
    return float(z) if z.ndim == 0 else z


def tau_m_alpha4(ctx: InterferenceContext) -> float:
    _require_closed_form(ctx)
    p = ctx.thinned.p_busy_m
    c = _femto_macro_coupling(ctx)
    spec = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-13)
    return integrate(lambda y: 2.0 / (math.tan(y) + (0.5 * math.pi - y) * p + c), 0.0, 0.5 * math.pi, spec)


# -- femto UEs -----------------------------------------------------------------------


def rho_factor(alpha: float, ctx: InterferenceContext) -> float:
    """Aggregate interference density seen by a femto UE (per unit v T^(2/a))."""
    th, cfg = ctx.thinned, ctx.cfg
    d = 2.0 / alpha
    load = th.lambda_m_prime * (cfg.W * cfg.P_m / cfg.P_f) ** d + th.lambda_f_prime * cfg.W ** (2.0 * d)
    return -2.0 * math.pi * cfg.mu**d / alpha * gamma_fn(-d) * load * ctx.fading.fractional_moment(d)


def zf_general(T: float, ctx: InterferenceContext, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """CDF of a femto UE's SINR (Poisson FAPs, any interference fading)."""
    if T <= 0:
        return 0.0
    cfg = ctx.cfg
    d = ctx.delta
    a = rho_factor(cfg.alpha, ctx) * T**d
    c = cfg.mu * T * cfg.sigma2 / cfg.P_f
    half = cfg.alpha / 2.0
    area = cfg.R_f**2
    knee = [1.0 / a] if a > 0 and 1.0 / a < area else None
    val = integrate(lambda v: math.exp(-a * v - c * v**half), 0.0, area, spec, points=knee)
    return 1.0 - val / area


def tau_f_general(ctx: InterferenceContext, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-7, abs_tol=1e-10)) -> float:
    """Mean femto-UE rate as the double integral over ``v`` and ``t``."""
    cfg = ctx.cfg
    d = ctx.delta
    rho = rho_factor(cfg.alpha, ctx)
    half = cfg.alpha / 2.0
    area = cfg.R_f**2

    def inner(v):
        c = cfg.mu * v**half * cfg.sigma2 / cfg.P_f

        def g(t):
            T = math.expm1(t)
            return math.exp(-rho * T**d * v - c * T)

        return integrate(g, 0.0, _T_RATE_MAX, spec, points=[1.0, 5.0, 20.0])

    return integrate(inner, 0.0, area, spec, points=[area * 1e-6, area * 1e-3]) / area


def zf_alpha4(T, ctx: InterferenceContext):
    """Closed-form femto-UE SINR CDF (alpha=4, no noise, Rayleigh). Vectorised."""
    _require_closed_form(ctx)
    T = np.asarray(T, dtype=float)
    x = rho_factor(4.0, ctx) * np.sqrt(np.maximum(T, 0.0)) * ctx.cfg.R_f**2
    with np.errstate(invalid="ignore", divide="ignore"):
        # (1 - e^-x)/x, with the x -> 0 limit 1
        ratio = np.where(x > 1e-8, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0 - 0.5 * x)
    z = 1.0 - ratio
    return float(z) if z.ndim == 0 else z


def tau_f_alpha4(ctx: InterferenceContext) -> float:
    _require_closed_form(ctx)
    A = rho_factor(4.0, ctx) * ctx.cfg.R_f**2
    if A == 0:
        return math.inf
    spec = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-13)
    f = lambda y: -math.expm1(-y) / (y * y + A * A)
    return 2.0 * integrate(f, 0.0, math.inf, spec, points=[A, 10 * A + 1.0])
