"""Per-class mean rates under equal time-sharing, and the analytic dispatcher.

A UE whose access point carries ``i`` UEs of its class with ``cap``
subchannels available gets a full subchannel when ``i <= cap`` and a
``cap / i`` time share otherwise. Class rates average that factor over the
load distribution seen by a UE (conditioned on at least one UE) and scale
the per-link rate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .analytic_cluster import ClusterKernelCache, tau_f_cluster, tau_m_cluster, zf_cluster, zm_cluster
from .analytic_ppp import (
    InterferenceContext,
    SinrCurve,
    default_thresholds,
    tau_f_alpha4,
    tau_f_general,
    tau_m_alpha4,
    tau_m_general,
    tau_m_rayleigh,
    zf_alpha4,
    zf_general,
    zm_alpha4,
    zm_general,
    zm_rayleigh,
)
from .config import NetworkConfig
from .fading import FadingModel
from .load import VORONOI_SHAPE, LoadDistribution

__all__ = [
    "RateReport",
    "time_share_factor",
    "tau_out",
    "tau_in",
    "tau_s",
    "tau_n",
    "class_rates",
    "Analysis",
]

_NATS_PER_BIT = math.log(2.0)


def time_share_factor(pmf_table: np.ndarray, cap: int, p_nonempty: float) -> float:
    """``E[min(1, cap / U) | U >= 1]`` from a truncated pmf table.

    ``p_nonempty`` is ``1 - P{U = 0}``, passed in exactly so that tiny
    loads do not cancel. Written as ``1 - sum_{i > cap} p_i (1 - cap/i) / p_nonempty``.
    """
    if cap <= 0:
        return 0.0
    if p_nonempty <= 0.0:
        # a lone UE always gets a subchannel
        return 1.0
    i = np.arange(cap + 1, len(pmf_table))
    excess = float(np.sum(pmf_table[cap + 1:] * (1.0 - cap / i))) if i.size else 0.0
    return min(max(1.0 - excess / p_nonempty, 0.0), 1.0)


def _poisson_nonempty(mean: float) -> float:
    return -math.expm1(-mean)


def _uout_nonempty(ratio: float) -> float:
    a = VORONOI_SHAPE
    return -math.expm1(-a * math.log1p(ratio / a))


def tau_out(tau_m_value: float, cfg: NetworkConfig) -> float:
    """Mean rate of an outside nonsubscriber (macro UE)."""
    if tau_m_value < 0:
        raise ValueError("tau_m must be non-negative")
    loads = LoadDistribution.from_config(cfg)
    return time_share_factor(loads.uout_table(), cfg.M, _uout_nonempty(loads.uout_ratio)) * tau_m_value


def tau_in(tau_f_value: float, cfg: NetworkConfig) -> float:
    """Mean rate of an inside nonsubscriber; 0 under closed access (``M_s = 0``)."""
    if tau_f_value < 0:
        raise ValueError("tau_f must be non-negative")
    if cfg.M_s == 0:
        return 0.0
    loads = LoadDistribution.from_config(cfg)
    return time_share_factor(loads.uin_table(), cfg.M_s, _poisson_nonempty(cfg.mean_uin)) * tau_f_value


def tau_s(tau_f_value: float, cfg: NetworkConfig) -> float:
    """Mean rate of a subscriber; 0 when every subchannel is shared (``M_s = M``)."""
    if tau_f_value < 0:
        raise ValueError("tau_f must be non-negative")
    if cfg.M_r == 0:
        return 0.0
    loads = LoadDistribution.from_config(cfg)
    return time_share_factor(loads.us_table(), cfg.M_r, _poisson_nonempty(cfg.mean_us)) * tau_f_value


def tau_n(tau_out_value: float, tau_in_value: float, cfg: NetworkConfig) -> float:
    """Population-weighted mean rate of all nonsubscribers."""
    if tau_out_value < 0 or tau_in_value < 0:
        raise ValueError("class rates must be non-negative")
    w_out = cfg.lambda_out
    w_in = cfg.lambda_f * cfg.lambda_in * cfg.femto_area
    if w_out + w_in == 0:
        raise ValueError("tau_n is undefined without nonsubscribers (lambda_out = lambda_in = 0)")
    if w_in == 0:
        return tau_out_value
    if w_out == 0:
        return tau_in_value
    return (w_out * tau_out_value + w_in * tau_in_value) / (w_out + w_in)


@dataclass(frozen=True)
class RateReport:
    """Per-link and per-class mean rates in nats/s/Hz."""

    tau_m: float
    tau_f: float
    tau_out: float
    tau_in: float
    tau_n: float
    tau_s: float
    config_hash: str

    def check(self, rel_tol: float = 1e-9) -> list[str]:
        """Violated ordering invariants (empty when consistent)."""
        slack = lambda x: rel_tol * max(abs(x), 1.0) if math.isfinite(x) else math.inf
        problems = []
        if not -slack(self.tau_m) <= self.tau_out <= self.tau_m + slack(self.tau_m):
            problems.append("tau_out outside [0, tau_m]")
        for name in ("tau_in", "tau_s"):
            v = getattr(self, name)
            if not -slack(self.tau_f) <= v <= self.tau_f + slack(self.tau_f):
                problems.append(f"{name} outside [0, tau_f]")
        lo, hi = sorted((self.tau_out, self.tau_in))
        if not lo - slack(lo) <= self.tau_n <= hi + slack(hi):
            problems.append("tau_n not between tau_out and tau_in")
        return problems

    def to_dict(self, bits: bool = False) -> dict:
        d = asdict(self)
        if bits:
            for k in ("tau_m", "tau_f", "tau_out", "tau_in", "tau_n", "tau_s"):
                d[k] = d[k] / _NATS_PER_BIT
        d["units"] = "bits/s/Hz" if bits else "nats/s/Hz"
        return d


def class_rates(tau_m_value: float, tau_f_value: float, cfg: NetworkConfig) -> RateReport:
    t_out = tau_out(tau_m_value, cfg)
    t_in = tau_in(tau_f_value, cfg)
    return RateReport(
        tau_m=tau_m_value,
        tau_f=tau_f_value,
        tau_out=t_out,
        tau_in=t_in,
        tau_n=tau_n(t_out, t_in, cfg),
        tau_s=tau_s(tau_f_value, cfg),
        config_hash=cfg.digest(),
    )


class Analysis:
    """Picks the cheapest valid analytic evaluator for a configuration.

    Clustered FAPs use the cluster evaluators (Rayleigh interference only).
    Poisson FAPs use the alpha=4 closed forms when they apply, the
    Rayleigh integral for the macro tier when interference is Rayleigh, and
    the general integrals otherwise.
    """

    def __init__(self, cfg: NetworkConfig, fading: Optional[FadingModel] = None):
        self.ctx = InterferenceContext.from_config(cfg, fading)
        self.cfg = cfg
        self._cache = ClusterKernelCache.from_context(self.ctx) if cfg.clustered else None

    @property
    def method(self) -> str:
        if self.cfg.clustered:
            return "cluster"
        if self.ctx.closed_form:
            return "closed_form"
        return "rayleigh" if self.ctx.rayleigh else "general"

    def _evaluators(self) -> tuple[Callable[[float], float], Callable[[float], float]]:
        ctx, m = self.ctx, self.method
        if m == "cluster":
            return (lambda T: zm_cluster(T, ctx, self._cache)), (lambda T: zf_cluster(T, ctx, self._cache))
        if m == "closed_form":
            return (lambda T: float(zm_alpha4(T, ctx))), (lambda T: float(zf_alpha4(T, ctx)))
        zm = zm_rayleigh if m == "rayleigh" else zm_general
        return (lambda T: zm(T, ctx)), (lambda T: zf_general(T, ctx))

    def curves(self, thresholds=None) -> tuple[SinrCurve, SinrCurve]:
        T = default_thresholds() if thresholds is None else np.asarray(thresholds, dtype=float)
        zm, zf = self._evaluators()
        suffix = "Cluster" if self.cfg.clustered else "PPP"
        macro = SinrCurve(T, [zm(t) for t in T], f"Macro{suffix}")
        femto = SinrCurve(T, [zf(t) for t in T], f"Femto{suffix}")
        return macro, femto

    def link_rates(self) -> tuple[float, float]:
        ctx, m = self.ctx, self.method
        if m == "cluster":
            return tau_m_cluster(ctx, self._cache), tau_f_cluster(ctx, self._cache)
        if m == "closed_form":
            return tau_m_alpha4(ctx), tau_f_alpha4(ctx)
        tm = tau_m_rayleigh(ctx) if m == "rayleigh" else tau_m_general(ctx)
        return tm, tau_f_general(ctx)

    def report(self) -> RateReport:
        tm, tf = self.link_rates()
        return class_rates(tm, tf, self.cfg)
