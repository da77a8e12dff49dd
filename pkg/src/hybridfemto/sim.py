"""Monte Carlo snapshots of the two-tier network.

Each snapshot draws MBSs, FAPs and outside nonsubscribers in a square
window, associates the nonsubscribers with their nearest MBS, assigns
subchannels by the hybrid-access rules and then measures the SINR of one
tagged macro UE and one tagged femto UE on a fixed tagged subchannel.

Snapshot ``k`` draws all its randomness from a Philox stream whose key is
the run seed and whose counter starts at ``k << 192``, so results do not
depend on how snapshots are split between workers.
"""
from __future__ import annotations

import enum
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .analytic_ppp import SinrCurve, default_thresholds
from .config import NetworkConfig, check
from .load import p_busy_f, p_busy_m
from .rates import RateReport, tau_n

__all__ = [
    "Tier",
    "Boundary",
    "SimSpec",
    "Snapshot",
    "SinrSample",
    "SimResult",
    "snapshot_rng",
    "sample_ppp",
    "sample_cluster",
    "build_snapshot",
    "tagged_sinr",
    "run",
    "empirical_curve",
]

TAGGED_CHANNEL = 0
_MIN_MBS = 50
_MAX_REDRAWS = 100


class Tier(str, enum.Enum):
    MACRO = "macro"
    FEMTO = "femto"
    BOTH = "both"


class Boundary(str, enum.Enum):
    TORUS = "torus"
    GUARD = "guard"


@dataclass(frozen=True)
class SimSpec:
    """Simulation window and run parameters.

    The core window is ``[-L, L]^2`` with ``L = window_half_width``. With
    ``boundary="guard"`` points are drawn in the window enlarged by
    ``margin`` and distances are Euclidean; with ``"torus"`` distances wrap
    around the core window. ``tagged_placement="palm"`` inserts the tagged
    FAP (and, for clustered FAPs, the rest of its cluster) at the window
    centre; ``"nearest"`` tags the drawn FAP closest to the centre.
    ``full_geometry`` measures the femto UE's interference from its true
    position instead of from its FAP's centre.
    """

    window_half_width: float = 2000.0
    snapshots: int = 1000
    seed: int = 0
    tagged_tier: Tier = Tier.BOTH
    boundary: Boundary = Boundary.TORUS
    margin: float = 500.0
    tagged_placement: str = "palm"
    full_geometry: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tagged_tier", Tier(self.tagged_tier))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.snapshots < 1:
            raise ValueError("snapshots must be >= 1")
        if not self.window_half_width > 0:
            raise ValueError("window_half_width must be positive")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if not 0 <= self.seed < 2**128:
            raise ValueError("seed must be a non-negative integer below 2**128")
        if self.tagged_placement not in ("palm", "nearest"):
            raise ValueError("tagged_placement must be 'palm' or 'nearest'")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")

    @property
    def sample_half_width(self) -> float:
        L = self.window_half_width
        return L if self.boundary is Boundary.TORUS else L + self.margin


def snapshot_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for snapshot ``index`` of a run with ``seed``."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))


# -- point processes --------------------------------------------------------------


def sample_ppp(intensity: float, half_width: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous Poisson points in ``[-half_width, half_width]^2``, shape ``(n, 2)``."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    n = rng.poisson(intensity * (2.0 * half_width) ** 2)
    return rng.uniform(-half_width, half_width, size=(n, 2))


def _uniform_disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _wrap(points: np.ndarray, half_width: float) -> np.ndarray:
    return np.mod(points + half_width, 2.0 * half_width) - half_width


def sample_cluster(
    lambda_p: float,
    lambda_c: float,
    R_c: float,
    half_width: float,
    rng: np.random.Generator,
    wrap: bool = False,
) -> np.ndarray:
    """Matern cluster points in ``[-half_width, half_width]^2``.

    Parents form a PPP of intensity ``lambda_p``; each has
    Poisson(``pi R_c^2 lambda_c``) daughters uniform in its disk. With
    ``wrap`` the parents are drawn in the window and daughters wrap around
    it (a torus); otherwise parents are drawn in the window dilated by
    ``R_c`` and daughters outside the window are dropped.
    """
    if lambda_p < 0 or lambda_c < 0:
        raise ValueError("intensities must be non-negative")
    parents = sample_ppp(lambda_p, half_width if wrap else half_width + R_c, rng)
    counts = rng.poisson(math.pi * R_c**2 * lambda_c, size=len(parents))
    pts = np.repeat(parents, counts, axis=0) + _uniform_disk(int(counts.sum()), R_c, rng)
    if wrap:
        return _wrap(pts, half_width)
    inside = np.all(np.abs(pts) <= half_width, axis=1)
    return pts[inside]


# -- snapshots --------------------------------------------------------------------


@dataclass
class Snapshot:
    """One realisation of the network.

    FAP rows flagged in ``palm`` were inserted for the tagged femto UE and
    are ignored by the macro UE and by the load statistics. ``*_usage`` are
    boolean ``(n, M)`` subchannel occupancy maps.
    """

    mbs_points: np.ndarray
    fap_points: np.ndarray
    fap_loads: np.ndarray  # (n, 2): U_s, U_in
    mbs_loads: np.ndarray  # U_out per MBS
    mbs_usage: np.ndarray
    fap_usage: np.ndarray
    palm: np.ndarray
    tagged_fap: Optional[int]
    core: tuple[np.ndarray, np.ndarray] = field(default=None)  # masks of APs inside the core window


def _occupancy(n_shared: np.ndarray, n_reserved: np.ndarray, M: int, M_s: int, rng) -> np.ndarray:
    # a random permutation per AP; its first M_s entries are the shared subchannels
    rank = np.argsort(np.argsort(rng.random((len(n_shared), M)), axis=1), axis=1)
    k_sh = n_shared[:, None]
    k_re = n_reserved[:, None]
    return (rank < k_sh) | ((rank >= M_s) & (rank < M_s + k_re))


def _fap_usage(loads: np.ndarray, cfg: NetworkConfig, rng) -> np.ndarray:
    n_in = np.minimum(loads[:, 1], cfg.M_s)
    n_s = np.minimum(loads[:, 0], cfg.M_r)
    return _occupancy(n_in, n_s, cfg.M, cfg.M_s, rng)


def _draw_faps(cfg: NetworkConfig, spec: SimSpec, rng) -> np.ndarray:
    half = spec.sample_half_width
    wrap = spec.boundary is Boundary.TORUS
    if cfg.clustered:
        return sample_cluster(cfg.lambda_p, cfg.lambda_c, cfg.R_c, half, rng, wrap=wrap)
    return sample_ppp(cfg.lambda_f, half, rng)


def _palm_faps(cfg: NetworkConfig, rng) -> np.ndarray:
    """The tagged FAP at the origin plus the other members of its cluster."""
    if not cfg.clustered:
        return np.zeros((1, 2))
    # the typical daughter sits uniformly in its parent's disk
    parent = -_uniform_disk(1, cfg.R_c, rng)[0]
    n = rng.poisson(math.pi * cfg.R_c**2 * cfg.lambda_c)
    siblings = parent + _uniform_disk(n, cfg.R_c, rng)
    return np.vstack([np.zeros((1, 2)), siblings])


def build_snapshot(cfg: NetworkConfig, spec: SimSpec, rng: np.random.Generator, with_palm: bool = True) -> Snapshot:
    half = spec.sample_half_width
    torus = spec.boundary is Boundary.TORUS
    mbs = sample_ppp(cfg.lambda_m, half, rng)
    for _ in range(_MAX_REDRAWS):
        if len(mbs):
            break
        mbs = sample_ppp(cfg.lambda_m, half, rng)
    else:
        raise RuntimeError("no MBS in the window; enlarge it or raise lambda_m")
    faps = _draw_faps(cfg, spec, rng)
    palm_pts = np.zeros((0, 2))
    if with_palm and spec.tagged_placement == "palm":
        palm_pts = _palm_faps(cfg, rng)
        if torus:
            palm_pts = _wrap(palm_pts, half)
    fap_points = np.vstack([faps, palm_pts])
    palm = np.zeros(len(fap_points), dtype=bool)
    palm[len(faps):] = True

    # outside nonsubscribers join their nearest MBS
    ues = sample_ppp(cfg.lambda_out, half, rng)
    if torus:
        tree = cKDTree(mbs + half, boxsize=2.0 * half)
        _, idx = tree.query(np.mod(ues + half, 2.0 * half))
    else:
        _, idx = cKDTree(mbs).query(ues)
    mbs_loads = np.bincount(np.asarray(idx, dtype=int), minlength=len(mbs)) if len(ues) else np.zeros(len(mbs), int)

    fap_loads = np.column_stack(
        [rng.poisson(cfg.mean_us, len(fap_points)), rng.poisson(cfg.mean_uin, len(fap_points))]
    ).astype(int)
    mbs_usage = _occupancy(np.minimum(mbs_loads, cfg.M), np.zeros(len(mbs), int), cfg.M, cfg.M, rng)
    fap_usage = _fap_usage(fap_loads, cfg, rng)

    tagged = None
    if with_palm:
        if spec.tagged_placement == "palm":
            tagged = len(faps)
        elif len(faps):
            tagged = int(np.argmin(np.einsum("ij,ij->i", faps, faps)))
    L = spec.window_half_width
    core = (np.all(np.abs(mbs) <= L, axis=1), np.all(np.abs(fap_points) <= L, axis=1) & ~palm)
    return Snapshot(mbs, fap_points, fap_loads, mbs_loads, mbs_usage, fap_usage, palm, tagged, core)


# -- tagged UEs -------------------------------------------------------------------


@dataclass(frozen=True)
class SinrSample:
    signal: float
    i_m: float
    i_f: float
    sinr: float


def _distances(points: np.ndarray, origin: np.ndarray, half: float, torus: bool) -> np.ndarray:
    delta = points - origin
    if torus:
        delta = _wrap(delta, half)
    return np.hypot(delta[:, 0], delta[:, 1])


def tagged_sinr(snapshot: Snapshot, cfg: NetworkConfig, tier: Tier, rng: np.random.Generator,
                spec: SimSpec = SimSpec()) -> Optional[SinrSample]:
    """SINR of a tagged UE on the tagged subchannel; ``None`` if there is none to tag."""
    tier = Tier(tier)
    half = spec.sample_half_width
    torus = spec.boundary is Boundary.TORUS
    a, mu = cfg.alpha, cfg.mu
    ch = TAGGED_CHANNEL
    if tier is Tier.MACRO:
        origin = np.zeros(2)
        d_m = _distances(snapshot.mbs_points, origin, half, torus)
        serving = int(np.argmin(d_m))
        other = np.ones(len(d_m), dtype=bool)
        other[serving] = False
        act_m = other & snapshot.mbs_usage[:, ch]
        act_f = ~snapshot.palm & snapshot.fap_usage[:, ch]
        d_f = _distances(snapshot.fap_points[act_f], origin, half, torus)
        signal = cfg.P_m * rng.exponential(1.0 / mu) * d_m[serving] ** -a
        i_m = cfg.P_m * np.sum(rng.exponential(1.0 / mu, act_m.sum()) * d_m[act_m] ** -a)
        i_f = cfg.W * cfg.P_f * np.sum(rng.exponential(1.0 / mu, len(d_f)) * d_f**-a)
    elif tier is Tier.FEMTO:
        if snapshot.tagged_fap is None:
            return None
        k = snapshot.tagged_fap
        fap = snapshot.fap_points[k]
        r = cfg.R_f * math.sqrt(rng.random())
        if spec.full_geometry:
            theta = rng.uniform(0.0, 2.0 * math.pi)
            origin = fap + r * np.array([math.cos(theta), math.sin(theta)])
        else:
            origin = fap
        act_f = snapshot.fap_usage[:, ch].copy()
        act_f[k] = False
        if spec.tagged_placement == "nearest":
            act_f &= ~snapshot.palm
        d_m = _distances(snapshot.mbs_points[snapshot.mbs_usage[:, ch]], origin, half, torus)
        d_f = _distances(snapshot.fap_points[act_f], origin, half, torus)
        signal = cfg.P_f * rng.exponential(1.0 / mu) * r**-a
        i_m = cfg.W * cfg.P_m * np.sum(rng.exponential(1.0 / mu, len(d_m)) * d_m**-a)
        i_f = cfg.W**2 * cfg.P_f * np.sum(rng.exponential(1.0 / mu, len(d_f)) * d_f**-a)
    else:
        raise ValueError("tier must be macro or femto")
    i_m, i_f = float(i_m), float(i_f)
    denom = i_m + i_f + cfg.sigma2
    sinr = math.inf if denom == 0 else float(signal) / denom
    return SinrSample(float(signal), i_m, i_f, sinr)


# -- runs -------------------------------------------------------------------------


def _one_snapshot(cfg: NetworkConfig, spec: SimSpec, index: int) -> dict:
    rng = snapshot_rng(spec.seed, index)
    want_f = spec.tagged_tier in (Tier.FEMTO, Tier.BOTH)
    snap = build_snapshot(cfg, spec, rng, with_palm=want_f)
    out = {"macro": math.nan, "femto": math.nan}
    if spec.tagged_tier in (Tier.MACRO, Tier.BOTH):
        out["macro"] = tagged_sinr(snap, cfg, Tier.MACRO, rng, spec).sinr
    if want_f:
        s = tagged_sinr(snap, cfg, Tier.FEMTO, rng, spec)
        out["femto"] = math.nan if s is None else s.sinr
    core_m, core_f = snap.core
    loads_m = snap.mbs_loads[core_m]
    loads_f = snap.fap_loads[core_f]
    use_m = snap.mbs_usage[core_m, TAGGED_CHANNEL]
    use_f = snap.fap_usage[core_f, TAGGED_CHANNEL]
    # one uniformly chosen AP per snapshot gives i.i.d. busy indicators
    out["probe_m"] = float(use_m[rng.integers(len(use_m))]) if len(use_m) else math.nan
    out["probe_f"] = float(use_f[rng.integers(len(use_f))]) if len(use_f) else math.nan
    out["n_mbs"] = len(loads_m)
    out["n_fap"] = len(loads_f)
    out["busy_m"] = int(use_m.sum())
    out["busy_f"] = int(use_f.sum())
    out["sum_uout"] = int(loads_m.sum())
    out["sum_us"] = int(loads_f[:, 0].sum())
    out["sum_uin"] = int(loads_f[:, 1].sum())
    out["share_out"] = _share_stats(loads_m, cfg.M)
    out["share_in"] = _share_stats(loads_f[:, 1], cfg.M_s)
    out["share_s"] = _share_stats(loads_f[:, 0], cfg.M_r)
    return out


def _share_stats(loads: np.ndarray, cap: int) -> tuple[float, int]:
    # sum of min(1, cap / U) over cells with U >= 1, and their number
    busy = loads[loads > 0]
    if cap <= 0:
        return 0.0, len(busy)
    return float(np.sum(np.minimum(1.0, cap / busy))), len(busy)


def _run_chunk(args) -> list[dict]:
    cfg, spec, lo, hi = args
    return [_one_snapshot(cfg, spec, k) for k in range(lo, hi)]


@dataclass
class SimResult:
    macro: Optional[SinrCurve]
    femto: Optional[SinrCurve]
    report: RateReport
    diagnostics: dict
    samples: dict = field(repr=False, default_factory=dict)


def empirical_curve(samples: np.ndarray, thresholds: np.ndarray, label: str = "Empirical") -> SinrCurve:
    s = np.sort(np.asarray(samples, dtype=float))
    cdf = np.searchsorted(s, thresholds, side="right") / len(s) if len(s) else np.full(len(thresholds), np.nan)
    return SinrCurve(thresholds, cdf, label)


def _binomial_check(hits: np.ndarray, p: float) -> dict:
    hits = hits[~np.isnan(hits)]
    n = len(hits)
    frac = float(hits.mean()) if n else math.nan
    sigma = math.sqrt(p * (1.0 - p) / n) if n else math.nan
    return {"n": n, "fraction": frac, "expected": p, "sigma": sigma, "within_3sigma": bool(abs(frac - p) <= 3 * sigma)}


def run(cfg: NetworkConfig, spec: SimSpec = SimSpec(), thresholds=None) -> SimResult:
    """Pool ``spec.snapshots`` snapshots into empirical CDFs, rates and diagnostics."""
    check(cfg)
    L = spec.window_half_width
    if cfg.lambda_m * (2 * L) ** 2 < _MIN_MBS:
        warnings.warn(f"window holds only {cfg.lambda_m * (2 * L) ** 2:.1f} MBSs on average", UserWarning, stacklevel=2)
    T = default_thresholds() if thresholds is None else np.asarray(thresholds, dtype=float)
    started = time.perf_counter()
    n = spec.snapshots
    if spec.n_jobs == 1:
        rows = _run_chunk((cfg, spec, 0, n))
    else:
        step = math.ceil(n / spec.n_jobs)
        chunks = [(cfg, spec, lo, min(lo + step, n)) for lo in range(0, n, step)]
        with ProcessPoolExecutor(max_workers=spec.n_jobs) as pool:
            rows = [r for part in pool.map(_run_chunk, chunks) for r in part]
    elapsed = time.perf_counter() - started

    col = lambda k: np.array([r[k] for r in rows], dtype=float)
    macro_s, femto_s = col("macro"), col("femto")
    macro_s, femto_s = macro_s[~np.isnan(macro_s)], femto_s[~np.isnan(femto_s)]
    macro = empirical_curve(macro_s, T, "EmpiricalMacro") if len(macro_s) else None
    femto = empirical_curve(femto_s, T, "EmpiricalFemto") if len(femto_s) else None
    tau_m = float(np.mean(np.log1p(macro_s))) if len(macro_s) else math.nan
    tau_f = float(np.mean(np.log1p(femto_s))) if len(femto_s) else math.nan

    def share(key):
        total = sum(r[key][0] for r in rows)
        cells = sum(r[key][1] for r in rows)
        return total / cells if cells else 1.0

    b_out, b_in, b_s = share("share_out"), share("share_in"), share("share_s")
    t_out = b_out * tau_m
    t_in = b_in * tau_f if cfg.M_s > 0 else 0.0
    t_s = b_s * tau_f if cfg.M_r > 0 else 0.0
    try:
        t_n = tau_n(t_out, t_in, cfg) if not (math.isnan(t_out) or math.isnan(t_in)) else math.nan
    except ValueError:
        t_n = math.nan
    report = RateReport(tau_m, tau_f, t_out, t_in, t_n, t_s, cfg.digest())

    n_mbs, n_fap = col("n_mbs").sum(), col("n_fap").sum()
    diagnostics = {
        "snapshots": n,
        "seed": spec.seed,
        "boundary": spec.boundary.value,
        "window_half_width": L,
        "runtime_s": elapsed,
        "mean_mbs_per_snapshot": n_mbs / n,
        "mean_faps_per_snapshot": n_fap / n,
        "mean_uout": col("sum_uout").sum() / n_mbs if n_mbs else math.nan,
        "mean_us": col("sum_us").sum() / n_fap if n_fap else math.nan,
        "mean_uin": col("sum_uin").sum() / n_fap if n_fap else math.nan,
        "expected_mean_uout": cfg.lambda_out / cfg.lambda_m,
        "expected_mean_us": cfg.mean_us,
        "expected_mean_uin": cfg.mean_uin,
        "busy_fraction_m_pooled": col("busy_m").sum() / n_mbs if n_mbs else math.nan,
        "busy_fraction_f_pooled": col("busy_f").sum() / n_fap if n_fap else math.nan,
        "busy_m": _binomial_check(col("probe_m"), p_busy_m(cfg)),
        "busy_f": _binomial_check(col("probe_f"), p_busy_f(cfg)),
        "share_out": b_out,
        "share_in": b_in,
        "share_s": b_s,
        "macro_samples": len(macro_s),
        "femto_samples": len(femto_s),
    }
    return SimResult(macro, femto, report, diagnostics, {"macro": macro_s, "femto": femto_s})
