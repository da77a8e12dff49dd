"""Special functions and quadrature primitives.

Scalar adaptive quadrature is delegated to QUADPACK through
:func:`scipy.integrate.quad`; the helpers here add tolerance bookkeeping,
semi-infinite handling and an explicit failure mode. The fixed-order
Gauss-Legendre panel rules at the bottom are used by the vectorised
cluster kernels, where thousands of small integrals are evaluated at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import special

__all__ = [
    "AccuracyError",
    "QuadratureSpec",
    "DEFAULT_QUADRATURE",
    "gamma_fn",
    "upper_incomplete_gamma",
    "integrate",
    "integrate_radial",
    "gauss_legendre",
    "panel_rule",
]


class AccuracyError(ArithmeticError):
    """Raised when an integral does not converge to the requested tolerance.

    The best available estimate and its error bound are kept on the
    exception so that callers can decide whether to accept them.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    # None: truncate where the integrand bound drops below abs_tol
    semi_infinite_decay_cutoff: Optional[float] = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def gamma_fn(x: float) -> float:
    """Euler gamma function; raises ``ValueError`` at the poles."""
    if x <= 0 and float(x).is_integer():
        raise ValueError(f"gamma function has a pole at {x}")
    return math.gamma(x)


def upper_incomplete_gamma(a: float, x):
    """Non-normalised upper incomplete gamma ``Gamma(a, x)``.

    Works for any real ``a``. For ``a <= 0`` the value is obtained from the
    upward recurrence ``Gamma(a, x) = (Gamma(a+1, x) - x**a * exp(-x)) / a``,
    which is well conditioned for the ``-1 < a < 0`` range used here.
    ``x`` may be an array.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("upper_incomplete_gamma requires x >= 0")
    if a > 0:
        out = special.gammaincc(a, x_arr) * special.gamma(a)
    else:
        if np.any(x_arr == 0):
            raise ValueError(f"Gamma({a}, 0) diverges for a <= 0")
        if a == 0:
            out = special.exp1(x_arr)
        elif float(a).is_integer():
            # climb from Gamma(0, x) = E1(x)
            out = special.exp1(x_arr)
            for k in range(0, int(a), -1):
                b = k - 1
                out = (out - x_arr**b * np.exp(-x_arr)) / b
        else:
            upper = upper_incomplete_gamma(a + 1.0, x_arr)
            out = (upper - x_arr**a * np.exp(-x_arr)) / a
    if np.ndim(out) == 0:
        return float(out)
    return out


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Optional[Sequence[float]] = None,
) -> float:
    """Adaptive integral of ``f`` over ``[a, b]``; ``b`` may be ``inf``.

    Break ``points`` are honoured on finite ranges; with an infinite upper
    limit the range is split at the largest break point and the tail is
    mapped to a finite interval by QUADPACK.
    """
    if b < a:
        return -integrate(f, b, a, spec, points)
    if a == b:
        return 0.0
    if math.isinf(b) and points:
        split = max(p for p in points if p > a) if any(p > a for p in points) else None
        if split is not None:
            inner = [p for p in points if a < p < split]
            return integrate(f, a, split, spec, inner or None) + integrate(f, split, b, spec)
        points = None
    kwargs = dict(epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions, full_output=1)
    if points and not math.isinf(b):
        inner = sorted(p for p in points if a < p < b)
        if inner:
            kwargs["points"] = inner
    res = _integrate.quad(f, a, b, **kwargs)
    value, err = res[0], res[1]
    ier = 0 if len(res) < 4 else 1
    if not math.isfinite(value):
        raise AccuracyError("integral is not finite", value, err)
    if ier and err > 10 * max(spec.abs_tol, spec.rel_tol * abs(value)):
        raise AccuracyError("quadrature did not converge", value, err)
    return value


def integrate_radial(
    f: Callable[[float], float],
    r_max: Optional[float] = None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Optional[Sequence[float]] = None,
) -> float:
    """Integral over the plane of a radially symmetric function.

    Evaluates ``2*pi * int_0^r_max f(rho) rho d rho``. With ``r_max=None``
    the cutoff is found by doubling from 1 until ``rho*f(rho)`` has stayed
    below ``abs_tol`` for three consecutive doublings.
    """
    if r_max is None:
        r, quiet = 1.0, 0
        for _ in range(200):
            if abs(r * f(r)) < spec.abs_tol:
                quiet += 1
                if quiet == 3:
                    break
            else:
                quiet = 0
            r *= 2.0
        else:
            raise AccuracyError("radial integrand does not decay", float("nan"), float("inf"))
        r_max = r
    val = integrate(lambda rho: f(rho) * rho, 0.0, r_max, spec, points)
    return 2.0 * math.pi * val


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _cosine_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = gauss_legendre(n)
    # t = (1 - cos(pi u)) / 2 clusters nodes at both ends and removes
    # square-root endpoint singularities
    t = 0.5 * (1.0 - np.cos(np.pi * u))
    return t, w * 0.5 * np.pi * np.sin(np.pi * u)


def panel_rule(edges: np.ndarray, n: int, cosine=False) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule over consecutive panels along the last axis of ``edges``.

    ``edges`` has shape ``(..., k)`` and must be sorted along the last axis;
    empty panels get zero weight. ``cosine`` is a bool or a boolean mask of
    shape ``(..., k - 1)`` selecting panels that get the endpoint-clustering
    map. Returns ``(nodes, weights)`` of shape ``(..., (k - 1) * n)``.
    """
    t_gl, w_gl = gauss_legendre(n)
    t_cos, w_cos = _cosine_rule(n)
    mask = np.asarray(cosine, dtype=bool)[..., None]
    t = np.where(mask, t_cos, t_gl)
    w = np.where(mask, w_cos, w_gl)
    lo = edges[..., :-1, None]
    width = (edges[..., 1:] - edges[..., :-1])[..., None]
    nodes = lo + width * t
    weights = width * w
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)
