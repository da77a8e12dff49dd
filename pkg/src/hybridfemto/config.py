"""Network parameters, unit conversions and validation."""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

__all__ = [
    "Deployment",
    "NetworkConfig",
    "ConfigError",
    "default_config",
    "validate",
    "check",
    "dbm_to_watts",
    "watts_to_dbm",
    "db_to_linear",
    "linear_to_db",
]


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


class Deployment(str, enum.Enum):
    PPP = "ppp"
    CLUSTER = "cluster"


class ConfigError(ValueError):
    """A configuration violates one or more invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class NetworkConfig:
    """Deployment and radio parameters of the two-tier network.

    Intensities are in points per square metre, powers in watts, distances
    in metres. The defaults are the reference scenario (``M_s = 10``). For a
    clustered deployment ``lambda_f`` is always derived from
    ``lambda_p``, ``lambda_c`` and ``R_c``; any value passed in is replaced.
    """

    lambda_m: float = 1e-5
    lambda_f: float = 1e-4
    deployment: Deployment = Deployment.PPP
    lambda_p: float = 1e-5
    lambda_c: float = 0.00127
    R_c: float = 50.0
    R_f: float = 10.0
    lambda_s: float = 0.015
    lambda_in: float = 0.015
    lambda_out: float = 1e-4
    P_m: float = dbm_to_watts(39.0)
    P_f: float = dbm_to_watts(13.0)
    M: int = 20
    M_s: int = 10
    alpha: float = 4.0
    mu: float = 1.0
    W: float = db_to_linear(-6.0)
    sigma2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "deployment", Deployment(self.deployment))
        if self.deployment is Deployment.CLUSTER:
            object.__setattr__(self, "lambda_f", math.pi * self.R_c**2 * self.lambda_c * self.lambda_p)

    @property
    def M_r(self) -> int:
        return self.M - self.M_s

    @property
    def clustered(self) -> bool:
        return self.deployment is Deployment.CLUSTER

    @property
    def femto_area(self) -> float:
        return math.pi * self.R_f**2

    @property
    def mean_us(self) -> float:
        return self.lambda_s * self.femto_area

    @property
    def mean_uin(self) -> float:
        return self.lambda_in * self.femto_area

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def as_ppp(self) -> "NetworkConfig":
        """Same parameters (and same ``lambda_f``) with Poisson FAPs."""
        return self.replace(deployment=Deployment.PPP)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["deployment"] = self.deployment.value
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NetworkConfig":
        return cls(**_coerce(dict(data)))

    @classmethod
    def load(cls, path) -> "NetworkConfig":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ConfigError(["config file must hold a flat JSON object"])
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def with_overrides(self, assignments: Iterable[str]) -> "NetworkConfig":
        """Apply ``key=value`` strings (as given to ``--set``)."""
        data = self.to_dict()
        for item in assignments:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError([f"override {item!r} is not of the form key=value"])
            data[key.strip()] = _parse_scalar(value.strip())
        return NetworkConfig.from_dict(data)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_FIELDS = {f.name for f in dataclasses.fields(NetworkConfig)}
_ALIASES = {
    "P_m_dBm": ("P_m", dbm_to_watts),
    "P_f_dBm": ("P_f", dbm_to_watts),
    "W_dB": ("W", db_to_linear),
    "sigma2_dBm": ("sigma2", dbm_to_watts),
}
_INT_FIELDS = {"M", "M_s"}


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(data: dict) -> dict:
    unknown = sorted(k for k in data if k not in _FIELDS and k not in _ALIASES)
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in unknown])
    for alias, (target, conv) in _ALIASES.items():
        if alias in data:
            data[target] = conv(float(data.pop(alias)))
    out = {}
    for k, v in data.items():
        if k == "deployment":
            try:
                out[k] = Deployment(v)
            except ValueError:
                raise ConfigError([f"deployment must be 'ppp' or 'cluster', got {v!r}"]) from None
        elif k in _INT_FIELDS:
            if isinstance(v, bool) or not float(v).is_integer():
                raise ConfigError([f"{k} must be an integer, got {v!r}"])
            out[k] = int(v)
        else:
            try:
                out[k] = float(v)
            except (TypeError, ValueError):
                raise ConfigError([f"{k} must be a number, got {v!r}"]) from None
    return out


def default_config(deployment: str | Deployment = Deployment.PPP) -> NetworkConfig:
    """Reference scenario: Poisson or clustered FAPs with ``M_s = 10``."""
    return NetworkConfig(deployment=Deployment(deployment))


def validate(cfg: NetworkConfig) -> list[str]:
    """Return every invariant violation of ``cfg`` (empty when valid).

    Physically dubious but legal settings only trigger a ``UserWarning``.
    """
    problems = []
    if not cfg.alpha > 2:
        problems.append("alpha must exceed 2")
    for name in ("lambda_m", "lambda_f", "lambda_s", "lambda_in", "lambda_out", "lambda_p", "lambda_c"):
        if not getattr(cfg, name) >= 0:
            problems.append(f"{name} must be non-negative")
    for name in ("R_f", "R_c", "P_m", "P_f", "mu"):
        if not getattr(cfg, name) > 0:
            problems.append(f"{name} must be positive")
    if not 0 < cfg.W <= 1:
        problems.append("W must lie in (0, 1]")
    if not cfg.sigma2 >= 0:
        problems.append("sigma2 must be non-negative")
    if cfg.M < 1:
        problems.append("M must be at least 1")
    if cfg.M_s < 0:
        problems.append("M_s must be non-negative")
    if cfg.M_s > cfg.M:
        problems.append("M_s exceeds M")
    if cfg.clustered:
        expected = math.pi * cfg.R_c**2 * cfg.lambda_c * cfg.lambda_p
        if not math.isclose(cfg.lambda_f, expected, rel_tol=1e-9, abs_tol=0.0):
            problems.append("lambda_f inconsistent with pi R_c^2 lambda_c lambda_p")
    if not problems and math.pi * cfg.R_f**2 * cfg.lambda_m > 0.01:
        warnings.warn(
            f"femtocell radius R_f={cfg.R_f} m is not small against the macro cell size "
            f"(pi R_f^2 lambda_m = {math.pi * cfg.R_f**2 * cfg.lambda_m:.3g}); "
            "the point-like femtocell approximation may be poor",
            UserWarning,
            stacklevel=2,
        )
    return problems


def check(cfg: NetworkConfig) -> NetworkConfig:
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg
