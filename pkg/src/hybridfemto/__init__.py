"""Downlink SINR distributions and mean rates of two-tier macro/femto networks
with hybrid-access femtocells, analytically and by Monte Carlo simulation."""
from .config import ConfigError, Deployment, NetworkConfig, default_config
from .analytic_ppp import InterferenceContext, SinrCurve, default_thresholds
from .rates import Analysis, RateReport, class_rates
from .sim import SimSpec, run

__all__ = [
    "ConfigError",
    "Deployment",
    "NetworkConfig",
    "default_config",
    "InterferenceContext",
    "SinrCurve",
    "default_thresholds",
    "Analysis",
    "RateReport",
    "class_rates",
    "SimSpec",
    "run",
]

__version__ = "0.1.0"
