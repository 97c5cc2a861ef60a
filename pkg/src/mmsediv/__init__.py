"""Diversity analysis of linear MMSE MIMO receivers.

Closed-form diversity orders (:mod:`.formulas`), channel construction
(:mod:`.channels`), receiver metrics (:mod:`.receivers`), a deterministic
Monte Carlo engine (:mod:`.simkit`) and slope fitting (:mod:`.fitters`).
"""

from .channels import ConfigError, SystemConfig
from .fitters import compare, estimate_slope
from .formulas import diversity_cp, diversity_flat, formulas_for
from .simkit import outage_sweep, sandwich_check, ser_sweep

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "SystemConfig",
    "compare",
    "estimate_slope",
    "diversity_cp",
    "diversity_flat",
    "formulas_for",
    "outage_sweep",
    "sandwich_check",
    "ser_sweep",
]
