"""Cavity cooling of a trapped particle in the Lamb-Dicke regime: cooling
equations, closed-form stationary values and rates, and a density-matrix
reference solver."""

__version__ = "0.1.0"

from .params import (  # noqa: E402
    EffectiveParams,
    RawParams,
    derive_effective,
    regime_report,
)
from .moments import MomentState, build_drift, evolve, initial_state, stationary_numeric  # noqa: E402
from .analytic import cooling_rate, m_ss_first_order, optimal_detuning, stationary_closed_form  # noqa: E402

__all__ = [
    "EffectiveParams",
    "RawParams",
    "derive_effective",
    "regime_report",
    "MomentState",
    "build_drift",
    "evolve",
    "initial_state",
    "stationary_numeric",
    "cooling_rate",
    "m_ss_first_order",
    "optimal_detuning",
    "stationary_closed_form",
]
