"""Differential equation units: neurons whose activation is the solution of
a second-order linear ODE with learnable coefficients."""

from .deu import DeuLayerState, backward_batch, forward_batch
from .nn import Network, make_network
from .ode_core import DeuParams, Regime, StabilityConfig, clamp_params, classify_regime, evaluate

__version__ = "0.1.0"

__all__ = [
    "DeuLayerState",
    "DeuParams",
    "Network",
    "Regime",
    "StabilityConfig",
    "backward_batch",
    "clamp_params",
    "classify_regime",
    "evaluate",
    "forward_batch",
    "make_network",
]
