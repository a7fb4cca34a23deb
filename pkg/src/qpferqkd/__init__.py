"""Simulation and analysis of QKD with 2-bit phase-flip error-rejection codes."""

from .pauli import ErrorDistribution, PauliOp, RngStream, compose, flip_rates
from .qpfer import LogicalState, decoded_distribution, encode
from .postprocess import Schedule, ResidualRates, schedule_search, css_key_rate

__version__ = "0.1.0"

__all__ = [
    "ErrorDistribution",
    "PauliOp",
    "RngStream",
    "compose",
    "flip_rates",
    "LogicalState",
    "decoded_distribution",
    "encode",
    "Schedule",
    "ResidualRates",
    "schedule_search",
    "css_key_rate",
]
