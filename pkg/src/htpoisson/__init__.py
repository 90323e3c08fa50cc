"""Heavy-tailed compound Poisson process with unit drift: exact identities,
uniform asymptotics and Monte Carlo for its supremum, hitting time and maximal jump."""
from .distributions import (Exponential, JumpLaw, LogPerturbedPareto, Lomax, Pareto,
                            parse_law)
from .pk_engine import ModelParams, StationaryTable, build_stationary

__all__ = [
    "Exponential",
    "JumpLaw",
    "LogPerturbedPareto",
    "Lomax",
    "Pareto",
    "parse_law",
    "ModelParams",
    "StationaryTable",
    "build_stationary",
]
__version__ = "0.1.0"
