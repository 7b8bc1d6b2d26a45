"""qasched: locally adiabatic annealing schedules for random Ising models.

Generates random Ising instances on regular layouts, derives locally
adiabatic schedules from exact spectral data, integrates the Schrodinger
dynamics under competing schedules, and trains an LSTM surrogate that
predicts schedule curves directly from the coupling vector.
"""

__version__ = "0.1.0"

from . import dynamics, ising, schedule, spectral, surrogate
from .errors import (ConfigurationError, FormatError, LayoutError,
                     NumericalError, ResidualEnergyUndefined)

__all__ = [
    "__version__",
    "dynamics", "ising", "schedule", "spectral", "surrogate",
    "ConfigurationError", "FormatError", "LayoutError", "NumericalError",
    "ResidualEnergyUndefined",
]
