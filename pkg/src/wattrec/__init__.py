"""Energy-aware recommender benchmarking.

Trains baseline, optimized, and ensemble recommenders on rating
datasets, evaluates them with rating and ranking metrics, and accounts
for the energy and carbon cost of every experiment through a pluggable
power meter.
"""

from wattrec.errors import (
    CapacityError,
    ConfigError,
    DataError,
    MeterBusyError,
    SplitCacheError,
    UndefinedEnergyError,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "DataError",
    "MeterBusyError",
    "SplitCacheError",
    "UndefinedEnergyError",
    "__version__",
]
