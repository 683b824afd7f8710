"""Chewing-side detection from dual earables: sync, preprocessing, scalograms, models, evaluation."""
from .errors import (
    ChompError,
    ConfigError,
    CorruptData,
    DegenerateSignal,
    FormatError,
    InsufficientData,
    MissingChannel,
)
from .units import UNITS, Earable, SensorKind, SensorUnit, get_unit

__version__ = "0.1.0"

__all__ = [
    "ChompError",
    "ConfigError",
    "CorruptData",
    "DegenerateSignal",
    "FormatError",
    "InsufficientData",
    "MissingChannel",
    "UNITS",
    "Earable",
    "SensorKind",
    "SensorUnit",
    "get_unit",
    "__version__",
]
