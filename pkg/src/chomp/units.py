"""Sensor units of the dual-earable setup and their processing constants."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class SensorKind(str, Enum):
    MICROPHONES = "mic"
    BONE_CONDUCTION = "bone"
    IMU = "imu"
    PRESSURE = "pressure"
    PPG = "ppg"


class Earable(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class SensorUnit:
    kind: SensorKind
    channels_per_earable: int
    sample_rate: float
    passband: tuple[float, float]
    cwt_hop: int
    cwt_scales: int = 64

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    @property
    def effective_passband(self) -> tuple[float, float]:
        """Passband with an upper edge at Nyquist pulled down to 0.99 * Nyquist."""
        low, high = self.passband
        if high >= self.nyquist:
            high = 0.99 * self.nyquist
        return low, high


UNITS: dict[SensorKind, SensorUnit] = {
    SensorKind.MICROPHONES: SensorUnit(SensorKind.MICROPHONES, 2, 8000.0, (0.1, 4000.0), 128),
    SensorKind.BONE_CONDUCTION: SensorUnit(SensorKind.BONE_CONDUCTION, 3, 1600.0, (0.1, 800.0), 32),
    SensorKind.IMU: SensorUnit(SensorKind.IMU, 6, 100.0, (0.1, 6.0), 4),
    SensorKind.PRESSURE: SensorUnit(SensorKind.PRESSURE, 1, 100.0, (0.1, 6.0), 4),
    SensorKind.PPG: SensorUnit(SensorKind.PPG, 3, 50.0, (0.1, 6.0), 2),
}

# Canonical unit order used for recordings, manifests and CLI defaults.
UNIT_ORDER = (
    SensorKind.MICROPHONES,
    SensorKind.BONE_CONDUCTION,
    SensorKind.IMU,
    SensorKind.PRESSURE,
    SensorKind.PPG,
)

_ALIASES = {
    "mic": SensorKind.MICROPHONES,
    "microphones": SensorKind.MICROPHONES,
    "bone": SensorKind.BONE_CONDUCTION,
    "bone_conduction": SensorKind.BONE_CONDUCTION,
    "imu": SensorKind.IMU,
    "pressure": SensorKind.PRESSURE,
    "ppg": SensorKind.PPG,
}


def get_unit(name: str | SensorKind) -> SensorUnit:
    if isinstance(name, SensorKind):
        return UNITS[name]
    try:
        return UNITS[_ALIASES[name.strip().lower()]]
    except KeyError:
        from .errors import ConfigError

        raise ConfigError(f"unknown sensor unit {name!r}") from None


def total_channels(kinds=UNIT_ORDER) -> int:
    return 2 * sum(UNITS[k].channels_per_earable for k in kinds)
