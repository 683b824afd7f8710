"""Bandpass filtering and occlusion-aware windowing."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .errors import ConfigError, InsufficientData
from .io import Channel, Recording, label_index
from .units import SensorKind, SensorUnit, UNITS

FILTER_ORDER = 4
WINDOW_SECONDS = 2.0
OVERLAP = 0.5
OCCLUSION_HALF_WIDTH = 1.0
_TIME_TOL = 1e-9


@dataclass(frozen=True)
class BandpassFilter:
    low: float
    high: float
    fs: float
    sos: np.ndarray
    order: int = FILTER_ORDER

    def response(self, freqs) -> np.ndarray:
        """Complex frequency response evaluated directly on the unit circle."""
        z = np.exp(2j * np.pi * np.asarray(freqs, dtype=np.float64) / self.fs)
        h = np.ones_like(z)
        for b0, b1, b2, a0, a1, a2 in self.sos:
            h = h * (b0 + b1 / z + b2 / z**2) / (a0 + a1 / z + a2 / z**2)
        return h


def design_bandpass(unit: SensorUnit) -> BandpassFilter:
    low, high = unit.effective_passband
    fs = unit.sample_rate
    if not 0 < low < high < fs / 2:
        raise ConfigError(f"{unit.name}: invalid passband ({low}, {high}) at fs={fs}")
    sos = signal.butter(FILTER_ORDER, [low, high], btype="bandpass", fs=fs, output="sos")
    return BandpassFilter(low=low, high=high, fs=fs, sos=sos)


def apply_bandpass(ch: Channel, f: BandpassFilter) -> Channel:
    if ch.sample_rate != f.fs:
        raise ConfigError(f"filter designed for {f.fs} Hz applied to {ch.sample_rate} Hz channel")
    x = np.asarray(ch.samples, dtype=np.float64)
    if x.size == 0:
        return replace(ch, samples=x)
    # start from the steady state of a constant input equal to the first sample, so a
    # sensor's DC offset does not ring through the first seconds; still causal and linear
    zi = signal.sosfilt_zi(f.sos) * x[0]
    y, _ = signal.sosfilt(f.sos, x, zi=zi)
    return replace(ch, samples=y)


def filter_recording(rec: Recording, units=None) -> Recording:
    """Apply each unit's bandpass to all of its channels (both earables alike)."""
    kinds = set(units) if units is not None else set(rec.units())
    filters = {k: design_bandpass(UNITS[k]) for k in kinds}
    chans = tuple(apply_bandpass(c, filters[c.unit]) if c.unit in filters else c for c in rec.channels)
    return rec.with_channels(chans)


@dataclass(frozen=True)
class Window:
    unit: SensorKind
    data: np.ndarray  # (2C, L), rows Left ch0..C-1 then Right ch0..C-1
    label: int
    subject_id: str
    session_id: str
    food: str | None
    start_time: float
    noise: str | None = None

    @property
    def window_id(self) -> str:
        return f"{self.session_id}@{self.start_time:.3f}"


def _overlaps_occlusion(start: float, length: float, events, half_width: float) -> bool:
    for e in events:
        if start < e + half_width - _TIME_TOL and start + length > e - half_width + _TIME_TOL:
            return True
    return False


def window_starts(t_begin: float, t_end: float, win_len: float, overlap: float) -> np.ndarray:
    stride = win_len * (1.0 - overlap)
    duration = t_end - t_begin
    if duration + _TIME_TOL < win_len:
        raise InsufficientData(f"session of {duration:.3f} s is shorter than the {win_len} s window")
    n = int(np.floor((duration - win_len) / stride + _TIME_TOL)) + 1
    return t_begin + stride * np.arange(n)


def segment_windows(
    rec: Recording,
    unit: SensorKind | SensorUnit,
    win_len: float = WINDOW_SECONDS,
    overlap: float = OVERLAP,
    occlusion_half_width: float = OCCLUSION_HALF_WIDTH,
) -> list[Window]:
    """Cut fixed-length windows over the span covered by all of the unit's channels.

    Windows whose span intersects an open occlusion interval around any
    interruption are dropped; a window merely touching the boundary is kept.
    """
    kind = unit.kind if isinstance(unit, SensorUnit) else unit
    spec = UNITS[kind]
    chans = rec.unit_channels(kind)
    fs = spec.sample_rate
    n = int(round(win_len * fs))
    t_begin = max(c.t0 for c in chans)
    t_end = min(c.t_end for c in chans)
    label = label_index(rec.activity)

    windows = []
    for start in window_starts(t_begin, t_end, win_len, overlap):
        if _overlaps_occlusion(start, win_len, rec.interruptions, occlusion_half_width):
            continue
        rows = []
        for c in chans:
            i0 = int(round((start - c.t0) * fs))
            i0 = min(max(i0, 0), len(c.samples) - n)
            rows.append(c.samples[i0 : i0 + n])
        windows.append(
            Window(
                unit=kind,
                data=np.stack(rows),
                label=label,
                subject_id=rec.subject_id,
                session_id=rec.session_id,
                food=rec.food,
                start_time=float(start),
                noise=rec.noise,
            )
        )
    return windows
