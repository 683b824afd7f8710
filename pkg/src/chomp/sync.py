"""Clock-offset estimation between the two earables (GCC-PHAT on an alignment signal)."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ConfigError, DegenerateSignal
from .io import Recording
from .units import Earable, SensorKind

SPECTRAL_FLOOR = 1e-12
ALIGNMENT_UNIT = SensorKind.MICROPHONES
ALIGNMENT_AXIS = 1  # outer microphone


@dataclass(frozen=True)
class AlignmentConfig:
    n_impulses: int = 4
    impulse_spacing: float = 1.0
    noise_duration: float = 4.0
    gaussian_sigma: float = 2.0

    def __post_init__(self):
        if self.n_impulses < 1 or self.impulse_spacing <= 0:
            raise ConfigError("need n_impulses >= 1 and impulse_spacing > 0")
        if self.noise_duration < 0 or self.gaussian_sigma < 0:
            raise ConfigError("noise_duration and gaussian_sigma must be >= 0")


@dataclass(frozen=True)
class OffsetEstimate:
    offset: float  # seconds, right clock minus left clock
    peak_value: float
    lag_index: int


def generate_alignment_signal(cfg: AlignmentConfig, fs: float, rng_seed: int = 0) -> np.ndarray:
    """Unit impulses ``impulse_spacing`` apart followed by unit-variance white noise."""
    if fs <= 0:
        raise ConfigError("fs must be positive")
    step = int(round(cfg.impulse_spacing * fs))
    n_noise = int(round(cfg.noise_duration * fs))
    last = (cfg.n_impulses - 1) * step
    out = np.zeros(last + 1 + n_noise)
    out[0 : last + 1 : step] = 1.0
    if n_noise:
        rng = np.random.default_rng(rng_seed)
        out[last + 1 :] = rng.standard_normal(n_noise)
    return out


def gcc_phat_offset(left, right, fs: float, max_lag: float = 2.0, sigma: float = 2.0) -> OffsetEstimate:
    """Lag of ``right`` relative to ``left``; positive when right lags behind."""
    a = np.asarray(left, dtype=np.float64)
    b = np.asarray(right, dtype=np.float64)
    if not np.any(a) or not np.any(b):
        raise DegenerateSignal("alignment signal has no energy")
    m = int(round(max_lag * fs))
    n = a.size + b.size
    nfft = 1 << (n - 1).bit_length()
    cross = np.fft.rfft(b, nfft) * np.conj(np.fft.rfft(a, nfft))
    mag = np.abs(cross)
    keep = mag > SPECTRAL_FLOOR
    cross[keep] /= mag[keep]
    cross[~keep] = 0.0
    cc = np.fft.irfft(cross, nfft)
    m = min(m, nfft // 2 - 1)
    lags = np.concatenate((cc[-m:], cc[: m + 1])) if m else cc[:1]
    if sigma > 0:
        lags = gaussian_filter1d(lags, sigma, mode="nearest")
    idx = int(np.argmax(lags))
    lag = idx - m
    return OffsetEstimate(offset=lag / fs, peak_value=float(lags[idx]), lag_index=lag)


def estimate_recording_offset(alignment: Recording, max_lag: float = 2.0, sigma: float = 2.0) -> OffsetEstimate:
    """GCC-PHAT on the outer-microphone channels of an alignment recording.

    Channel t0 values are taken into account, so the estimate is the offset
    of the right clock relative to the left one.
    """
    left = alignment.channel(Earable.LEFT, ALIGNMENT_UNIT, ALIGNMENT_AXIS)
    right = alignment.channel(Earable.RIGHT, ALIGNMENT_UNIT, ALIGNMENT_AXIS)
    est = gcc_phat_offset(left.samples, right.samples, left.sample_rate, max_lag, sigma)
    base = right.t0 - left.t0
    return OffsetEstimate(offset=est.offset + base, peak_value=est.peak_value, lag_index=est.lag_index)


def align_recording(rec: Recording, est: OffsetEstimate) -> Recording:
    """Shift every right-earable channel by ``-est.offset``. Not idempotent."""
    chans = tuple(
        replace(c, t0=c.t0 - est.offset) if c.earable == Earable.RIGHT else c for c in rec.channels
    )
    extra = dict(rec.extra)
    extra["sync_offset"] = repr(float(est.offset))
    return replace(rec, channels=chans, extra=extra)
