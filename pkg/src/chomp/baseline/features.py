"""Hand-crafted window features: mean, variance, power, spectral centroid, MFCCs."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window

from ..errors import ConfigError, InsufficientData
from ..preprocess import Window
from ..units import UNITS, SensorKind

MEL_FLOOR = 1e-10
TOP_DB = 80.0


@dataclass(frozen=True)
class MfccParams:
    n_fft: int
    hop_length: int
    n_mfcc: int
    n_mels: int

    def __post_init__(self):
        if self.n_mfcc > self.n_mels or self.n_fft < self.hop_length:
            raise ConfigError(f"inconsistent MFCC parameters {self}")


MFCC_PARAMS = {
    SensorKind.MICROPHONES: MfccParams(1024, 128, 13, 40),
    SensorKind.BONE_CONDUCTION: MfccParams(256, 64, 12, 20),
    SensorKind.IMU: MfccParams(128, 32, 12, 20),
    SensorKind.PPG: MfccParams(64, 16, 12, 20),
    SensorKind.PRESSURE: MfccParams(128, 32, 12, 20),
}


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=32)
def mel_filterbank(n_mels: int, n_fft: int, fs: float) -> np.ndarray:
    """Triangular filters (n_mels, n_fft // 2 + 1) equally spaced in mel over 0..Nyquist."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(fs / 2.0), n_mels + 2))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / fs)
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def _frames(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    if x.shape[-1] < n_fft:
        raise InsufficientData(f"signal of {x.shape[-1]} samples is shorter than n_fft={n_fft}")
    return np.lib.stride_tricks.sliding_window_view(x, n_fft, axis=-1)[..., ::hop, :]


def _spectra(x, n_fft: int, hop: int) -> np.ndarray:
    frames = _frames(np.asarray(x, dtype=np.float64), n_fft, hop)
    return np.abs(np.fft.rfft(frames * get_window("hann", n_fft), axis=-1))


def spectral_centroid(x, fs: float, n_fft: int, hop: int) -> np.ndarray:
    """Per-frame centroid of the Hann-windowed magnitude spectrum; silent frames give 0."""
    mag = _spectra(x, n_fft, hop)
    freqs = np.fft.rfftfreq(n_fft, 1.0 / fs)
    total = mag.sum(axis=-1)
    weighted = mag @ freqs
    return np.where(total > 0, weighted / np.where(total > 0, total, 1.0), 0.0)


def mfcc(x, fs: float, p: MfccParams) -> np.ndarray:
    """MFCCs per frame, shape (..., frames, n_mfcc).

    Log-mel energies are in dB with an absolute floor of 1e-10 and a dynamic
    range capped at 80 dB below the frame maximum.
    """
    power = _spectra(x, p.n_fft, p.hop_length) ** 2
    mel = power @ mel_filterbank(p.n_mels, p.n_fft, float(fs)).T
    log_mel = 10.0 * np.log10(np.maximum(mel, MEL_FLOOR))
    log_mel = np.maximum(log_mel, log_mel.max(axis=-1, keepdims=True) - TOP_DB)
    return dct(log_mel, type=2, norm="ortho", axis=-1)[..., : p.n_mfcc]


def feature_length(unit: SensorKind, p: MfccParams | None = None) -> int:
    p = p or MFCC_PARAMS[unit]
    return 2 * UNITS[unit].channels_per_earable * (4 + p.n_mfcc)


def extract_features(w: Window, p: MfccParams | None = None) -> np.ndarray:
    """Per channel [mean, variance, power, centroid, mfcc_0..]; channels concatenated."""
    p = p or MFCC_PARAMS[w.unit]
    fs = UNITS[w.unit].sample_rate
    x = np.asarray(w.data, dtype=np.float64)
    centroid = spectral_centroid(x, fs, p.n_fft, p.hop_length).mean(axis=-1)
    coeffs = mfcc(x, fs, p).mean(axis=-2)
    stats = np.column_stack([x.mean(axis=1), x.var(axis=1), np.mean(x * x, axis=1), centroid])
    return np.hstack([stats, coeffs]).ravel()


class FeatureScaler:
    """Per-feature z-scoring with statistics from the training matrix."""

    def fit(self, X) -> "FeatureScaler":
        X = np.asarray(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        return self

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_

    def fit_transform(self, X) -> np.ndarray:
        return self.fit(X).transform(X)
