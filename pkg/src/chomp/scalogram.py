"""Complex-Morlet CWT scalograms, log-power conversion and per-group standardization."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, InsufficientData
from .preprocess import WINDOW_SECONDS, Window
from .units import Earable, SensorKind, SensorUnit, UNITS, get_unit

OMEGA0 = 6.0
F_MIN = 0.5
EPSILON = 1e-10
SUPPORT = 4.0  # wavelet truncated at |t/s| <= SUPPORT
SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class CwtPlan:
    fs: float
    hop: int
    window_samples: int
    n_scales: int = 64
    f_min: float = F_MIN
    f_max: float | None = None
    omega0: float = OMEGA0
    epsilon: float = EPSILON

    @property
    def f_top(self) -> float:
        return self.fs / 2.0 if self.f_max is None else self.f_max

    @property
    def frequencies(self) -> np.ndarray:
        return np.geomspace(self.f_min, self.f_top, self.n_scales)

    @property
    def scales(self) -> np.ndarray:
        return scale_for_frequency(self.frequencies, self.fs, self.omega0)

    @property
    def n_frames(self) -> int:
        return self.window_samples // self.hop


def scale_for_frequency(f, fs: float, omega0: float = OMEGA0):
    """Scale in samples whose Morlet centre frequency is ``f`` Hz."""
    return fs * omega0 / (2.0 * np.pi * np.asarray(f, dtype=np.float64))


def make_plan(unit: SensorUnit | SensorKind | str, window_seconds: float = WINDOW_SECONDS) -> CwtPlan:
    u = unit if isinstance(unit, SensorUnit) else get_unit(unit)
    n = int(round(window_seconds * u.sample_rate))
    if n % u.cwt_hop:
        raise ConfigError(f"{u.name}: window of {n} samples is not a multiple of hop {u.cwt_hop}")
    return CwtPlan(fs=u.sample_rate, hop=u.cwt_hop, window_samples=n, n_scales=u.cwt_scales)


def morlet(t, omega0: float = OMEGA0):
    t = np.asarray(t, dtype=np.float64)
    return np.pi ** -0.25 * np.exp(1j * omega0 * t) * np.exp(-0.5 * t * t)


def _fast_frames(m: int) -> int:
    from scipy.fft import next_fast_len

    return next_fast_len(m)


@lru_cache(maxsize=8)
def _kernel_bank(plan: CwtPlan):
    """Conj-spectra of the truncated, scaled wavelets, grouped by padding need.

    Each group is (pad, nfft, scale rows, bank).  Small scales share a short
    FFT; only the few large scales pay for the long reflection padding.  Since
    the output at tau only sees samples within the scale's own support, any
    pad at least that wide gives the same coefficients.
    """
    scales = plan.scales
    groups: dict[int, list[int]] = defaultdict(list)
    for k, s in enumerate(scales):
        need = -(-int(np.floor(SUPPORT * s)) // plan.hop)  # pad in frames
        groups[1 << max(need - 1, 0).bit_length()].append(k)
    out = []
    for pad_frames in sorted(groups):
        rows = np.asarray(groups[pad_frames])
        pad = pad_frames * plan.hop  # multiple of hop so frames stay on the grid
        frames = _fast_frames(-(-(plan.window_samples + 2 * pad) // plan.hop))
        nfft = frames * plan.hop
        bank = np.zeros((rows.size, nfft), dtype=np.complex128)
        for i, k in enumerate(rows):
            s = scales[k]
            m = int(np.floor(SUPPORT * s))
            u = np.arange(-m, m + 1)
            kern = np.zeros(nfft, dtype=np.complex128)
            kern[u % nfft] = morlet(u / s, plan.omega0) / np.sqrt(s)
            bank[i] = np.conj(np.fft.fft(kern))
        bank.setflags(write=False)
        out.append((pad, nfft, rows, bank))
    return tuple(out)


def cwt_window(x, plan: CwtPlan) -> np.ndarray:
    """Complex coefficients W(s, tau), shape (n_scales, n_frames).

    W(s, tau) = s^-1/2 sum_t x(t) conj(psi((t - tau) / s)), evaluated at
    tau = 0, hop, 2*hop, ... with reflection padding at both ends.  Accepts a
    single series or a (channels, samples) array (then returns (C, F, T)).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[-1] != plan.window_samples:
        raise ConfigError(f"window has {xs.shape[-1]} samples, plan expects {plan.window_samples}")
    hop, t_out = plan.hop, plan.n_frames
    out = np.empty((xs.shape[0], plan.n_scales, t_out), dtype=np.complex128)
    for pad, nfft, rows, bank in _kernel_bank(plan):
        frames, first = nfft // hop, pad // hop
        padded = np.zeros((xs.shape[0], nfft))
        padded[:, : plan.window_samples + 2 * pad] = np.pad(xs, ((0, 0), (pad, pad)), mode="reflect")
        spec = np.fft.fft(padded, axis=1)
        for c in range(xs.shape[0]):
            # Sampling every hop-th output equals folding the spectrum to nfft/hop bins.
            folded = (bank * spec[c]).reshape(rows.size, hop, frames).sum(axis=1)
            out[c, rows] = (np.fft.ifft(folded, axis=1) / hop)[:, first : first + t_out]
    return out[0] if single else out


def cwt_full_rate(x, plan: CwtPlan) -> np.ndarray:
    """Reference CWT at every sample (no hop), by direct summation in time."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    scales = plan.scales
    pad = int(np.floor(SUPPORT * scales.max()))
    xp = np.pad(x, pad, mode="reflect")
    out = np.empty((plan.n_scales, n), dtype=np.complex128)
    for k, s in enumerate(scales):
        m = int(np.floor(SUPPORT * s))
        u = np.arange(-m, m + 1)
        taps = np.conj(morlet(u / s, plan.omega0)) / np.sqrt(s)
        seg = np.lib.stride_tricks.sliding_window_view(xp[pad - m : pad + n + m], 2 * m + 1)
        out[k] = seg @ taps
    return out


def interior_frames(plan: CwtPlan, k: int) -> np.ndarray:
    """Frames whose truncated wavelet support at scale row ``k`` lies inside the window."""
    m = np.floor(SUPPORT * plan.scales[k])
    tau = np.arange(plan.n_frames) * plan.hop
    return (tau >= m) & (tau <= plan.window_samples - 1 - m)


def interior_scales(plan: CwtPlan, margin: int = 4) -> np.ndarray:
    """Scale rows away from both band edges that have at least one interior frame."""
    rows = [k for k in range(margin, plan.n_scales - margin) if interior_frames(plan, k).any()]
    return np.asarray(rows, dtype=int)


def log_power(w, epsilon: float = EPSILON) -> np.ndarray:
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    power = np.abs(np.asarray(w)) ** 2
    return 10.0 * np.log10(np.maximum(power, epsilon))


@dataclass
class Scalogram:
    """Log-power scalogram of one window: values (2C, F, T) in dB (or standardized)."""

    values: np.ndarray
    unit: SensorKind
    label: int
    subject_id: str
    session_id: str
    food: str | None
    start_time: float
    noise: str | None = None

    @property
    def window_id(self) -> str:
        return f"{self.session_id}@{self.start_time:.3f}"

    def row_keys(self) -> list[tuple[str, Earable, int]]:
        """(subject, earable, channel) for each row."""
        c = self.values.shape[0] // 2
        return [(self.subject_id, Earable.LEFT if r < c else Earable.RIGHT, r % c) for r in range(2 * c)]


def expected_shape(unit: SensorUnit | SensorKind | str, window_seconds: float = WINDOW_SECONDS):
    u = unit if isinstance(unit, SensorUnit) else get_unit(unit)
    plan = make_plan(u, window_seconds)
    return (2 * u.channels_per_earable, plan.n_scales, plan.n_frames)


def stack_window(channel_scalograms, unit: SensorUnit | SensorKind | str) -> np.ndarray:
    """Stack per-channel (F, T) scalograms in Left ch0..C-1, Right ch0..C-1 order."""
    u = unit if isinstance(unit, SensorUnit) else get_unit(unit)
    rows = [np.asarray(s) for s in channel_scalograms]
    if len(rows) != 2 * u.channels_per_earable:
        raise ConfigError(f"{u.name} needs {2 * u.channels_per_earable} channel scalograms, got {len(rows)}")
    if len({r.shape for r in rows}) != 1 or rows[0].ndim != 2:
        raise ConfigError("channel scalograms differ in shape")
    return np.stack(rows)


def window_scalogram(w: Window, plan: CwtPlan | None = None) -> Scalogram:
    u = UNITS[w.unit]
    plan = plan or make_plan(u, w.data.shape[1] / u.sample_rate)
    values = stack_window(list(log_power(cwt_window(w.data, plan), plan.epsilon)), u)
    return Scalogram(values, w.unit, w.label, w.subject_id, w.session_id, w.food, w.start_time, w.noise)


def group_statistics(scalos) -> dict[tuple, tuple[float, float]]:
    """Mean and std per (subject, earable, channel), pooled over windows, scales and frames."""
    sums: dict[tuple, list[float]] = defaultdict(lambda: [0.0, 0.0, 0])
    for sc in scalos:
        for key, row in zip(sc.row_keys(), sc.values):
            r = np.asarray(row, dtype=np.float64)
            acc = sums[key]
            acc[0] += r.sum()
            acc[2] += r.size
    means = {k: v[0] / v[2] for k, v in sums.items()}
    for sc in scalos:
        for key, row in zip(sc.row_keys(), sc.values):
            d = np.asarray(row, dtype=np.float64) - means[key]
            sums[key][1] += float(np.sum(d * d))
    stats = {}
    for key, (_, sq, count) in sums.items():
        if count < 2:
            raise InsufficientData(f"group {key} has fewer than 2 values")
        stats[key] = (means[key], float(np.sqrt(sq / count)))
    return stats


def standardize_array(values, subjects):
    """Vectorised standardization of stacked scalograms (n, 2C, F, T) grouped by subject and row.

    Returns (standardized float32 array, {(subject, row): (mean, std)}).
    """
    values = np.asarray(values)
    subjects = np.asarray(subjects, dtype=object)
    out = np.empty(values.shape, dtype=np.float32)
    stats = {}
    for s in sorted(set(subjects.tolist())):
        idx = np.flatnonzero(subjects == s)
        block = values[idx].astype(np.float64)
        mu = block.mean(axis=(0, 2, 3))
        sd = block.std(axis=(0, 2, 3))
        if block[:, 0].size < 2:
            raise InsufficientData(f"subject {s} has fewer than 2 values per channel")
        safe = np.where(sd >= SIGMA_FLOOR, sd, 1.0)
        out[idx] = ((block - mu[None, :, None, None]) / safe[None, :, None, None]).astype(np.float32)
        for r in range(values.shape[1]):
            stats[(s, r)] = (float(mu[r]), float(sd[r]))
    return out, stats


def standardize(scalos, stats=None) -> list[Scalogram]:
    """Z-score every row with its (subject, earable, channel) group statistics.

    Statistics come from ``scalos`` itself unless given; call once for the
    training set and once for the test set.
    """
    scalos = list(scalos)
    if not scalos:
        raise InsufficientData("nothing to standardize")
    stats = group_statistics(scalos) if stats is None else stats
    out = []
    for sc in scalos:
        vals = np.empty_like(sc.values, dtype=np.float64)
        for r, key in enumerate(sc.row_keys()):
            if key not in stats:
                raise InsufficientData(f"no statistics for group {key}")
            mu, sd = stats[key]
            vals[r] = (sc.values[r] - mu) / (sd if sd >= SIGMA_FLOOR else 1.0)
        out.append(Scalogram(vals, sc.unit, sc.label, sc.subject_id, sc.session_id, sc.food, sc.start_time, sc.noise))
    return out
