"""Deterministic synthetic chewing sessions with a known chewing side.

Chewing is modelled as a periodic burst train at the chewing rate: jaw-motion
envelopes on the slow sensors, band-limited noise bursts on the bone and
air microphones.  The chewing-side earable is ``asymmetry_db`` louder.
Food texture maps to burst spectral sharpness (brittleness) and burst duty
cycle (chewiness).
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .io import LEFT_CHEW, RIGHT_CHEW, Channel, Recording, save_recording
from .sync import AlignmentConfig, generate_alignment_signal
from .units import UNIT_ORDER, UNITS, Earable, SensorKind, get_unit

CHEW_RATE_RANGE = (0.94, 2.17)
OTHER_ACTIVITIES = ("sitting_still", "drinking", "head_movements", "drawing_faces", "reading")

# name: (brittleness, chewiness) on [0, 1]
FOOD_TEXTURES = {
    "apple": (0.8, 0.4),
    "pretzel": (0.95, 0.3),
    "cheese": (0.3, 0.6),
    "bread": (0.2, 0.7),
    "almond": (0.9, 0.5),
    "banana": (0.05, 0.2),
    "carrot": (0.85, 0.55),
    "gummy": (0.1, 0.95),
    "chocolate": (0.6, 0.45),
    "rice_cracker": (1.0, 0.25),
    "meal": (0.5, 0.5),
}
FOOD_ORDER = tuple(FOOD_TEXTURES)

# band (Hz) of chewing bursts per unit; slow units get jaw-motion envelopes instead
BURST_BANDS = {
    SensorKind.MICROPHONES: (150.0, 3500.0),
    SensorKind.BONE_CONDUCTION: (40.0, 750.0),
}
SLOW_GAIN = {SensorKind.IMU: 1.0, SensorKind.PRESSURE: 0.3, SensorKind.PPG: 0.5}


def derive_seed(seed: int, *parts) -> int:
    """Stable 32-bit sub-seed from a base seed and labels."""
    text = "/".join([str(seed), *map(str, parts)])
    return zlib.crc32(text.encode("utf-8"))


@dataclass(frozen=True)
class SynthParams:
    subject_id: str = "S00"
    session_id: str = "S00_session"
    side: str | None = "left"  # "left", "right" or None for non-chewing
    activity: str = "sitting_still"  # used when side is None
    food: str | None = "apple"
    chew_rate: float = 1.5
    asymmetry_db: float = 6.0
    noise_floor_db: float = -40.0
    subject_gain_db: dict = field(default_factory=dict)  # (earable, unit, axis) -> dB
    subject_bias: dict = field(default_factory=dict)  # (earable, unit, axis) -> offset
    duration: float = 30.0
    interruptions: tuple[float, ...] = ()
    clock_offset: float = 0.0  # right clock minus left clock, seconds
    units: tuple[SensorKind, ...] = UNIT_ORDER
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(get_unit(u).kind for u in self.units))
        lo, hi = CHEW_RATE_RANGE
        if not lo <= self.chew_rate <= hi:
            raise ConfigError(f"chew_rate {self.chew_rate} outside [{lo}, {hi}] Hz")
        if self.asymmetry_db < 0:
            raise ConfigError("asymmetry_db must be >= 0")
        if self.side not in ("left", "right", None):
            raise ConfigError(f"side must be left, right or None, not {self.side!r}")
        if self.side is None and self.activity not in OTHER_ACTIVITIES:
            raise ConfigError(f"unknown non-chewing activity {self.activity!r}")


def _bandnoise(rng, n: int, fs: float, lo: float, hi: float, sharpness: float = 0.0) -> np.ndarray:
    """Unit-RMS noise with a flat band [lo, hi]; sharpness > 0 narrows it around a peak."""
    spec = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    shape = ((f >= lo) & (f <= hi)).astype(np.float64)
    if sharpness > 0:
        centre = np.sqrt(lo * hi)
        width = np.log(hi / lo) * (1.0 - 0.8 * sharpness) / 2
        shape *= np.exp(-0.5 * (np.log(np.maximum(f, 1e-9) / centre) / max(width, 1e-3)) ** 2)
    x = np.fft.irfft(spec * shape, n)
    rms = np.sqrt(np.mean(x * x))
    return x / rms if rms > 0 else x


def _chew_times(rng, duration: float, rate: float) -> np.ndarray:
    period = 1.0 / rate
    start = rng.uniform(0, period)
    times = np.arange(start, duration, period)
    return times + rng.normal(0, 0.03 * period, times.size)


def _burst_envelope(t: np.ndarray, times: np.ndarray, width: float) -> np.ndarray:
    """Sum of raised-cosine bumps of length ``width`` starting at each chew time."""
    env = np.zeros_like(t)
    for c in times:
        u = (t - c) / width
        m = (u >= 0) & (u < 1)
        env[m] += 0.5 - 0.5 * np.cos(2 * np.pi * u[m])
    return env


def _side_gains(side: str | None, asymmetry_db: float) -> dict[Earable, float]:
    weak = 10 ** (-asymmetry_db / 20)
    if side == "left":
        return {Earable.LEFT: 1.0, Earable.RIGHT: weak}
    if side == "right":
        return {Earable.LEFT: weak, Earable.RIGHT: 1.0}
    return {Earable.LEFT: 1.0, Earable.RIGHT: 1.0}


def _chewing_component(p: SynthParams, kind: SensorKind, t, times, rng, fs) -> np.ndarray:
    brittle, chewy = FOOD_TEXTURES.get(p.food or "meal", (0.5, 0.5))
    period = 1.0 / p.chew_rate
    width = period * (0.25 + 0.5 * chewy)
    env = _burst_envelope(t, times, width)
    if kind in BURST_BANDS:
        lo, hi = BURST_BANDS[kind]
        carrier = _bandnoise(rng, t.size, fs, lo, hi, sharpness=brittle)
        return env * carrier
    jaw = np.sin(2 * np.pi * p.chew_rate * t + rng.uniform(0, 2 * np.pi))
    return SLOW_GAIN[kind] * (0.6 * jaw + env)


def _activity_component(p: SynthParams, kind: SensorKind, t, rng, fs) -> np.ndarray:
    act = p.activity
    n = t.size
    if act == "sitting_still":
        return np.zeros(n)
    if act == "reading":
        if kind == SensorKind.MICROPHONES:
            syll = 0.5 + 0.5 * np.sin(2 * np.pi * 4.0 * t + rng.uniform(0, 2 * np.pi))
            return 0.7 * syll * _bandnoise(rng, n, fs, 300.0, 3400.0)
        if kind == SensorKind.BONE_CONDUCTION:
            return 0.3 * _bandnoise(rng, n, fs, 100.0, 700.0)
        return 0.05 * _bandnoise(rng, n, fs, 3.0, min(6.0, fs / 2 - 1))
    if act == "head_movements":
        if kind in BURST_BANDS:
            return 0.05 * _bandnoise(rng, n, fs, 0.2, 20.0)
        return 1.5 * _bandnoise(rng, n, fs, 0.15, 0.6)
    if act == "drawing_faces":
        slow = 0.4 * _bandnoise(rng, n, fs, 0.2, 0.8)
        return slow if kind not in BURST_BANDS else 0.1 * slow
    # drinking: a few irregular swallow events
    events = np.sort(rng.uniform(0, t[-1] if t.size else 0, 3))
    env = _burst_envelope(t, events, 0.6)
    if kind in BURST_BANDS:
        lo, hi = BURST_BANDS[kind]
        return 0.8 * env * _bandnoise(rng, n, fs, lo, hi / 3)
    return 0.5 * env


def generate_session(p: SynthParams) -> Recording:
    """One synthetic session; deterministic for a given ``rng_seed``."""
    master = np.random.default_rng(p.rng_seed)
    times = _chew_times(master, p.duration, p.chew_rate) if p.side else np.zeros(0)
    gains = _side_gains(p.side, p.asymmetry_db)
    floor = 10 ** (p.noise_floor_db / 20)
    channels = []
    for kind in p.units:
        unit = UNITS[kind]
        fs = unit.sample_rate
        n = int(round(p.duration * fs))
        t = np.arange(n) / fs
        for earable in (Earable.LEFT, Earable.RIGHT):
            for axis in range(unit.channels_per_earable):
                rng = np.random.default_rng(derive_seed(p.rng_seed, kind.value, earable.value, axis))
                axis_gain = 1.0 / (1.0 + 0.25 * axis)
                if p.side:
                    x = gains[earable] * axis_gain * _chewing_component(p, kind, t, times, rng, fs)
                else:
                    x = axis_gain * _activity_component(p, kind, t, rng, fs)
                x = x + floor * rng.standard_normal(n)
                key = (earable, kind, axis)
                x = x * 10 ** (p.subject_gain_db.get(key, 0.0) / 20) + p.subject_bias.get(key, 0.0)
                t0 = p.clock_offset if earable == Earable.RIGHT else 0.0
                channels.append(Channel(x.astype(np.float32).astype(np.float64), fs, t0, earable, kind, axis))
    activity = {"left": LEFT_CHEW, "right": RIGHT_CHEW}.get(p.side, f"other:{p.activity}")
    return Recording(
        subject_id=p.subject_id,
        session_id=p.session_id,
        activity=activity,
        channels=tuple(channels),
        food=p.food if p.side else None,
        interruptions=tuple(p.interruptions),
    )


def subject_profile(subject_id: str, seed: int, units=UNIT_ORDER, spread_db: float = 2.0):
    """Per-channel gain (dB) and DC bias emulating subject-specific placement."""
    rng = np.random.default_rng(derive_seed(seed, "profile", subject_id))
    gains, biases = {}, {}
    for kind in units:
        for e in (Earable.LEFT, Earable.RIGHT):
            for a in range(UNITS[kind].channels_per_earable):
                gains[(e, kind, a)] = float(rng.uniform(-spread_db, spread_db))
                biases[(e, kind, a)] = float(rng.normal(0, 0.1))
    chew_rate = float(rng.uniform(1.0, 2.0))
    return gains, biases, chew_rate


def corpus_params(n_subjects: int, foods_per_subject: int, seed: int, duration: float = 30.0,
                  asymmetry_db: float = 6.0, units=UNIT_ORDER, interruptions_per_30s: int = 1,
                  clock_offset: float = 0.0):
    """Session parameters: per subject, a left and a right session per food plus 5 non-chewing ones."""
    if n_subjects < 2:
        raise ConfigError("a corpus needs at least two subjects")
    if not 1 <= foods_per_subject <= len(FOOD_ORDER):
        raise ConfigError(f"foods_per_subject must be in 1..{len(FOOD_ORDER)}")
    units = tuple(get_unit(u).kind for u in units)
    out = []
    foods = FOOD_ORDER[:foods_per_subject]
    for s in range(n_subjects):
        sid = f"S{s + 1:02d}"
        gains, biases, rate = subject_profile(sid, seed, units)
        common = dict(subject_id=sid, subject_gain_db=gains, subject_bias=biases, duration=duration,
                      asymmetry_db=asymmetry_db, units=tuple(units), clock_offset=clock_offset)
        for food in foods:
            for side in ("left", "right"):
                sess = f"{sid}_{food}_{side}"
                rng = np.random.default_rng(derive_seed(seed, sess, "events"))
                n_int = int(interruptions_per_30s * duration // 30)
                draws = rng.uniform(2.0, duration - 2.0, n_int) if n_int and duration > 4.0 else ()
                events = tuple(sorted(float(round(v, 3)) for v in draws))
                out.append(SynthParams(session_id=sess, side=side, food=food, interruptions=events,
                                       chew_rate=float(np.clip(rate + rng.normal(0, 0.05), *CHEW_RATE_RANGE)),
                                       rng_seed=derive_seed(seed, sess), **common))
        for act in OTHER_ACTIVITIES:
            sess = f"{sid}_{act}"
            out.append(SynthParams(session_id=sess, side=None, activity=act, food=None,
                                   rng_seed=derive_seed(seed, sess), **common))
    return out


def generate_corpus(n_subjects: int, foods_per_subject: int, seed: int, out_dir=None, **kw):
    """Generate every session; with ``out_dir`` also write one directory per session."""
    recordings = [generate_session(p) for p in corpus_params(n_subjects, foods_per_subject, seed, **kw)]
    if out_dir is not None:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        for rec in recordings:
            save_recording(rec, root / rec.session_id)
    return recordings


def generate_alignment_recording(offset: float, seed: int, subject_id: str = "S00",
                                 cfg: AlignmentConfig | None = None, noise_db: float = -30.0) -> Recording:
    """Both earables capture the alignment signal, each on its own clock.

    The right clock reads ``offset`` s more than the left one, so its copy of
    the signal sits ``offset * fs`` samples later in its buffer.
    """
    cfg = cfg or AlignmentConfig()
    unit = UNITS[SensorKind.MICROPHONES]
    fs = unit.sample_rate
    sig = generate_alignment_signal(cfg, fs, derive_seed(seed, "alignment"))
    lead = int(round((abs(offset) + 0.5) * fs))
    lag = int(round(offset * fs))
    total = sig.size + 2 * lead
    channels = []
    for e in (Earable.LEFT, Earable.RIGHT):
        start = lead + (lag if e == Earable.RIGHT else 0)
        for a in range(unit.channels_per_earable):
            rng = np.random.default_rng(derive_seed(seed, "alignment", e.value, a))
            x = np.zeros(total)
            x[start : start + sig.size] = sig
            x += 10 ** (noise_db / 20) * rng.standard_normal(total)
            channels.append(Channel(x.astype(np.float32).astype(np.float64), fs, 0.0, e, unit.kind, a))
    return Recording(subject_id=subject_id, session_id=f"{subject_id}_alignment", activity="other:alignment",
                     channels=tuple(channels))
