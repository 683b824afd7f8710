from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chomp.errors import ConfigError, InsufficientData
from chomp.io import Channel, Recording
from chomp.preprocess import apply_bandpass, design_bandpass, segment_windows, window_starts
from chomp.units import UNIT_ORDER, UNITS, Earable, SensorKind, SensorUnit

IMU = UNITS[SensorKind.IMU]


def imu_channel(x, t0=0.0, earable=Earable.LEFT, axis=0):
    return Channel(np.asarray(x, dtype=np.float64), 100.0, t0, earable, SensorKind.IMU, axis)


def const_recording(duration, interruptions=(), activity="left_chew", kind=SensorKind.PRESSURE):
    u = UNITS[kind]
    n = int(duration * u.sample_rate)
    chans = []
    for e in (Earable.LEFT, Earable.RIGHT):
        for a in range(u.channels_per_earable):
            val = (1 if e == Earable.LEFT else -1) * (a + 1)
            chans.append(Channel(np.full(n, float(val)) + np.arange(n) / n, u.sample_rate, 0.0, e, kind, a))
    return Recording("S1", "S1_x", activity, tuple(chans), food="apple", interruptions=tuple(interruptions))


def test_imu_filter_passband_and_stopband():
    f = design_bandpass(IMU)
    assert abs(f.response([1.5])[0]) >= 0.95
    assert 20 * np.log10(abs(f.response([20.0])[0])) <= -20


@pytest.mark.parametrize("kind", UNIT_ORDER)
def test_filter_response_matches_scipy(kind):
    from scipy import signal

    f = design_bandpass(UNITS[kind])
    freqs = np.geomspace(0.05, UNITS[kind].nyquist * 0.98, 50)
    _, h = signal.sosfreqz(f.sos, worN=freqs, fs=f.fs)
    # near z = 1 both evaluations lose digits to cancellation at the high rates
    np.testing.assert_allclose(f.response(freqs), h, rtol=1e-5, atol=1e-9)
    assert f.order == 4 and f.sos.shape == (4, 6)


def test_invalid_passband():
    with pytest.raises(ConfigError):
        design_bandpass(SensorUnit(SensorKind.IMU, 6, 100.0, (6.0, 0.1), 4))


def test_monotone_stopbands():
    f = design_bandpass(IMU)
    lo = np.abs(f.response(np.linspace(0.001, 0.05, 50)))
    hi = np.abs(f.response(np.linspace(12.0, 49.9, 50)))
    assert np.all(np.diff(lo) >= 0) and np.all(np.diff(hi) <= 0)


def test_dc_rejected_and_zero():
    f = design_bandpass(IMU)
    y = apply_bandpass(imu_channel(np.full(3000, 2.0)), f).samples
    assert np.abs(y[-100:]).max() < 1e-3
    assert np.all(apply_bandpass(imu_channel(np.zeros(500)), f).samples == 0)


def test_sinusoid_gain():
    f = design_bandpass(IMU)
    t = np.arange(6000) / 100.0
    y = apply_bandpass(imu_channel(np.sin(2 * np.pi * t)), f).samples
    amp = np.abs(y[-1000:]).max()
    assert 0.95 <= amp <= 1.0


def test_rate_mismatch():
    f = design_bandpass(IMU)
    ch = Channel(np.zeros(10), 50.0, 0.0, Earable.LEFT, SensorKind.PPG, 0)
    with pytest.raises(ConfigError):
        apply_bandpass(ch, f)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 10_000))
def test_filter_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(400), rng.standard_normal(400)
    f = design_bandpass(IMU)
    lhs = apply_bandpass(imu_channel(a * x + b * y), f).samples
    rhs = a * apply_bandpass(imu_channel(x), f).samples + b * apply_bandpass(imu_channel(y), f).samples
    scale = max(np.abs(rhs).max(), 1e-12)
    assert np.abs(lhs - rhs).max() <= 1e-9 * scale + 1e-12


def test_window_count_plain():
    assert len(segment_windows(const_recording(30), SensorKind.PRESSURE)) == 29


def test_window_count_with_interruption():
    ws = segment_windows(const_recording(30, [10.0]), SensorKind.PRESSURE)
    starts = [w.start_time for w in ws]
    assert len(ws) == 26
    assert not {8.0, 9.0, 10.0} & set(starts)
    assert 7.0 in starts and 11.0 in starts  # touching the zone boundary is allowed


def test_short_session():
    with pytest.raises(InsufficientData):
        segment_windows(const_recording(1.5), SensorKind.PRESSURE)
    with pytest.raises(InsufficientData):
        window_starts(0.0, 1.5, 2.0, 0.5)


@pytest.mark.parametrize("kind", UNIT_ORDER)
def test_window_shapes(short_session, kind):
    u = UNITS[kind]
    ws = segment_windows(short_session, kind)
    assert len(ws) == 3
    for w in ws:
        assert w.data.shape == (2 * u.channels_per_earable, int(2 * u.sample_rate))
        assert w.label == 0 and w.food == short_session.food


@settings(max_examples=30, deadline=None)
@given(events=st.lists(st.floats(0.0, 20.0), max_size=4))
def test_no_window_meets_occlusion(events):
    rec = const_recording(20, sorted(events))
    for w in segment_windows(rec, SensorKind.PRESSURE):
        for e in events:
            assert w.start_time + 2.0 <= e - 1.0 + 1e-9 or w.start_time >= e + 1.0 - 1e-9


def test_rows_ordered_left_then_right():
    w = segment_windows(const_recording(4, kind=SensorKind.PPG), SensorKind.PPG)[0]
    np.testing.assert_allclose(np.round(w.data[:, 0]), [1, 2, 3, -1, -2, -3])


def test_mirror_symmetry():
    rec = const_recording(6)
    mirrored = replace(
        rec,
        activity="right_chew",
        channels=tuple(replace(c, earable=Earable.RIGHT if c.earable == Earable.LEFT else Earable.LEFT)
                       for c in rec.channels),
    )
    a = segment_windows(rec, SensorKind.PRESSURE)
    b = segment_windows(mirrored, SensorKind.PRESSURE)
    assert [w.label for w in a] == [0] * len(a) and [w.label for w in b] == [1] * len(b)
    for wa, wb in zip(a, b):
        np.testing.assert_array_equal(wa.data[::-1], wb.data)  # 1 channel per earable: rows swap
