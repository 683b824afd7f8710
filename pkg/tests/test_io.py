import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from chomp.errors import CorruptData, FormatError, InsufficientData, MissingChannel
from chomp.io import (
    TENSOR_MAGIC,
    label_index,
    load_recording,
    read_tensor,
    resample_uniform,
    save_recording,
    write_tensor,
)
from chomp.scalogram import expected_shape
from chomp.units import UNIT_ORDER, UNITS, SensorKind, get_unit, total_channels


def test_unit_table():
    rows = {k: (u.channels_per_earable, u.sample_rate, u.cwt_hop, u.cwt_scales) for k, u in UNITS.items()}
    assert rows == {
        SensorKind.MICROPHONES: (2, 8000.0, 128, 64),
        SensorKind.BONE_CONDUCTION: (3, 1600.0, 32, 64),
        SensorKind.IMU: (6, 100.0, 4, 64),
        SensorKind.PRESSURE: (1, 100.0, 4, 64),
        SensorKind.PPG: (3, 50.0, 2, 64),
    }
    assert UNITS[SensorKind.IMU].passband == (0.1, 6.0)
    assert UNITS[SensorKind.BONE_CONDUCTION].passband == (0.1, 800.0)
    assert UNITS[SensorKind.MICROPHONES].effective_passband == (0.1, 0.99 * 4000.0)
    for u in UNITS.values():
        assert u.effective_passband[1] <= u.nyquist


def test_channel_count_identity():
    assert total_channels() == 30


def test_get_unit_aliases():
    assert get_unit("Microphones").kind == SensorKind.MICROPHONES
    assert get_unit(SensorKind.PPG).kind == SensorKind.PPG
    with pytest.raises(Exception):
        get_unit("magnetometer")


def test_label_index():
    assert label_index("left_chew") == 0
    assert label_index("right_chew") == 1
    assert label_index("other:reading") == 2


def test_tensor_header_bytes(tmp_path):
    p = tmp_path / "t.bin"
    write_tensor(np.arange(1, 7, dtype=np.float32).reshape(2, 3), p)
    raw = p.read_bytes()
    assert struct.unpack_from("<4I", raw) == (TENSOR_MAGIC, 2, 2, 3)
    assert len(raw) - 16 == 24
    np.testing.assert_array_equal(read_tensor(p), np.arange(1, 7).reshape(2, 3))


def test_tensor_zero_roundtrip(tmp_path):
    p = tmp_path / "z.bin"
    write_tensor(np.zeros((4, 64, 125), np.float32), p)
    assert read_tensor(p).shape == (4, 64, 125)


def test_tensor_truncated(tmp_path):
    p = tmp_path / "t.bin"
    write_tensor(np.ones((3, 3)), p)
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(FormatError):
        read_tensor(p)


def test_tensor_bad_magic(tmp_path):
    p = tmp_path / "t.bin"
    p.write_bytes(struct.pack("<3I", 7, 1, 0))
    with pytest.raises(FormatError):
        read_tensor(p)


@pytest.mark.parametrize("kind", UNIT_ORDER)
def test_tensor_roundtrip_table_shapes(tmp_path, kind):
    x = np.random.default_rng(0).standard_normal(expected_shape(kind)).astype(np.float32)
    p = tmp_path / "x.bin"
    write_tensor(x, p)
    y = read_tensor(p)
    assert y.tobytes() == x.tobytes()


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=1, max_dims=4, max_side=6),
                  elements=st.floats(width=32, allow_nan=False)))
def test_tensor_roundtrip_property(tmp_path_factory, x):
    p = tmp_path_factory.mktemp("t") / "x.bin"
    write_tensor(x, p)
    assert read_tensor(p).tobytes() == x.tobytes()


def test_resample_identity():
    t = np.arange(200) / 100.0
    x = np.sin(t)
    np.testing.assert_array_equal(resample_uniform(t, x, 100.0), x)


def test_resample_ramp_exact(rng):
    t = np.sort(np.concatenate([[0.0, 3.0], rng.uniform(0, 3, 250)]))
    y = resample_uniform(t, t, 100.0)
    grid = np.arange(301) / 100.0
    np.testing.assert_allclose(y, grid, rtol=0, atol=1e-12)


def test_resample_jittered_sinusoid(rng):
    steps = 1.0 / rng.uniform(99.5, 100.5, 1000)
    t = np.concatenate([[0.0], np.cumsum(steps)])
    y = resample_uniform(t, np.sin(2 * np.pi * 2 * t), 100.0)
    grid = np.arange(y.size) / 100.0
    assert grid[-1] <= t[-1]
    assert np.max(np.abs(y - np.sin(2 * np.pi * 2 * grid))) < 1e-3


def test_resample_errors():
    with pytest.raises(InsufficientData):
        resample_uniform([0.0], [1.0], 100.0)
    with pytest.raises(FormatError):
        resample_uniform([0.0, 0.2, 0.1], [1.0, 2.0, 3.0], 100.0)


def test_recording_roundtrip(tmp_path, short_session):
    assert len(short_session.channels) == 30
    d = save_recording(short_session, tmp_path / "s")
    rec = load_recording(d)
    assert len(rec.channels) == 30
    for a, b in zip(short_session.channels, rec.channels):
        assert a.key == b.key and a.t0 == b.t0
        assert a.samples.tobytes() == b.samples.tobytes()
    assert rec.activity == short_session.activity and rec.food == short_session.food


def test_missing_channel(tmp_path, short_session):
    d = save_recording(short_session, tmp_path / "s")
    (d / "left_imu_2.bin").unlink()
    with pytest.raises(MissingChannel):
        load_recording(d)


def test_manifest_lists_unit_without_files(tmp_path, short_session):
    d = save_recording(short_session, tmp_path / "s")
    lines = (d / "manifest.txt").read_text().splitlines()
    kept = [ln for ln in lines if not (ln.startswith("channel:") and " imu " in ln)]
    (d / "manifest.txt").write_text("\n".join(kept) + "\n")
    with pytest.raises(MissingChannel):
        load_recording(d)


def test_rate_mismatch(tmp_path, short_session):
    d = save_recording(short_session, tmp_path / "s")
    text = (d / "manifest.txt").read_text().replace("imu 0 rate=100.0", "imu 0 rate=50.0")
    (d / "manifest.txt").write_text(text)
    with pytest.raises(FormatError):
        load_recording(d)


def test_non_finite(tmp_path, short_session):
    d = save_recording(short_session, tmp_path / "s")
    x = read_tensor(d / "left_ppg_0.bin")
    x[5] = np.nan
    write_tensor(x, d / "left_ppg_0.bin")
    with pytest.raises(CorruptData):
        load_recording(d)


def test_timestamped_payload_is_resampled(tmp_path, short_session):
    d = save_recording(short_session, tmp_path / "s")
    t = np.arange(0, 4, 1 / 50.3)
    write_tensor(np.stack([t, np.sin(t)]), d / "left_ppg_0.bin")
    rec = load_recording(d)
    ch = [c for c in rec.channels if c.key == (c.earable.LEFT, SensorKind.PPG, 0)][0]
    assert ch.sample_rate == 50.0
    np.testing.assert_allclose(ch.samples, np.sin(np.arange(ch.samples.size) / 50.0), atol=1e-3)
