"""Recording containers, the session directory format and binary tensors.

A session directory holds ``manifest.txt`` (UTF-8, ``key: value`` lines) and
one ``.bin`` tensor per channel.  Tensor files start with the little-endian
u32 words ``magic, rank, dim_0 .. dim_{rank-1}`` followed by the float32
payload in row-major order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import CorruptData, FormatError, InsufficientData, MissingChannel
from .units import UNIT_ORDER, UNITS, Earable, SensorKind, get_unit

TENSOR_MAGIC = 0x43484F4D  # "CHOM"
MANIFEST_NAME = "manifest.txt"

LEFT_CHEW = "left_chew"
RIGHT_CHEW = "right_chew"
CLASS_NAMES = ("left_chew", "right_chew", "other")


def label_index(activity: str) -> int:
    """Map a session activity label to the class index 0/1/2."""
    if activity == LEFT_CHEW:
        return 0
    if activity == RIGHT_CHEW:
        return 1
    return 2


# --------------------------------------------------------------------------
# tensors


def write_tensor(array, path) -> None:
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f4"))
    if arr.ndim == 0:
        raise FormatError("tensor shape must be nonempty")
    header = struct.pack(f"<{2 + arr.ndim}I", TENSOR_MAGIC, arr.ndim, *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header")
    magic, rank = struct.unpack_from("<2I", raw, 0)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic 0x{magic:08X}")
    if rank == 0 or len(raw) < 8 + 4 * rank:
        raise FormatError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{rank}I", raw, 8)
    offset = 8 + 4 * rank
    expected = 4 * int(np.prod(shape, dtype=np.int64))
    if len(raw) - offset != expected:
        raise FormatError(f"{path}: payload has {len(raw) - offset} bytes, expected {expected}")
    return np.frombuffer(raw, dtype="<f4", offset=offset).reshape(shape).astype(np.float32)


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Channel:
    samples: np.ndarray
    sample_rate: float
    t0: float
    earable: Earable
    unit: SensorKind
    axis: int

    @property
    def key(self) -> tuple[Earable, SensorKind, int]:
        return (self.earable, self.unit, self.axis)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration


@dataclass(frozen=True)
class Recording:
    subject_id: str
    session_id: str
    activity: str
    channels: tuple[Channel, ...]
    food: str | None = None
    noise: str | None = None
    interruptions: tuple[float, ...] = ()
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def label(self) -> int:
        return label_index(self.activity)

    def units(self) -> list[SensorKind]:
        present = {c.unit for c in self.channels}
        return [k for k in UNIT_ORDER if k in present]

    def channel(self, earable: Earable, unit: SensorKind, axis: int) -> Channel:
        for c in self.channels:
            if c.earable == earable and c.unit == unit and c.axis == axis:
                return c
        raise MissingChannel(f"{self.session_id}: no channel {earable.value}/{unit.value}/{axis}")

    def unit_channels(self, unit: SensorKind) -> list[Channel]:
        """Channels of one unit ordered Left ch0..C-1, Right ch0..C-1."""
        n = UNITS[unit].channels_per_earable
        return [self.channel(e, unit, a) for e in (Earable.LEFT, Earable.RIGHT) for a in range(n)]

    def with_channels(self, channels: Iterable[Channel]) -> "Recording":
        return replace(self, channels=tuple(channels))


def validate_recording(rec: Recording) -> None:
    for kind in rec.units():
        rec.unit_channels(kind)  # raises MissingChannel
    for c in rec.channels:
        if not np.all(np.isfinite(c.samples)):
            raise CorruptData(f"{rec.session_id}: non-finite sample in {c.earable.value}/{c.unit.value}/{c.axis}")


# --------------------------------------------------------------------------
# resampling


def resample_uniform(timestamps, values, target_rate: float) -> np.ndarray:
    """Linearly interpolate an irregular series onto a grid starting at timestamps[0].

    The grid has spacing exactly ``1 / target_rate`` and covers
    ``[timestamps[0], timestamps[-1]]``.
    """
    t = np.asarray(timestamps, dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    if t.shape != x.shape or t.ndim != 1:
        raise FormatError("timestamps and values must be 1-D and of equal length")
    if len(t) < 2:
        raise InsufficientData("resampling needs at least 2 samples")
    if np.any(np.diff(t) <= 0):
        raise FormatError("timestamps must be strictly increasing")
    n = int(np.floor((t[-1] - t[0]) * target_rate + 1e-9)) + 1
    grid = t[0] + np.arange(n) / target_rate
    return np.interp(grid, t, x)


# --------------------------------------------------------------------------
# session directories


def _channel_filename(c: Channel) -> str:
    return f"{c.earable.value}_{c.unit.value}_{c.axis}.bin"


def _fmt_float(x: float) -> str:
    return repr(float(x))


def save_recording(rec: Recording, path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        f"subject: {rec.subject_id}",
        f"session: {rec.session_id}",
        f"label: {rec.activity}",
        f"food: {rec.food or 'none'}",
        f"noise: {rec.noise or 'none'}",
        "interruptions: " + ",".join(_fmt_float(t) for t in rec.interruptions),
        "units: " + ",".join(k.value for k in rec.units()),
    ]
    for key, value in sorted(rec.extra.items()):
        lines.append(f"{key}: {value}")
    for c in rec.channels:
        name = _channel_filename(c)
        write_tensor(c.samples, out / name)
        lines.append(
            f"channel: {c.earable.value} {c.unit.value} {c.axis} "
            f"rate={_fmt_float(c.sample_rate)} t0={_fmt_float(c.t0)} file={name}"
        )
    (out / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def read_manifest(path) -> tuple[dict[str, str], list[str]]:
    """Return (scalar fields, raw channel lines) of a manifest file."""
    fields: dict[str, str] = {}
    channel_lines: list[str] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if ":" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        key, value = key.strip(), value.strip()
        if key == "channel":
            channel_lines.append(value)
        else:
            fields[key] = value
    return fields, channel_lines


def _parse_channel_line(value: str) -> dict:
    parts = value.split()
    if len(parts) < 4:
        raise FormatError(f"malformed channel line {value!r}")
    spec = {"earable": parts[0], "unit": parts[1], "axis": parts[2]}
    for item in parts[3:]:
        if "=" not in item:
            raise FormatError(f"malformed channel attribute {item!r}")
        k, v = item.split("=", 1)
        spec[k] = v
    return spec


def _optional(value: str | None) -> str | None:
    if value is None or value.lower() in ("", "none"):
        return None
    return value


def load_recording(path) -> Recording:
    """Load a session directory, resampling every channel to its unit's nominal rate.

    A channel payload is either a 1-D uniform series at the declared rate, or a
    (2, n) array of (timestamps, values) that is resampled.
    """
    root = Path(path)
    manifest = root / MANIFEST_NAME
    if not manifest.exists():
        raise FormatError(f"{root}: no {MANIFEST_NAME}")
    fields, channel_lines = read_manifest(manifest)
    for key in ("subject", "session", "label"):
        if key not in fields:
            raise FormatError(f"{manifest}: missing '{key}'")

    channels = []
    for line in channel_lines:
        spec = _parse_channel_line(line)
        try:
            earable = Earable(spec["earable"])
        except ValueError:
            raise FormatError(f"unknown earable {spec['earable']!r}") from None
        unit = get_unit(spec["unit"])
        fname = root / spec.get("file", "")
        if not spec.get("file") or not fname.exists():
            raise MissingChannel(f"{root}: missing channel file {spec.get('file')}")
        data = read_tensor(fname).astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise CorruptData(f"{fname}: non-finite sample")
        rate = float(spec.get("rate", unit.sample_rate))
        t0 = float(spec.get("t0", 0.0))
        if data.ndim == 1:
            if rate != unit.sample_rate:
                raise FormatError(
                    f"{fname}: declared rate {rate} does not match {unit.name} rate {unit.sample_rate}"
                )
            samples = data
        elif data.ndim == 2 and data.shape[0] == 2:
            samples = resample_uniform(data[0], data[1], unit.sample_rate)
            t0 = float(data[0][0])
        else:
            raise FormatError(f"{fname}: unexpected tensor shape {data.shape}")
        channels.append(Channel(samples, unit.sample_rate, t0, earable, unit.kind, int(spec["axis"])))

    units = [get_unit(u) for u in fields.get("units", "").split(",") if u.strip()]
    have = {c.key for c in channels}
    for unit in units:
        for e in (Earable.LEFT, Earable.RIGHT):
            for a in range(unit.channels_per_earable):
                if (e, unit.kind, a) not in have:
                    raise MissingChannel(f"{root}: manifest lists {unit.name} but {e.value}/{unit.name}/{a} is absent")

    interruptions = tuple(float(v) for v in fields.get("interruptions", "").split(",") if v.strip())
    known = {"subject", "session", "label", "food", "noise", "interruptions", "units"}
    rec = Recording(
        subject_id=fields["subject"],
        session_id=fields["session"],
        activity=fields["label"],
        channels=tuple(channels),
        food=_optional(fields.get("food")),
        noise=_optional(fields.get("noise")),
        interruptions=interruptions,
        extra={k: v for k, v in fields.items() if k not in known},
    )
    validate_recording(rec)
    return rec


def iter_session_dirs(root) -> list[Path]:
    """Session directories below ``root`` in sorted order."""
    root = Path(root)
    if (root / MANIFEST_NAME).exists():
        return [root]
    return sorted(p.parent for p in root.glob(f"*/{MANIFEST_NAME}"))
