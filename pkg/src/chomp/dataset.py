"""Window and scalogram collections with on-disk form (tensor + sidecar index)."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .io import read_tensor, write_tensor
from .preprocess import Window
from .scalogram import Scalogram, standardize_array
from .units import SensorKind, get_unit

INDEX_FIELDS = ("window_id", "session", "subject", "food", "noise", "label", "start")


@dataclass
class WindowMeta:
    """Per-window keys shared by every unit of a multi-sensor window."""

    window_ids: np.ndarray
    sessions: np.ndarray
    subjects: np.ndarray
    foods: np.ndarray
    noises: np.ndarray
    labels: np.ndarray
    starts: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "WindowMeta":
        return WindowMeta(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))

    @classmethod
    def from_items(cls, items) -> "WindowMeta":
        items = list(items)
        obj = lambda vals: np.asarray(vals, dtype=object)  # noqa: E731
        return cls(
            window_ids=obj([w.window_id for w in items]),
            sessions=obj([w.session_id for w in items]),
            subjects=obj([w.subject_id for w in items]),
            foods=obj([w.food for w in items]),
            noises=obj([w.noise for w in items]),
            labels=np.asarray([w.label for w in items], dtype=np.int64),
            starts=np.asarray([w.start_time for w in items], dtype=np.float64),
        )

    def write_index(self, path) -> None:
        lines = ["\t".join(INDEX_FIELDS)]
        for i in range(len(self)):
            lines.append("\t".join([
                self.window_ids[i], self.sessions[i], self.subjects[i], self.foods[i] or "none",
                self.noises[i] or "none", str(int(self.labels[i])), repr(float(self.starts[i])),
            ]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read_index(cls, path) -> "WindowMeta":
        rows = Path(path).read_text(encoding="utf-8").splitlines()
        if not rows or tuple(rows[0].split("\t")) != INDEX_FIELDS:
            raise FormatError(f"{path}: bad index header")
        cols = list(zip(*(r.split("\t") for r in rows[1:]))) or [()] * len(INDEX_FIELDS)
        none = lambda vals: np.asarray([None if v == "none" else v for v in vals], dtype=object)  # noqa: E731
        return cls(
            window_ids=np.asarray(cols[0], dtype=object),
            sessions=np.asarray(cols[1], dtype=object),
            subjects=np.asarray(cols[2], dtype=object),
            foods=none(cols[3]),
            noises=none(cols[4]),
            labels=np.asarray(cols[5], dtype=np.int64),
            starts=np.asarray(cols[6], dtype=np.float64),
        )


@dataclass
class SensorSet:
    """Stacked per-unit arrays (windows or scalograms) sharing one WindowMeta."""

    meta: WindowMeta
    arrays: dict[SensorKind, np.ndarray]

    @property
    def units(self) -> tuple[SensorKind, ...]:
        return tuple(self.arrays)

    @property
    def labels(self) -> np.ndarray:
        return self.meta.labels

    def __len__(self) -> int:
        return len(self.meta)

    def inputs(self, units=None) -> list[np.ndarray]:
        units = self.units if units is None else [get_unit(u).kind for u in units]
        missing = [u.value for u in units if u not in self.arrays]
        if missing:
            raise ConfigError(f"dataset lacks units {missing}")
        return [self.arrays[u] for u in units]

    def subset(self, idx) -> "SensorSet":
        idx = np.asarray(idx, dtype=np.int64)
        return SensorSet(self.meta.subset(idx), {u: a[idx] for u, a in self.arrays.items()})

    def standardized(self) -> "SensorSet":
        """Per (subject, earable, channel) z-scoring with statistics from this set only."""
        return SensorSet(self.meta, {u: standardize_array(a, self.meta.subjects)[0] for u, a in self.arrays.items()})

    def save(self, root, prefix: str) -> Path:
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        self.meta.write_index(root / f"{prefix}_index.tsv")
        for u, a in self.arrays.items():
            write_tensor(a, root / f"{prefix}_{u.value}.bin")
        return root

    @classmethod
    def load(cls, root, prefix: str, units=None) -> "SensorSet":
        root = Path(root)
        index = root / f"{prefix}_index.tsv"
        if not index.exists():
            raise FormatError(f"{root}: no {index.name}")
        meta = WindowMeta.read_index(index)
        if units is None:
            units = [p.name[len(prefix) + 1 : -4] for p in sorted(root.glob(f"{prefix}_*.bin"))]
        arrays = {}
        for u in units:
            kind = get_unit(u).kind
            path = root / f"{prefix}_{kind.value}.bin"
            if not path.exists():
                raise FormatError(f"{root}: no {path.name}")
            arr = read_tensor(path)
            if arr.shape[0] != len(meta):
                raise FormatError(f"{path.name}: {arr.shape[0]} rows for {len(meta)} index entries")
            arrays[kind] = arr
        order = sorted(arrays, key=lambda k: list(SensorKind).index(k))
        return cls(meta, {k: arrays[k] for k in order})


def windows_to_set(windows_by_unit: dict[SensorKind, list[Window]]) -> SensorSet:
    """Stack aligned windows; every unit must list the same windows in the same order."""
    units = list(windows_by_unit)
    if not units:
        raise ConfigError("no units given")
    first = windows_by_unit[units[0]]
    meta = WindowMeta.from_items(first)
    arrays = {}
    for u in units:
        ws = windows_by_unit[u]
        if [w.window_id for w in ws] != list(meta.window_ids):
            raise ConfigError(f"{u.value} windows are not aligned with {units[0].value}")
        arrays[u] = np.stack([w.data for w in ws]).astype(np.float32) if ws else np.zeros((0,))
    return SensorSet(meta, arrays)


def set_to_windows(ws: SensorSet, unit) -> list[Window]:
    kind = get_unit(unit).kind
    m = ws.meta
    return [
        Window(kind, np.asarray(ws.arrays[kind][i], dtype=np.float64), int(m.labels[i]), m.subjects[i],
               m.sessions[i], m.foods[i], float(m.starts[i]), m.noises[i])
        for i in range(len(ws))
    ]


def scalograms_to_array(scalos: list[Scalogram]) -> np.ndarray:
    return np.stack([s.values for s in scalos]).astype(np.float32)
