"""End-to-end driver: recordings -> windows -> scalograms -> cross-validated models."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .baseline import FeatureScaler, RfConfig, extract_features, predict_rf, train_rf
from .dataset import SensorSet, WindowMeta, set_to_windows, windows_to_set
from .errors import ConfigError
from .evaluation import ProtocolReport, aggregate, score_fold, split_protocol
from .io import Recording
from .model import TrainConfig, train_fusion, train_single
from .model.training import predict
from .preprocess import filter_recording, segment_windows
from .scalogram import make_plan, window_scalogram
from .sync import align_recording, estimate_recording_offset
from .units import UNIT_ORDER, UNITS, SensorKind, get_unit

MEAL = "meal"
MEAL_NOTE = "meal fold trained on all single-food data (no downsampling)"


def _kinds(units) -> tuple[SensorKind, ...]:
    if units is None:
        return UNIT_ORDER
    if isinstance(units, str):
        units = [u for u in units.split(",") if u]
    return tuple(get_unit(u).kind for u in units)


def prepare_recording(rec: Recording, units=None, alignment: Recording | None = None) -> Recording:
    """Optionally remove the clock offset, then bandpass every requested unit."""
    if alignment is not None:
        rec = align_recording(rec, estimate_recording_offset(alignment))
    kinds = _kinds(units)
    rec = replace(rec, channels=tuple(c for c in rec.channels if c.unit in kinds))
    return filter_recording(rec, kinds)


def recording_windows(rec: Recording, units=None) -> dict[SensorKind, list]:
    """Windows per unit, restricted to starts present for every unit so fused inputs line up."""
    kinds = _kinds(units)
    per_unit = {k: segment_windows(rec, k) for k in kinds}
    common = set.intersection(*(set(w.window_id for w in ws) for ws in per_unit.values()))
    return {k: [w for w in ws if w.window_id in common] for k, ws in per_unit.items()}


def build_window_set(recordings, units=None, prepared: bool = False) -> SensorSet:
    kinds = _kinds(units)
    collected: dict[SensorKind, list] = {k: [] for k in kinds}
    for rec in sorted(recordings, key=lambda r: r.session_id):
        rec = rec if prepared else prepare_recording(rec, kinds)
        for k, ws in recording_windows(rec, kinds).items():
            collected[k].extend(ws)
    return windows_to_set(collected)


def build_scalogram_set(windows: SensorSet, units=None) -> SensorSet:
    """Log-power scalograms (not yet standardized) for each unit of a window set."""
    kinds = windows.units if units is None else _kinds(units)
    arrays = {}
    for k in kinds:
        plan = make_plan(UNITS[k])
        ws = set_to_windows(windows, k)
        arrays[k] = (np.stack([window_scalogram(w, plan).values for w in ws]).astype(np.float32)
                     if ws else np.zeros((0,), dtype=np.float32))
    return SensorSet(windows.meta, arrays)


def fold_sets(data: SensorSet, protocol: str, seed: int = 0):
    m = data.meta
    for fold in split_protocol(m.subjects, m.foods, m.labels, protocol, seed):
        yield fold, data.subset(fold.train), data.subset(fold.test)


def protocol_notes(meta: WindowMeta, protocol: str) -> list[str]:
    notes = []
    if protocol.lower() == "lofo" and MEAL in set(meta.foods.tolist()):
        notes.append(MEAL_NOTE)
    return notes


@dataclass
class CnnRun:
    """Per-fold predictions and models of one CNN protocol run."""

    reports: dict[str, ProtocolReport]
    models: dict[str, dict[str, object]] = field(default_factory=dict)  # tag -> fold -> model
    histories: dict[str, dict[str, list]] = field(default_factory=dict)


def run_cnn_protocol(data: SensorSet, protocol: str, units=None, fuse: bool = False,
                     cfg: TrainConfig | None = None, seed: int = 0, keep_models: bool = False,
                     progress=None, single_epochs: dict | None = None) -> CnnRun:
    """Cross-validate single-sensor models for ``units`` and, with ``fuse``, their gated fusion.

    Standardization statistics come from each fold's training and test
    partitions separately. The fused model reuses that fold's single-sensor
    models as pretrained backbones. ``single_epochs`` optionally caps
    single-sensor epochs per unit.
    """
    cfg = cfg or TrainConfig(seed=seed)
    kinds = _kinds(units) if units is not None else data.units
    if fuse and len(kinds) < 2:
        raise ConfigError("fusion needs at least two sensors")
    caps = {get_unit(u).kind: int(n) for u, n in (single_epochs or {}).items()}
    unit_cfg = {k: replace(cfg, max_epochs_single=caps[k]) if k in caps else cfg for k in kinds}
    tags = [k.value for k in kinds] + (["fusion"] if fuse else [])
    folds: dict[str, list] = {t: [] for t in tags}
    run = CnnRun(reports={}, models={t: {} for t in tags}, histories={t: {} for t in tags})
    for fold, train, test in fold_sets(data, protocol, seed):
        train, test = train.standardized(), test.standardized()
        singles = {}
        for k in kinds:
            res = train_single(train.inputs([k])[0], train.labels, k, unit_cfg[k])
            singles[k] = res.model
            preds = predict(res.model, test.inputs([k])[0])
            folds[k.value].append(score_fold(preds, test.labels, fold.key))
            run.histories[k.value][fold.key] = res.history
            if progress:
                progress(k.value, fold.key, folds[k.value][-1])
        if fuse:
            res = train_fusion(train.inputs(kinds), train.labels, kinds, [singles[k] for k in kinds], cfg)
            preds = predict(res.model, test.inputs(kinds))
            folds["fusion"].append(score_fold(preds, test.labels, fold.key))
            run.histories["fusion"][fold.key] = res.history
            if keep_models:
                run.models["fusion"][fold.key] = res.model
            if progress:
                progress("fusion", fold.key, folds["fusion"][-1])
        if keep_models:
            for k in kinds:
                run.models[k.value][fold.key] = singles[k]
    notes = protocol_notes(data.meta, protocol)
    run.reports = {t: aggregate(r, notes) for t, r in folds.items()}
    return run


def feature_matrix(windows: SensorSet, unit) -> np.ndarray:
    kind = get_unit(unit).kind
    rows = [extract_features(w) for w in set_to_windows(windows, kind)]
    return np.vstack(rows) if rows else np.zeros((0, 0))


def run_baseline_protocol(windows: SensorSet, unit, protocol: str, cfg: RfConfig | None = None,
                          seed: int = 0) -> ProtocolReport:
    """Feature + random forest baseline under LOSO/LOFO; features z-scored with training statistics."""
    X = feature_matrix(windows, unit)
    m = windows.meta
    reports = []
    for fold in split_protocol(m.subjects, m.foods, m.labels, protocol, seed):
        scaler = FeatureScaler().fit(X[fold.train])
        model = train_rf(scaler.transform(X[fold.train]), m.labels[fold.train], cfg,
                         keys=m.window_ids[fold.train])
        preds, _ = predict_rf(model, scaler.transform(X[fold.test]))
        reports.append(score_fold(preds, m.labels[fold.test], fold.key))
    return aggregate(reports, protocol_notes(m, protocol))
