"""Cross-validation splits (LOSO / LOFO) and metric aggregation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

N_CLASSES = 3
LOSO = "loso"
LOFO = "lofo"
OTHER = 2
LOFO_OTHER_TEST_FRACTION = 0.2


@dataclass(frozen=True)
class FoldReport:
    fold_key: str
    macro_f1: float
    macro_precision: float
    macro_recall: float
    confusion: np.ndarray  # rows = true class, cols = predicted
    n_test: int
    per_class_f1: tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {
            "fold": self.fold_key,
            "macro_f1": self.macro_f1,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "confusion": self.confusion.tolist(),
            "n_test": self.n_test,
        }


@dataclass(frozen=True)
class ProtocolReport:
    folds: tuple[FoldReport, ...]
    median_f1: float
    q1: float
    q3: float
    precision: float
    recall: float
    confusion: np.ndarray
    notes: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "median_f1": self.median_f1,
            "q1": self.q1,
            "q3": self.q3,
            "precision": self.precision,
            "recall": self.recall,
            "confusion": self.confusion.tolist(),
            "folds": [f.as_dict() for f in self.folds],
            "notes": list(self.notes),
        }


def confusion_matrix(preds, labels, n_classes: int = N_CLASSES) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return cm


def _per_class(cm: np.ndarray):
    tp = np.diag(cm).astype(np.float64)
    pred_tot = cm.sum(axis=0)
    true_tot = cm.sum(axis=1)
    precision = np.divide(tp, pred_tot, out=np.zeros_like(tp), where=pred_tot > 0)
    recall = np.divide(tp, true_tot, out=np.zeros_like(tp), where=true_tot > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return precision, recall, f1


def score_fold(preds, labels, fold_key: str = "") -> FoldReport:
    """Macro-averaged metrics over the three classes; empty denominators count as 0."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ConfigError(f"{preds.size} predictions for {labels.size} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES or preds.min() < 0 or preds.max() >= N_CLASSES):
        raise ConfigError("labels must lie in {0, 1, 2}")
    cm = confusion_matrix(preds, labels)
    p, r, f1 = _per_class(cm)
    return FoldReport(
        fold_key=str(fold_key),
        macro_f1=float(f1.mean()),
        macro_precision=float(p.mean()),
        macro_recall=float(r.mean()),
        confusion=cm,
        n_test=int(labels.size),
        per_class_f1=tuple(float(v) for v in f1),
    )


def aggregate(reports, notes=()) -> ProtocolReport:
    """Median and type-7 quartiles of fold macro-F1, pooled precision/recall."""
    reports = sorted(reports, key=lambda r: r.fold_key)
    if not reports:
        raise ConfigError("no fold reports to aggregate")
    f1 = np.array([r.macro_f1 for r in reports])
    q1, med, q3 = np.quantile(f1, [0.25, 0.5, 0.75], method="linear")
    cm = sum(r.confusion for r in reports)
    p, r, _ = _per_class(cm)
    return ProtocolReport(
        folds=tuple(reports),
        median_f1=float(med),
        q1=float(q1),
        q3=float(q3),
        precision=float(p.mean()),
        recall=float(r.mean()),
        confusion=cm,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class Fold:
    key: str
    train: np.ndarray  # indices into the dataset
    test: np.ndarray


def split_protocol(subjects, foods, labels, protocol: str, seed: int = 0) -> list[Fold]:
    """Index folds for LOSO (one per subject) or LOFO (one per food label).

    LOFO assigns non-chewing windows 80/20 to train/test per fold with a
    seeded, subject-stratified draw over sessions' windows.
    """
    subjects = np.asarray(subjects, dtype=object)
    labels = np.asarray(labels)
    foods = np.asarray([f if f is not None else "" for f in foods], dtype=object)
    protocol = protocol.lower()
    folds = []
    if protocol == LOSO:
        keys = sorted(set(subjects.tolist()))
        if len(keys) < 2:
            raise ConfigError("LOSO needs at least two subjects")
        for k in keys:
            test = np.flatnonzero(subjects == k)
            train = np.flatnonzero(subjects != k)
            folds.append(Fold(str(k), train, test))
    elif protocol == LOFO:
        chew = labels != OTHER
        keys = sorted(set(foods[chew].tolist()) - {""})
        if len(keys) < 2:
            raise ConfigError("LOFO needs at least two food labels")
        other_idx = np.flatnonzero(~chew)
        for i, k in enumerate(keys):
            rng = np.random.default_rng([seed, i])
            other_test = []
            for s in sorted(set(subjects[other_idx].tolist())):
                idx = other_idx[subjects[other_idx] == s]
                n_test = int(round(LOFO_OTHER_TEST_FRACTION * idx.size))
                other_test.extend(rng.permutation(idx)[:n_test])
            other_test = np.asarray(sorted(other_test), dtype=np.int64)
            other_train = np.setdiff1d(other_idx, other_test)
            test = np.sort(np.concatenate([np.flatnonzero(chew & (foods == k)), other_test]))
            train = np.sort(np.concatenate([np.flatnonzero(chew & (foods != k)), other_train]))
            folds.append(Fold(str(k), train, test))
    else:
        raise ConfigError(f"unknown protocol {protocol!r}")
    return folds
