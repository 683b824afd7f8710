"""Adam + cross-entropy training with a stratified validation split and early stopping."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError
from ..evaluation import score_fold
from .networks import N_CLASSES, FusionModel, build_fusion, build_single


@dataclass(frozen=True)
class TrainConfig:
    lr_single: float = 1e-3
    lr_fusion: float = 1e-4
    lr_warmup: float = 1e-3
    warmup_epochs: int = 3
    max_epochs_single: int = 100
    max_epochs_fusion: int = 30
    batch_size: int = 64
    val_fraction: float = 0.2
    patience: int = 20
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0


@dataclass
class TrainResult:
    model: nn.Module
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.history)


class EarlyStopping:
    """Stop once ``patience`` consecutive epochs fail to improve the best loss."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.best_epoch = 0
        self.bad_epochs = 0

    def step(self, epoch: int, loss: float) -> tuple[bool, bool]:
        """Return (improved, should_stop)."""
        if loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = loss, epoch, 0
            return True, False
        self.bad_epochs += 1
        return False, self.bad_epochs >= self.patience


def stratified_split(labels, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class split; returns (train_idx, val_idx), both sorted."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    val = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n_val = int(round(fraction * idx.size))
        if idx.size > 1:
            n_val = min(max(n_val, 1), idx.size - 1)
        else:
            n_val = 0
        val.extend(rng.permutation(idx)[:n_val])
    val = np.sort(np.asarray(val, dtype=np.int64))
    train = np.setdiff1d(np.arange(labels.size), val)
    return train, val


def batch_indices(n: int, batch_size: int, rng) -> list[np.ndarray]:
    order = rng.permutation(n)
    batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        # BatchNorm cannot normalise a single sample in training mode
        batches[-2] = np.concatenate(batches[-2:])
        batches.pop()
    return batches


def _as_inputs(inputs) -> list[torch.Tensor]:
    if isinstance(inputs, (np.ndarray, torch.Tensor)):
        inputs = [inputs]
    xs = [torch.as_tensor(np.asarray(x, dtype=np.float32)) for x in inputs]
    # NHWC is markedly faster for the depthwise convolutions on CPU
    return [x.contiguous(memory_format=torch.channels_last) if x.dim() == 4 else x for x in xs]


def _forward(model, xs, idx):
    batch = [x[idx] for x in xs]
    return model(batch if isinstance(model, FusionModel) else batch[0])


def evaluate_loss(model, xs, y, idx, batch_size: int = 256, forward=None) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and predictions over ``idx`` in eval mode."""
    forward = forward or (lambda b: _forward(model, xs, b))
    model.eval()
    total, preds = 0.0, []
    with torch.no_grad():
        for i in range(0, len(idx), batch_size):
            b = torch.as_tensor(idx[i : i + batch_size])
            logits = forward(b)
            total += float(F.cross_entropy(logits, y[b], reduction="sum"))
            preds.append(logits.argmax(dim=1).numpy())
    preds = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    return total / max(len(idx), 1), preds


def predict(model, inputs, batch_size: int = 256) -> np.ndarray:
    xs = _as_inputs(inputs)
    model.to(memory_format=torch.channels_last)
    n = xs[0].shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    y = torch.zeros(n, dtype=torch.long)
    return evaluate_loss(model, xs, y, np.arange(n), batch_size)[1]


def _check_classes(labels) -> None:
    missing = set(range(N_CLASSES)) - set(np.unique(labels).tolist())
    if missing:
        raise ConfigError(f"training set lacks classes {sorted(missing)}")


def _fit(model, xs, y, cfg: TrainConfig, phases, history_seed: int) -> TrainResult:
    """Shared loop. ``phases`` is a list of (n_epochs, optimizer factory, freeze fn, tag, forward).

    ``forward`` maps a batch index tensor to logits; ``None`` means the plain model call.
    """
    model.to(memory_format=torch.channels_last)
    labels = y.numpy()
    train_idx, val_idx = stratified_split(labels, cfg.val_fraction, cfg.seed)
    rng = np.random.default_rng(history_seed)
    torch.manual_seed(history_seed)
    stopper = EarlyStopping(cfg.patience)
    result = TrainResult(model=model)
    best_state = copy.deepcopy(model.state_dict())
    epoch = 0
    for n_epochs, make_opt, prepare, tag, forward in phases:
        if n_epochs <= 0:
            continue
        forward = forward or (lambda b: _forward(model, xs, b))
        opt = make_opt()
        for _ in range(n_epochs):
            epoch += 1
            model.train()
            prepare()
            running = 0.0
            for b in batch_indices(len(train_idx), cfg.batch_size, rng):
                idx = torch.as_tensor(train_idx[b])
                opt.zero_grad(set_to_none=True)
                loss = F.cross_entropy(forward(idx), y[idx])
                loss.backward()
                opt.step()
                running += loss.item() * len(b)
            val_loss, val_pred = evaluate_loss(model, xs, y, val_idx, forward=forward)
            f1 = score_fold(val_pred, labels[val_idx]).macro_f1 if len(val_idx) else float("nan")
            result.history.append(
                {"epoch": epoch, "phase": tag, "train_loss": running / max(len(train_idx), 1),
                 "val_loss": val_loss, "val_macro_f1": f1}
            )
            improved, stop = stopper.step(epoch, val_loss)
            if improved:
                best_state = copy.deepcopy(model.state_dict())
            if stop:
                result.stopped_early = True
                break
        if result.stopped_early:
            break
    model.load_state_dict(best_state)
    model.eval()
    result.best_epoch, result.best_val_loss = stopper.best_epoch, stopper.best
    return result


def _adam(params, lr, cfg: TrainConfig):
    return torch.optim.Adam(params, lr=lr, betas=cfg.betas, eps=cfg.adam_eps)


def train_single(inputs, labels, unit, cfg: TrainConfig | None = None, model=None) -> TrainResult:
    """Train a single-sensor model from scratch (or from ``model``) and keep the best-validation weights."""
    cfg = cfg or TrainConfig()
    xs = _as_inputs(inputs)
    y = torch.as_tensor(np.asarray(labels), dtype=torch.long)
    _check_classes(y.numpy())
    if len(y) < 2 * 2:
        raise ConfigError("need at least two batches worth of samples")
    model = model if model is not None else build_single(unit, seed=cfg.seed)
    phases = [(cfg.max_epochs_single, lambda: _adam(model.parameters(), cfg.lr_single, cfg), lambda: None, "single", None)]
    return _fit(model, xs, y, cfg, phases, cfg.seed)


def train_fusion(inputs, labels, units, pretrained, cfg: TrainConfig | None = None, model=None) -> TrainResult:
    """Warm up gate and head on frozen pretrained backbones, then fine-tune everything."""
    cfg = cfg or TrainConfig()
    units = tuple(units)
    if pretrained is None or len(pretrained) != len(units) or any(p is None for p in pretrained):
        raise ConfigError("train_fusion needs one pretrained backbone per sensor")
    xs = _as_inputs(inputs)
    if len(xs) != len(units):
        raise ConfigError("one input array per fused sensor is required")
    y = torch.as_tensor(np.asarray(labels), dtype=torch.long)
    _check_classes(y.numpy())
    model = model if model is not None else build_fusion(units, seed=cfg.seed)
    model.load_backbones(pretrained)

    def freeze():
        for net in model.backbones:
            net.eval()  # running statistics stay untouched too
            for p in net.parameters():
                p.requires_grad_(False)

    def unfreeze():
        for p in model.backbones.parameters():
            p.requires_grad_(True)

    warm = min(cfg.warmup_epochs, cfg.max_epochs_fusion)
    cache = {}

    def frozen_forward(idx):
        # frozen eval-mode backbones are deterministic, so their features are computed once
        if "feats" not in cache:
            with torch.no_grad():
                n = len(y)
                cache["feats"] = torch.cat([
                    model.backbone_features([x[i : i + 256] for x in xs]) for i in range(0, n, 256)
                ])
        return model.head_from_features(cache["feats"][idx])

    phases = [
        (warm, lambda: _adam(list(model.head_parameters()), cfg.lr_warmup, cfg), freeze, "warmup", frozen_forward),
        (cfg.max_epochs_fusion - warm, lambda: (unfreeze(), _adam(model.parameters(), cfg.lr_fusion, cfg))[1],
         lambda: None, "joint", None),
    ]
    return _fit(model, xs, y, cfg, phases, cfg.seed)
