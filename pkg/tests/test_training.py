import numpy as np
import pytest
import torch

from chomp.errors import ConfigError
from chomp.model import (
    BackboneConfig,
    FusionConfig,
    MBConvSpec,
    TrainConfig,
    build_fusion,
    build_single,
    train_fusion,
    train_single,
)
from chomp.model.training import EarlyStopping, batch_indices, stratified_split

TINY = (MBConvSpec(8, 1, 1), MBConvSpec(8, 2, 2))
UNITS = ("imu", "pressure")
CH = {"imu": 12, "pressure": 2}


def tiny_cfg(u):
    return BackboneConfig.for_unit(u, stem_channels=8, blocks=TINY)


def toy_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 3
    xs = []
    for u in UNITS:
        x = rng.normal(size=(n, CH[u], 8, 8)).astype(np.float32)
        x[:, 0] += (y[:, None, None] - 1) * 1.5
        xs.append(x)
    return xs, y


def tiny_single(u, seed=0):
    return build_single(u, seed=seed, cfg=tiny_cfg(u))


def tiny_fusion(seed=0):
    return build_fusion(UNITS, seed=seed, cfg=FusionConfig(UNITS, tuple(tiny_cfg(u) for u in UNITS)))


def test_defaults():
    c = TrainConfig()
    assert (c.max_epochs_single, c.max_epochs_fusion, c.batch_size, c.patience, c.warmup_epochs) == (100, 30, 64, 20, 3)
    assert (c.lr_single, c.lr_fusion, c.val_fraction) == (1e-3, 1e-4, 0.2)


def test_early_stopping_counts():
    s = EarlyStopping(20)
    assert s.step(1, 1.0) == (True, False)
    flags = [s.step(e, 1.0) for e in range(2, 22)]
    assert [f[1] for f in flags] == [False] * 19 + [True]
    s2 = EarlyStopping(3)
    s2.step(1, 1.0)
    s2.step(2, 2.0)
    assert s2.step(3, 0.5) == (True, False) and s2.bad_epochs == 0


def test_stratified_split():
    y = np.array([0] * 10 + [1] * 10 + [2] * 5)
    tr, va = stratified_split(y, 0.2, 0)
    assert np.intersect1d(tr, va).size == 0 and tr.size + va.size == y.size
    assert np.bincount(y[va]).tolist() == [2, 2, 1]
    assert np.array_equal(va, stratified_split(y, 0.2, 0)[1])


def test_batches_of_64():
    b = batch_indices(200, 64, np.random.default_rng(0))
    assert [len(x) for x in b] == [64, 64, 64, 8]
    assert sorted(np.concatenate(b).tolist()) == list(range(200))
    # a trailing singleton is merged so BatchNorm sees at least two samples
    assert [len(x) for x in batch_indices(129, 64, np.random.default_rng(0))] == [64, 65]


def test_early_stop_after_exactly_patience_bad_epochs():
    xs, y = toy_data()
    cfg = TrainConfig(lr_single=0.0, max_epochs_single=100, patience=20)
    res = train_single(xs[0], y, "imu", cfg, model=tiny_single("imu"))
    # lr 0 leaves the validation loss flat, so epoch 1 is the last improvement
    assert res.stopped_early and res.best_epoch == 1 and res.epochs_run == 21


def test_single_epoch_cap():
    xs, y = toy_data()
    res = train_single(xs[0], y, "imu", TrainConfig(max_epochs_single=4), model=tiny_single("imu"))
    assert res.epochs_run == 4 and all(h["phase"] == "single" for h in res.history)


def test_single_learns_and_is_deterministic():
    xs, y = toy_data()
    cfg = TrainConfig(max_epochs_single=15, seed=2)
    a = train_single(xs[0], y, "imu", cfg, model=tiny_single("imu", 2))
    b = train_single(xs[0], y, "imu", cfg, model=tiny_single("imu", 2))
    assert [h["val_loss"] for h in a.history] == [h["val_loss"] for h in b.history]
    for p, q in zip(a.model.state_dict().values(), b.model.state_dict().values()):
        assert torch.equal(p, q)
    assert a.history[-1]["train_loss"] < a.history[0]["train_loss"]


def test_restores_best_weights():
    xs, y = toy_data()
    res = train_single(xs[0], y, "imu", TrainConfig(max_epochs_single=8), model=tiny_single("imu"))
    assert res.best_val_loss == min(h["val_loss"] for h in res.history)
    assert res.history[res.best_epoch - 1]["val_loss"] == res.best_val_loss


def _pretrained(xs, y):
    return [train_single(x, y, u, TrainConfig(max_epochs_single=2), model=tiny_single(u)).model
            for x, u in zip(xs, UNITS)]


def test_warmup_freezes_backbones():
    xs, y = toy_data()
    singles = _pretrained(xs, y)
    before = [{k: v.clone() for k, v in s.backbone.state_dict().items()} for s in singles]
    res = train_fusion(xs, y, UNITS, singles, TrainConfig(max_epochs_fusion=3), model=tiny_fusion())
    assert [h["phase"] for h in res.history] == ["warmup"] * 3
    for net, ref in zip(res.model.backbones, before):
        for k, v in net.state_dict().items():
            assert torch.equal(v, ref[k]), k  # weights and BN running statistics


def test_joint_phase_updates_backbones():
    xs, y = toy_data()
    singles = _pretrained(xs, y)
    ref = {k: v.clone() for k, v in singles[0].backbone.state_dict().items()}
    res = train_fusion(xs, y, UNITS, singles,
                       TrainConfig(max_epochs_fusion=6, lr_fusion=1e-2, patience=100), model=tiny_fusion())
    assert [h["phase"] for h in res.history] == ["warmup"] * 3 + ["joint"] * 3
    assert res.best_epoch > 3
    assert any(not torch.equal(v, ref[k]) for k, v in res.model.backbones[0].state_dict().items())


def test_fusion_epoch_cap():
    xs, y = toy_data()
    res = train_fusion(xs, y, UNITS, _pretrained(xs, y), TrainConfig(), model=tiny_fusion())
    assert res.epochs_run <= 30


def test_missing_class_and_pretrained_errors():
    xs, y = toy_data()
    with pytest.raises(ConfigError):
        train_single(xs[0], np.where(y == 2, 0, y), "imu", TrainConfig(max_epochs_single=1))
    with pytest.raises(ConfigError):
        train_fusion(xs, y, UNITS, [None, None])
    with pytest.raises(ConfigError):
        train_fusion(xs[:1], y, UNITS, _pretrained(xs, y), model=tiny_fusion())
