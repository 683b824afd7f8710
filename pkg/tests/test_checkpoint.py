import json

import numpy as np
import pytest
import torch

from chomp.errors import FormatError
from chomp.model import build_fusion, build_single
from chomp.model.checkpoint import CHECKPOINT_MANIFEST, load_checkpoint, model_from_config, save_checkpoint
from chomp.model.networks import input_shape
from chomp.model.training import predict


def _perturb(model):
    g = torch.Generator().manual_seed(0)
    with torch.no_grad():
        for p in model.parameters():
            p.add_(0.01 * torch.randn(p.shape, generator=g))
        for name, b in model.named_buffers():
            if name.endswith("running_var"):
                b.mul_(1.5)
            elif name.endswith("num_batches_tracked"):
                b.fill_(17)


@pytest.mark.parametrize("kind", ["single", "fusion"])
def test_roundtrip(kind, tmp_path):
    units = ("pressure",) if kind == "single" else ("pressure", "ppg")
    model = build_single(units[0], seed=3) if kind == "single" else build_fusion(units, seed=3)
    _perturb(model)
    save_checkpoint(model, tmp_path / "ck", {"fold": "S01"})
    back, meta = load_checkpoint(tmp_path / "ck")
    assert meta == {"fold": "S01"} and not back.training
    for (n, a), b in zip(model.state_dict().items(), back.state_dict().values()):
        assert a.dtype == b.dtype and torch.equal(a, b), n
    xs = [np.random.default_rng(1).normal(size=(3, *input_shape(u))).astype(np.float32) for u in units]
    inp = xs[0] if kind == "single" else xs
    assert np.array_equal(predict(model.eval(), inp), predict(back, inp))


def test_missing_and_bad(tmp_path):
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path)
    save_checkpoint(build_single("pressure"), tmp_path)
    m = json.loads((tmp_path / CHECKPOINT_MANIFEST).read_text())
    with pytest.raises(FormatError):
        model_from_config({**m["model"], "kind": "ensemble"})
