"""Model checkpoints: a JSON manifest plus one core-io tensor per state entry."""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..errors import FormatError
from ..io import read_tensor, write_tensor
from .networks import (
    BackboneConfig,
    FusionConfig,
    FusionModel,
    MBConvSpec,
    SingleSensorModel,
)

CHECKPOINT_MANIFEST = "checkpoint.json"


def _backbone_dict(cfg: BackboneConfig) -> dict:
    d = asdict(cfg)
    d["blocks"] = [[b.out_channels, b.stride, b.expansion_ratio] for b in cfg.blocks]
    return d


def _backbone_from(d: dict) -> BackboneConfig:
    d = dict(d)
    d["blocks"] = tuple(MBConvSpec(*b) for b in d["blocks"])
    return BackboneConfig(**d)


def model_config(model: nn.Module) -> dict:
    if isinstance(model, FusionModel):
        c = model.cfg
        return {
            "kind": "fusion",
            "units": [u.value for u in c.units],
            "backbones": [_backbone_dict(b) for b in c.backbones],
            "gate_ratio": c.gate_ratio,
            "head_hidden": c.head_hidden,
            "dropout": c.dropout,
        }
    return {"kind": "single", "units": [model.unit.value], "backbones": [_backbone_dict(model.backbone.cfg)]}


def model_from_config(cfg: dict) -> nn.Module:
    backbones = tuple(_backbone_from(b) for b in cfg["backbones"])
    if cfg["kind"] == "fusion":
        return FusionModel(FusionConfig(tuple(cfg["units"]), backbones, cfg["gate_ratio"], cfg["head_hidden"],
                                        cfg["dropout"]))
    if cfg["kind"] == "single":
        return SingleSensorModel(cfg["units"][0], backbones[0])
    raise FormatError(f"unknown model kind {cfg['kind']!r}")


def save_checkpoint(model: nn.Module, path, meta: dict | None = None) -> Path:
    root = Path(path)
    (root / "params").mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (name, t) in enumerate(model.state_dict().items()):
        fname = f"{i:04d}.bin"
        # integer buffers (BN batch counters) are small enough to survive float32 exactly
        write_tensor(t.detach().cpu().numpy().astype(np.float32).reshape(t.shape or (1,)), root / "params" / fname)
        entries.append({"name": name, "file": fname, "dtype": str(t.dtype).replace("torch.", ""),
                        "shape": list(t.shape)})
    manifest = {"model": model_config(model), "state": entries, "meta": meta or {}}
    (root / CHECKPOINT_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return root


def load_checkpoint(path) -> tuple[nn.Module, dict]:
    root = Path(path)
    mf = root / CHECKPOINT_MANIFEST
    if not mf.exists():
        raise FormatError(f"{root}: no {CHECKPOINT_MANIFEST}")
    manifest = json.loads(mf.read_text())
    model = model_from_config(manifest["model"])
    state = {}
    for e in manifest["state"]:
        arr = read_tensor(root / "params" / e["file"]).reshape(e["shape"])
        state[e["name"]] = torch.as_tensor(arr).to(getattr(torch, e["dtype"]))
    model.load_state_dict(state)
    model.eval()
    return model, manifest["meta"]
