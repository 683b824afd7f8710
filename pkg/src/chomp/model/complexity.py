"""Parameter and FLOP accounting for a single forward sample.

Convolutions and linear layers count 2 FLOPs per multiply-accumulate plus one
per bias add.  Element-wise work is counted once per output element: BN
(2: scale and shift), SiLU, sigmoid, pooling, SE/gate multiplies and
residual adds.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .networks import FusionModel, MBConv, SqueezeExcite, input_shape

FLOP_CONVENTION = "2 FLOPs per multiply-accumulate"


@dataclass(frozen=True)
class ComplexityReport:
    params: int
    flops: int
    model_size: int  # bytes at float32
    convention: str = FLOP_CONVENTION

    def as_dict(self) -> dict:
        return {
            "params": self.params,
            "params_m": round(self.params / 1e6, 4),
            "flops": self.flops,
            "flops_m": round(self.flops / 1e6, 4),
            "model_size_bytes": self.model_size,
            "model_size_mb": round(self.model_size / 2**20, 4),
            "flop_convention": self.convention,
        }


def count_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def _module_flops(mod: nn.Module, inputs, output) -> int:
    out = output.numel()
    if isinstance(mod, nn.Conv2d):
        per_out = (mod.in_channels // mod.groups) * mod.kernel_size[0] * mod.kernel_size[1]
        return 2 * per_out * out + (out if mod.bias is not None else 0)
    if isinstance(mod, nn.Linear):
        return 2 * mod.in_features * out + (out if mod.bias is not None else 0)
    if isinstance(mod, (nn.BatchNorm1d, nn.BatchNorm2d)):
        return 2 * out
    if isinstance(mod, (nn.SiLU, nn.Sigmoid)):
        return out
    if isinstance(mod, nn.AdaptiveAvgPool2d):
        return inputs[0].numel()
    if isinstance(mod, SqueezeExcite):
        return out  # recalibration multiply
    if isinstance(mod, MBConv) and mod.use_residual:
        return out
    return 0


def complexity(model: nn.Module, shapes=None) -> ComplexityReport:
    """Count params and per-sample FLOPs with a batch-1 eval forward pass."""
    units = model.units
    shapes = shapes or [input_shape(u) for u in units]
    total = [0]
    hooks = [
        m.register_forward_hook(lambda mod, i, o: total.__setitem__(0, total[0] + _module_flops(mod, i, o)))
        for m in model.modules()
    ]
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            xs = [torch.zeros((1, *s)) for s in shapes]
            model(xs)
    finally:
        for h in hooks:
            h.remove()
        model.train(was_training)
    flops = total[0]
    if isinstance(model, FusionModel):
        flops += model.cfg.concat_dim  # gate multiply
    params = count_params(model)
    return ComplexityReport(params=params, flops=flops, model_size=4 * params)
