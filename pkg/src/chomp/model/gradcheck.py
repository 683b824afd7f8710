"""Analytic-vs-finite-difference gradient verification."""
from __future__ import annotations

import copy

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .networks import SqueezeExcite

REL_FLOOR = 1e-8


def layer_kind(model: nn.Module, param_name: str) -> str:
    """Coarse layer type owning a parameter (conv, depthwise, bn, se, linear, gate)."""
    parts = param_name.split(".")[:-1]
    mod, inside_se, inside_gate = model, False, False
    for p in parts:
        if p == "gate" and not isinstance(mod, SqueezeExcite):
            inside_gate = True
        mod = getattr(mod, p) if not p.isdigit() else mod[int(p)]
        inside_se |= isinstance(mod, SqueezeExcite)
    if inside_se:
        return "se"
    if inside_gate:
        return "gate"
    if isinstance(mod, nn.Conv2d):
        return "depthwise" if mod.groups > 1 else "conv"
    if isinstance(mod, (nn.BatchNorm1d, nn.BatchNorm2d)):
        return "bn"
    if isinstance(mod, nn.Linear):
        return "linear"
    return type(mod).__name__.lower()


def _sample_entries(named, n_samples: int, rng) -> list[tuple[str, int]]:
    picks = [(name, int(rng.integers(p.numel()))) for name, p in named]  # every tensor once
    sizes = np.array([p.numel() for _, p in named], dtype=np.float64)
    while len(picks) < n_samples:
        t = int(rng.choice(len(named), p=sizes / sizes.sum()))
        picks.append((named[t][0], int(rng.integers(named[t][1].numel()))))
    return picks


def gradient_check_report(model: nn.Module, xs, labels, n_samples: int = 200, h: float = 1e-5, seed: int = 0):
    """Per-entry relative errors of autograd vs central differences, in float64 eval mode."""
    net = copy.deepcopy(model).double().eval()
    if isinstance(xs, torch.Tensor):
        xs = [xs]
    xs = [torch.as_tensor(x, dtype=torch.float64) for x in xs]
    y = torch.as_tensor(labels, dtype=torch.long)
    fwd_in = xs if len(xs) > 1 or not hasattr(net, "backbone") else xs[0]

    def loss_value() -> torch.Tensor:
        return F.cross_entropy(net(fwd_in), y)

    net.zero_grad()
    loss_value().backward()
    named = [(n, p) for n, p in net.named_parameters()]
    params = dict(named)
    rng = np.random.default_rng(seed)
    rows = []
    with torch.no_grad():
        for name, flat in _sample_entries(named, n_samples, rng):
            p = params[name]
            view = p.view(-1)
            analytic = float(p.grad.view(-1)[flat])
            orig = float(view[flat])
            view[flat] = orig + h
            up = float(loss_value())
            view[flat] = orig - h
            down = float(loss_value())
            view[flat] = orig
            numeric = (up - down) / (2 * h)
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)
            rows.append(
                {"param": name, "index": flat, "kind": layer_kind(net, name),
                 "analytic": analytic, "numeric": numeric, "rel_error": rel}
            )
    return rows


def gradient_check(model: nn.Module, xs, labels, n_samples: int = 200, h: float = 1e-5, seed: int = 0) -> float:
    """Maximum relative error over the sampled parameters."""
    rows = gradient_check_report(model, xs, labels, n_samples, h, seed)
    return max(r["rel_error"] for r in rows)

