"""EfficientNet-style backbone, single-sensor classifier and gated late fusion."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from ..errors import ConfigError
from ..scalogram import expected_shape
from ..units import SensorKind, get_unit

N_CLASSES = 3
FEATURE_DIM = 112
DROPOUT = 0.2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class MBConvSpec:
    out_channels: int
    stride: int
    expansion_ratio: int

    def __post_init__(self):
        if self.stride not in (1, 2) or self.expansion_ratio < 1:
            raise ConfigError(f"invalid MBConv spec {self}")


# (out_channels, stride, expansion); final width 112, total stride 16 incl. stem
DEFAULT_BLOCKS = tuple(
    MBConvSpec(*b)
    for b in ((16, 1, 1), (24, 2, 6), (64, 2, 6), (96, 2, 6), (96, 1, 6), (112, 1, 6), (112, 1, 6))
)


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int
    stem_channels: int = 16
    blocks: tuple[MBConvSpec, ...] = DEFAULT_BLOCKS
    se_reduction: float = 0.25
    kernel_size: int = 3

    @property
    def feature_dim(self) -> int:
        return self.blocks[-1].out_channels

    @classmethod
    def for_unit(cls, unit, **kw) -> "BackboneConfig":
        return cls(in_channels=2 * get_unit(unit).channels_per_earable, **kw)


def _bn(c: int) -> nn.BatchNorm2d:
    return nn.BatchNorm2d(c, eps=BN_EPS, momentum=BN_MOMENTUM)


class SqueezeExcite(nn.Module):
    def __init__(self, channels: int, squeezed: int):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.reduce = nn.Conv2d(channels, squeezed, 1)
        self.act = nn.SiLU()
        self.expand = nn.Conv2d(squeezed, channels, 1)
        self.gate = nn.Sigmoid()

    def forward(self, x):
        return x * self.gate(self.expand(self.act(self.reduce(self.pool(x)))))


class MBConv(nn.Module):
    """Expansion 1x1 -> depthwise kxk -> SE -> projection 1x1, residual when shapes allow."""

    def __init__(self, in_ch: int, spec: MBConvSpec, se_reduction: float = 0.25, kernel_size: int = 3):
        super().__init__()
        mid = in_ch * spec.expansion_ratio
        layers: list[nn.Module] = []
        if spec.expansion_ratio != 1:
            layers += [nn.Conv2d(in_ch, mid, 1, bias=False), _bn(mid), nn.SiLU()]
        layers += [
            nn.Conv2d(mid, mid, kernel_size, spec.stride, kernel_size // 2, groups=mid, bias=False),
            _bn(mid),
            nn.SiLU(),
            SqueezeExcite(mid, max(1, int(in_ch * se_reduction))),
            nn.Conv2d(mid, spec.out_channels, 1, bias=False),
            _bn(spec.out_channels),
        ]
        self.body = nn.Sequential(*layers)
        self.use_residual = spec.stride == 1 and in_ch == spec.out_channels

    def forward(self, x):
        y = self.body(x)
        return x + y if self.use_residual else y


class Backbone(nn.Module):
    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        k = cfg.kernel_size
        self.stem = nn.Sequential(
            nn.Conv2d(cfg.in_channels, cfg.stem_channels, k, 2, k // 2, bias=False),
            _bn(cfg.stem_channels),
            nn.SiLU(),
        )
        blocks, c = [], cfg.stem_channels
        for spec in cfg.blocks:
            blocks.append(MBConv(c, spec, cfg.se_reduction, k))
            c = spec.out_channels
        self.blocks = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)

    @property
    def feature_dim(self) -> int:
        return self.cfg.feature_dim

    def forward(self, x):
        return torch.flatten(self.pool(self.blocks(self.stem(x))), 1)


def init_weights(module: nn.Module, seed: int) -> None:
    """He-uniform convolutions and linears, BN gamma=1 beta=0, zero biases."""
    g = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                nn.init.kaiming_uniform_(m.weight, nonlinearity="relu", generator=g)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
                m.weight.fill_(1.0)
                m.bias.zero_()
                m.reset_running_stats()


def build_backbone(cfg: BackboneConfig, seed: int = 0) -> Backbone:
    net = Backbone(cfg)
    init_weights(net, seed)
    return net


def _check_input(x: torch.Tensor, shape, name: str) -> None:
    if x.dim() != 4 or tuple(x.shape[1:2]) != tuple(shape[:1]):
        raise ConfigError(f"{name}: expected input (B, {shape[0]}, F, T), got {tuple(x.shape)}")


class SingleSensorModel(nn.Module):
    def __init__(self, unit: SensorKind, cfg: BackboneConfig | None = None, n_classes: int = N_CLASSES):
        super().__init__()
        self.unit = get_unit(unit).kind
        self.backbone = Backbone(cfg or BackboneConfig.for_unit(self.unit))
        self.dropout = nn.Dropout(DROPOUT)
        self.classifier = nn.Linear(self.backbone.feature_dim, n_classes)

    @property
    def units(self) -> tuple[SensorKind, ...]:
        return (self.unit,)

    def forward(self, x):
        if isinstance(x, (list, tuple)):
            (x,) = x
        _check_input(x, (self.backbone.cfg.in_channels,), self.unit.value)
        return self.classifier(self.dropout(self.backbone(x)))


def build_single(unit, seed: int = 0, cfg: BackboneConfig | None = None) -> SingleSensorModel:
    model = SingleSensorModel(unit, cfg)
    init_weights(model, seed)
    return model


@dataclass(frozen=True)
class FusionConfig:
    units: tuple[SensorKind, ...]
    backbones: tuple[BackboneConfig, ...] = field(default=())
    gate_ratio: float = 0.25
    head_hidden: int = 112
    dropout: float = DROPOUT

    def __post_init__(self):
        units = tuple(get_unit(u).kind for u in self.units)
        object.__setattr__(self, "units", units)
        if not self.backbones:
            object.__setattr__(self, "backbones", tuple(BackboneConfig.for_unit(u) for u in units))
        if len(self.backbones) != len(units) or len(units) < 1:
            raise ConfigError("one backbone config per fused sensor is required")

    @property
    def concat_dim(self) -> int:
        return sum(b.feature_dim for b in self.backbones)


class FusionModel(nn.Module):
    """Per-sensor backbones -> concat -> BN -> sigmoid gate recalibration -> MLP head."""

    def __init__(self, cfg: FusionConfig, n_classes: int = N_CLASSES):
        super().__init__()
        self.cfg = cfg
        self.backbones = nn.ModuleList(Backbone(b) for b in cfg.backbones)
        d = cfg.concat_dim
        hidden = max(1, int(d * cfg.gate_ratio))
        self.norm = nn.BatchNorm1d(d, eps=BN_EPS, momentum=BN_MOMENTUM)
        self.gate = nn.Sequential(nn.Linear(d, hidden), nn.SiLU(), nn.Linear(hidden, d), nn.Sigmoid())
        self.head = nn.Sequential(
            nn.Linear(d, cfg.head_hidden),
            nn.SiLU(),
            nn.Dropout(cfg.dropout),
            nn.Linear(cfg.head_hidden, n_classes),
        )

    @property
    def units(self) -> tuple[SensorKind, ...]:
        return self.cfg.units

    def backbone_features(self, xs) -> torch.Tensor:
        """Concatenated raw backbone features (B, N*112), before normalization."""
        if len(xs) != len(self.backbones):
            raise ConfigError(f"fusion over {len(self.backbones)} sensors got {len(xs)} inputs")
        feats = []
        for x, net, unit in zip(xs, self.backbones, self.cfg.units):
            _check_input(x, (net.cfg.in_channels,), unit.value)
            feats.append(net(x))
        if len({f.shape[0] for f in feats}) != 1:
            raise ConfigError("fused inputs disagree on batch size")
        return torch.cat(feats, dim=1)

    def recalibrate(self, feats: torch.Tensor):
        z = self.norm(feats)
        g = self.gate(z)
        return z * g, g

    def fused_features(self, xs):
        return self.recalibrate(self.backbone_features(xs))

    def head_from_features(self, feats: torch.Tensor) -> torch.Tensor:
        return self.head(self.recalibrate(feats)[0])

    def forward(self, xs):
        return self.head_from_features(self.backbone_features(xs))

    def head_parameters(self):
        for mod in (self.norm, self.gate, self.head):
            yield from mod.parameters()

    def load_backbones(self, pretrained) -> None:
        """Copy weights from pretrained single-sensor models or backbones, in unit order."""
        if len(pretrained) != len(self.backbones):
            raise ConfigError("one pretrained backbone per fused sensor is required")
        for net, src in zip(self.backbones, pretrained):
            if src is None:
                raise ConfigError("missing pretrained backbone")
            src = getattr(src, "backbone", src)
            net.load_state_dict(src.state_dict())


def build_fusion(units, seed: int = 0, cfg: FusionConfig | None = None) -> FusionModel:
    model = FusionModel(cfg or FusionConfig(tuple(units)))
    init_weights(model, seed)
    return model


def input_shape(unit) -> tuple[int, int, int]:
    return expected_shape(unit)
