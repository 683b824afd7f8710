"""CNN backbone, single-sensor and fusion classifiers, training and accounting."""
from .complexity import ComplexityReport, complexity
from .gradcheck import gradient_check
from .networks import (
    DEFAULT_BLOCKS,
    Backbone,
    BackboneConfig,
    FusionConfig,
    FusionModel,
    MBConv,
    MBConvSpec,
    SingleSensorModel,
    build_backbone,
    build_fusion,
    build_single,
)
from .training import TrainConfig, TrainResult, train_fusion, train_single

__all__ = [
    "DEFAULT_BLOCKS",
    "Backbone",
    "BackboneConfig",
    "ComplexityReport",
    "FusionConfig",
    "FusionModel",
    "MBConv",
    "MBConvSpec",
    "SingleSensorModel",
    "TrainConfig",
    "TrainResult",
    "build_backbone",
    "build_fusion",
    "build_single",
    "complexity",
    "gradient_check",
    "train_fusion",
    "train_single",
]
