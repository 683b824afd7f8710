"""Feature + Random Forest baseline."""
from .features import MFCC_PARAMS, FeatureScaler, MfccParams, extract_features, mfcc, spectral_centroid
from .forest import DecisionTree, RandomForest, RfConfig, predict_rf, train_rf

__all__ = [
    "MFCC_PARAMS",
    "FeatureScaler",
    "MfccParams",
    "extract_features",
    "mfcc",
    "spectral_centroid",
    "DecisionTree",
    "RandomForest",
    "RfConfig",
    "predict_rf",
    "train_rf",
]
