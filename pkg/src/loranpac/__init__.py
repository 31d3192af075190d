"""Continual linear classification via random ReLU features and incremental
truncated SVD, with baselines and error-bound diagnostics."""

__version__ = "0.1.0"

from .features import FeatureBlock, RandomEmbedding, lift, make_embedding
from .solver import (
    ClassifierWeights,
    ContinualLearner,
    LabelFeatureCovariance,
    TruncationPolicy,
    schedule_k,
)

__all__ = [
    "FeatureBlock",
    "RandomEmbedding",
    "lift",
    "make_embedding",
    "ClassifierWeights",
    "ContinualLearner",
    "LabelFeatureCovariance",
    "TruncationPolicy",
    "schedule_k",
]
