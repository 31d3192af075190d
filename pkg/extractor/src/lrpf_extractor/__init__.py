"""Offline feature extraction: pretrained vision backbone -> LRPF file."""

__version__ = "0.1.0"

from .extract import BACKBONES, ExtractConfig, extract
from .writer import write_features

__all__ = ["BACKBONES", "ExtractConfig", "extract", "write_features"]
