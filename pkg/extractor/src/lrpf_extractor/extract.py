"""Batched, deterministic feature extraction over a class-per-folder image tree.

The dataset layout is <data_dir>[/<split>]/<class_name>/<image>; class labels
are assigned by sorted class-folder name. Features are the backbone's
embedding output (class token for ViTs, pooled features for ResNets) with the
classification head removed; no augmentation, eval mode throughout.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .writer import write_features

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


class ConfigError(ValueError):
    pass


class ExtractionError(RuntimeError):
    pass


def _vit_b_16():
    import torchvision.models as models

    return models.vit_b_16, 768


def _vit_l_16():
    import torchvision.models as models

    return models.vit_l_16, 1024


def _resnet18():
    import torchvision.models as models

    return models.resnet18, 512


def _resnet50():
    import torchvision.models as models

    return models.resnet50, 2048


BACKBONES = {
    "vit_b_16": _vit_b_16,
    "vit_l_16": _vit_l_16,
    "resnet18": _resnet18,
    "resnet50": _resnet50,
}


@dataclass
class ExtractConfig:
    model: str
    data_dir: str
    out: str
    split: str = ""
    batch_size: int = 32
    device: str = "cpu"
    pretrained: bool = True
    seed: int = 0  # weight init seed when pretrained=False
    expected_dim: int = 0  # 0 = take the backbone's native dim
    image_size: int = 224

    def __post_init__(self):
        if self.model not in BACKBONES:
            raise ConfigError(
                f"unknown model {self.model!r}; available: {sorted(BACKBONES)}"
            )
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def list_images(config):
    root = Path(config.data_dir)
    if config.split:
        root = root / config.split
    if not root.is_dir():
        raise ConfigError(f"dataset directory {root} not found")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not classes:
        raise ConfigError(f"no class folders under {root}")
    samples = []
    for label, cls in enumerate(classes):
        for img in sorted((root / cls).iterdir()):
            if img.suffix.lower() in IMAGE_EXTENSIONS:
                samples.append((img, label))
    if not samples:
        raise ConfigError(f"no images under {root}")
    return samples, classes


def _build_model(config):
    import torch

    ctor, native_dim = BACKBONES[config.model]()
    if config.pretrained:
        try:
            model = ctor(weights="DEFAULT")
        except Exception as exc:  # weight download/cache failure
            raise ExtractionError(f"cannot load pretrained weights: {exc}") from exc
    else:
        torch.manual_seed(config.seed)
        model = ctor(weights=None)
    # strip the classification head so forward() yields the embedding
    if hasattr(model, "heads"):
        model.heads = torch.nn.Identity()
    elif hasattr(model, "fc"):
        model.fc = torch.nn.Identity()
    else:
        raise ExtractionError(f"no known head attribute on {config.model}")
    model.eval()
    return model.to(config.device), native_dim


def _transform(config):
    from torchvision import transforms

    return transforms.Compose(
        [
            transforms.Resize(256 * config.image_size // 224),
            transforms.CenterCrop(config.image_size),
            transforms.ToTensor(),
            transforms.Normalize(
                mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
            ),
        ]
    )


def extract(config):
    """Run the backbone over the dataset and write an LRPF file.

    Returns (n_images, dim, class_names)."""
    import torch
    from PIL import Image

    samples, classes = list_images(config)
    model, native_dim = _build_model(config)
    dim = config.expected_dim or native_dim
    tf = _transform(config)

    feats, labels = [], []
    with torch.no_grad():
        for start in range(0, len(samples), config.batch_size):
            batch = samples[start : start + config.batch_size]
            imgs = torch.stack(
                [tf(Image.open(p).convert("RGB")) for p, _ in batch]
            ).to(config.device)
            out = model(imgs).cpu().double().numpy()
            if out.ndim != 2 or out.shape[1] != dim:
                raise ExtractionError(
                    f"backbone emitted dimension {out.shape[1:]} but config expects {dim}"
                )
            feats.append(out)
            labels.extend(lab for _, lab in batch)

    X = np.vstack(feats).T  # d x n
    write_features(config.out, np.asarray(labels), X)
    manifest = {
        "model": config.model,
        "pretrained": config.pretrained,
        "seed": config.seed,
        "dim": dim,
        "n": len(labels),
        "classes": classes,
        "split": config.split,
        "transform": f"resize({256 * config.image_size // 224}) + center-crop({config.image_size}) "
        "+ per-channel normalize (standard eval preprocessing)",
    }
    Path(str(config.out) + ".manifest.json").write_text(json.dumps(manifest, indent=2))
    return len(labels), dim, classes
