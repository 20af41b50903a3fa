"""Backbone wrapper: pooled features, label heads, and perceptual distance.

Wraps a torchvision classification backbone (the resnet/resnext family).
Pooled features come from the layer feeding the classifier head. Without a
weights file the backbone is randomly initialized from a fixed seed, which
keeps every output deterministic and is sufficient for format/round-trip
work; the identifier string recorded in provenance always says exactly what
produced the numbers.

The perceptual distance mirrors the structure of learned perceptual metrics:
channel-normalized activations from the four residual stages, squared
differences averaged over space and channels, summed across stages (unit
layer weights, no learned calibration). Identical images score exactly 0.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torchvision.models import get_model
from torchvision.models.feature_extraction import create_feature_extractor

from .formats import ExtractError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
_STAGE_NODES = ("layer1", "layer2", "layer3", "layer4")


class Backbone:
    def __init__(self, name: str = "resnext101_32x8d", weights_path=None, init_seed: int = 0):
        torch.manual_seed(init_seed)
        try:
            model = get_model(name, weights=None)
        except ValueError as e:
            raise ExtractError(f"unknown backbone {name!r}: {e}") from None
        if not hasattr(model, "fc"):
            raise ExtractError(f"backbone {name!r} has no classifier head to strip")
        self.feature_dim = int(model.fc.in_features)
        if weights_path is not None:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
            self.identifier = f"{name}(weights={Path(weights_path).name})"
        else:
            self.identifier = f"{name}(random-init, seed={init_seed})"
        model.fc = torch.nn.Identity()
        model.eval()
        self.name = name
        self.model = model
        self._stages = create_feature_extractor(
            model, return_nodes={n: n for n in _STAGE_NODES}
        ).eval()

    @torch.no_grad()
    def features(self, batch: torch.Tensor) -> np.ndarray:
        """Pooled pre-classifier features, float32 (N, feature_dim)."""
        return self.model(batch).numpy().astype(np.float32)

    @torch.no_grad()
    def perceptual_distance(self, a: torch.Tensor, b: torch.Tensor) -> float:
        """Stage-wise normalized feature distance between two single images."""
        fa = self._stages(a.unsqueeze(0))
        fb = self._stages(b.unsqueeze(0))
        total = 0.0
        for node in _STAGE_NODES:
            xa = _unit_normalize(fa[node])
            xb = _unit_normalize(fb[node])
            total += float(((xa - xb) ** 2).mean())
        return total


def _unit_normalize(feat: torch.Tensor, eps: float = 1e-10) -> torch.Tensor:
    norm = torch.sqrt((feat**2).sum(dim=1, keepdim=True) + eps)
    return feat / norm


class LinearHead:
    """Seeded linear head over backbone features (stands in for the trained
    evaluation networks when no weights are supplied)."""

    def __init__(self, in_dim: int, n_classes: int, weights_path=None, init_seed: int = 0):
        gen = torch.Generator().manual_seed(init_seed)
        self.weight = torch.randn(n_classes, in_dim, generator=gen) / np.sqrt(in_dim)
        self.bias = torch.zeros(n_classes)
        if weights_path is not None:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            self.weight = state["weight"]
            self.bias = state["bias"]
            self.identifier = f"linear(weights={Path(weights_path).name})"
        else:
            self.identifier = f"linear(random-init, seed={init_seed})"

    def logits(self, features: np.ndarray) -> np.ndarray:
        x = torch.from_numpy(np.asarray(features, dtype=np.float32))
        return (x @ self.weight.T + self.bias).numpy()
