"""Training objectives: L1, L2, perceptual feature loss, and their weighted sum.

All losses are sums over entries (no averaging), so values are directly
comparable across loss terms. The perceptual loss compares magnitude images
inside a fixed (non-trainable) feature extractor; the built-in extractor is
a seeded random convolutional pyramid, so no pretrained weights ship with
the package, and externally supplied extractors can be loaded from the
checkpoint container.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .containers import read_checkpoint, write_checkpoint
from .errors import InvalidConfigError, InvalidInputError
from .fourier import ComplexImage
from .network import image_to_planes

__all__ = [
    "LossConfig",
    "FeatureExtractor",
    "FixedConvExtractor",
    "IdentityExtractor",
    "resolve_extractor",
    "save_extractor",
    "load_extractor",
    "l1_loss_t",
    "l2_loss_t",
    "perceptual_loss_t",
    "combined_loss_t",
    "l1_loss",
    "l2_loss",
    "perceptual_loss",
    "combined_loss",
]

_DEFAULT_EXTRACTOR_SEED = 7
_MAG_EPS = 1e-24  # keeps the magnitude differentiable at exact zeros


@dataclass(frozen=True)
class LossConfig:
    """Weights of the combined objective and the feature extractor to use."""

    lambda_1: float = 10.0
    lambda_p: float = 0.5
    feature_layers: int = 3
    extractor_id: str = "builtin"

    def __post_init__(self):
        if self.lambda_1 < 0 or self.lambda_p < 0:
            raise InvalidConfigError("loss weights must be non-negative")
        if self.lambda_1 == 0 and self.lambda_p == 0:
            raise InvalidConfigError("at least one of lambda_1, lambda_p must be positive")
        if self.feature_layers < 1:
            raise InvalidConfigError(f"feature_layers must be >= 1, got {self.feature_layers}")

    def to_dict(self) -> dict:
        return {
            "lambda_1": self.lambda_1,
            "lambda_p": self.lambda_p,
            "feature_layers": self.feature_layers,
            "extractor_id": self.extractor_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(
            lambda_1=float(d.get("lambda_1", 10.0)),
            lambda_p=float(d.get("lambda_p", 0.5)),
            feature_layers=int(d.get("feature_layers", 3)),
            extractor_id=str(d.get("extractor_id", "builtin")),
        )


class FeatureExtractor(nn.Module):
    """Deterministic, non-trainable map from a magnitude image to feature stacks.

    Subclasses implement :meth:`features`, returning one (B, C, H', W')
    tensor per feature layer; identical inputs must yield identical features.
    """

    n_layers: int = 0

    def features(self, mag: torch.Tensor) -> list[torch.Tensor]:
        raise NotImplementedError

    def forward(self, mag: torch.Tensor) -> list[torch.Tensor]:
        return self.features(mag)


class IdentityExtractor(FeatureExtractor):
    """Single feature layer equal to the input; useful for tests."""

    n_layers = 1

    def features(self, mag):
        return [mag]


class FixedConvExtractor(FeatureExtractor):
    """Random-but-frozen convolutional pyramid with 2x pooling between stages.

    Weights are generated once from a seeded PRNG (He-scaled Gaussians) and
    stored as buffers, so the extractor is deterministic and asset-free.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        super().__init__()
        if len(weights) != len(biases) or not weights:
            raise InvalidConfigError("extractor needs matching weight/bias lists")
        self.n_layers = len(weights)
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 4 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise InvalidConfigError(f"extractor stage {i} has inconsistent shapes")
            self.register_buffer(f"weight{i}", torch.from_numpy(np.asarray(w, dtype=np.float64)))
            self.register_buffer(f"bias{i}", torch.from_numpy(np.asarray(b, dtype=np.float64)))

    @classmethod
    def builtin(cls, seed: int = _DEFAULT_EXTRACTOR_SEED) -> "FixedConvExtractor":
        rng = np.random.default_rng(seed)
        channels = [1, 8, 16, 16]
        weights, biases = [], []
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            scale = np.sqrt(2.0 / (c_in * 9))
            weights.append(rng.standard_normal((c_out, c_in, 3, 3)) * scale)
            biases.append(np.zeros(c_out))
        return cls(weights, biases)

    def features(self, mag: torch.Tensor) -> list[torch.Tensor]:
        if mag.dim() != 4 or mag.shape[1] != 1:
            raise InvalidInputError(f"extractor expects (B, 1, H, W), got {tuple(mag.shape)}")
        factor = 2 ** (self.n_layers - 1)
        if mag.shape[-2] % factor or mag.shape[-1] % factor:
            raise InvalidInputError(
                f"resolution {tuple(mag.shape[-2:])} unsupported: must be divisible by {factor}"
            )
        out = mag
        feats = []
        for i in range(self.n_layers):
            w = getattr(self, f"weight{i}").to(mag.dtype)
            b = getattr(self, f"bias{i}").to(mag.dtype)
            out = F.relu(F.conv2d(out, w, b, padding=1))
            feats.append(out)
            if i < self.n_layers - 1:
                out = F.avg_pool2d(out, 2)
        return feats


def resolve_extractor(extractor_id: str) -> FeatureExtractor:
    if extractor_id == "builtin":
        return FixedConvExtractor.builtin()
    if extractor_id == "identity":
        return IdentityExtractor()
    raise InvalidConfigError(f"unknown extractor_id {extractor_id!r}")


def save_extractor(path, ext: FixedConvExtractor) -> None:
    arrays = {}
    for i in range(ext.n_layers):
        arrays[f"stage{i}.weight"] = getattr(ext, f"weight{i}").numpy()
        arrays[f"stage{i}.bias"] = getattr(ext, f"bias{i}").numpy()
    write_checkpoint(path, {"kind": "fixed_conv_extractor", "n_layers": ext.n_layers}, arrays)


def load_extractor(path) -> FixedConvExtractor:
    config, arrays = read_checkpoint(path)
    if config.get("kind") != "fixed_conv_extractor":
        raise InvalidConfigError(f"{path} does not hold feature-extractor weights")
    n = int(config["n_layers"])
    weights = [arrays[f"stage{i}.weight"] for i in range(n)]
    biases = [arrays[f"stage{i}.bias"] for i in range(n)]
    return FixedConvExtractor(weights, biases)


def magnitude_planes(planes: torch.Tensor) -> torch.Tensor:
    """Magnitude of a (B, 2, H, W) complex-pair tensor, as (B, 1, H, W)."""
    return torch.sqrt(planes[:, 0] ** 2 + planes[:, 1] ** 2 + _MAG_EPS).unsqueeze(1)


def _check_planes(x: torch.Tensor, target: torch.Tensor) -> None:
    if x.shape != target.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(x.shape)} vs {tuple(target.shape)}")


def l1_loss_t(x: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    _check_planes(x, target)
    return (x - target).abs().sum()


def l2_loss_t(x: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    _check_planes(x, target)
    return ((x - target) ** 2).sum()


def perceptual_loss_t(
    x: torch.Tensor, target: torch.Tensor, extractor: FeatureExtractor
) -> torch.Tensor:
    _check_planes(x, target)
    fx = extractor.features(magnitude_planes(x))
    ft = extractor.features(magnitude_planes(target))
    total = x.new_zeros(())
    for a, b in zip(fx, ft):
        total = total + ((a - b) ** 2).sum()
    return total


def combined_loss_t(
    x: torch.Tensor,
    target: torch.Tensor,
    cfg: LossConfig,
    extractor: FeatureExtractor,
) -> torch.Tensor:
    if extractor.n_layers != cfg.feature_layers:
        raise InvalidConfigError(
            f"extractor provides {extractor.n_layers} feature layers, "
            f"config expects {cfg.feature_layers}"
        )
    total = cfg.lambda_1 * l1_loss_t(x, target)
    if cfg.lambda_p > 0:
        total = total + cfg.lambda_p * perceptual_loss_t(x, target, extractor)
    return total


def _as_batch(img: ComplexImage) -> torch.Tensor:
    return image_to_planes(img, torch.float64).unsqueeze(0)


def l1_loss(x: ComplexImage, target: ComplexImage) -> float:
    """Sum of absolute differences over both real planes."""
    return float(l1_loss_t(_as_batch(x), _as_batch(target)))


def l2_loss(x: ComplexImage, target: ComplexImage) -> float:
    """Sum of squared differences over both real planes."""
    return float(l2_loss_t(_as_batch(x), _as_batch(target)))


def perceptual_loss(x: ComplexImage, target: ComplexImage, extractor: FeatureExtractor) -> float:
    """Summed squared feature distance between the two magnitude images."""
    with torch.no_grad():
        return float(perceptual_loss_t(_as_batch(x), _as_batch(target), extractor))


def combined_loss(
    x: ComplexImage,
    target: ComplexImage,
    cfg: LossConfig,
    extractor: FeatureExtractor,
) -> float:
    """Weighted sum of the L1 and perceptual terms."""
    with torch.no_grad():
        return float(combined_loss_t(_as_batch(x), _as_batch(target), cfg, extractor))
