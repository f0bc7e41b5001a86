"""Data-consistency layer: re-imposing measured k-space values on a reconstruction.

The predicted image is transformed to k-space, blended with the measurement
at sampled positions, and transformed back. With noise level ``v`` the
sampled spectrum becomes ``(xhat + v * y) / (1 + v)``; in the noiseless
limit (``v = inf``) measured values replace predictions exactly, and with
``v = 0`` the layer is the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .fourier import ComplexImage, KSpaceData, fft2c, ifft2c
from .sampling import SamplingMask

__all__ = ["NOISELESS", "DCConfig", "data_consistency", "data_consistency_jvp"]

#: Distinguished noise level for exact replacement of sampled values (v -> inf).
NOISELESS = math.inf


@dataclass(frozen=True)
class DCConfig:
    """Noise level of the data-fidelity blend; defaults to exact replacement."""

    noise_level_v: float = NOISELESS

    def __post_init__(self):
        v = float(self.noise_level_v)
        if math.isnan(v) or v < 0:
            raise InvalidConfigError(f"noise_level_v must be >= 0 or inf, got {v}")
        object.__setattr__(self, "noise_level_v", v)

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.noise_level_v)

    def to_dict(self) -> dict:
        return {"noise_level_v": None if self.noiseless else self.noise_level_v}

    @classmethod
    def from_dict(cls, d: dict) -> "DCConfig":
        v = d.get("noise_level_v", None)
        return cls(NOISELESS if v is None else float(v))


def _blend_factor(cfg: DCConfig) -> float:
    """Weight kept on the predicted spectrum at sampled positions."""
    if cfg.noiseless:
        return 0.0
    return 1.0 / (1.0 + cfg.noise_level_v)


def data_consistency(
    x_n: ComplexImage, y: KSpaceData, mask: SamplingMask, cfg: DCConfig = DCConfig()
) -> ComplexImage:
    """Blend the spectrum of ``x_n`` with the measurement ``y`` on the sampled set.

    Unsampled positions pass through unchanged, so the operator is affine in
    ``x_n`` and idempotent in the noiseless case.
    """
    if x_n.shape != y.shape or x_n.shape != mask.shape:
        raise InvalidInputError(
            f"shape mismatch: image {x_n.shape}, y {y.shape}, mask {mask.shape}"
        )
    xhat = fft2c(x_n).values
    sampled = mask.grid.astype(bool)
    alpha = _blend_factor(cfg)
    blended = np.where(sampled, alpha * xhat + (1.0 - alpha) * y.values, xhat)
    return ifft2c(KSpaceData(blended))


def data_consistency_jvp(
    dx: ComplexImage, mask: SamplingMask, cfg: DCConfig = DCConfig()
) -> ComplexImage:
    """Jacobian-vector product of the DC layer with respect to its image input.

    The operator is affine in ``x_n``, so the JVP is independent of the
    linearization point: a diagonal blend in Fourier space that keeps weight
    ``1 / (1 + v)`` on sampled positions (0 when noiseless) and passes
    unsampled positions through.
    """
    if dx.shape != mask.shape:
        raise InvalidInputError(f"shape mismatch: tangent {dx.shape}, mask {mask.shape}")
    dk = fft2c(dx).values
    sampled = mask.grid.astype(bool)
    alpha = _blend_factor(cfg)
    return ifft2c(KSpaceData(np.where(sampled, alpha * dk, dk)))
