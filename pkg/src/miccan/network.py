"""Cascaded reconstruction network: U-net blocks with channel-wise attention,
interleaved with data-consistency layers.

The cascade starts from the zero-filled image ``x_0`` and repeats N times:
``x_n = UCA_n(x) + x`` followed by ``x = DC(x_n)``. With the long skip
enabled, the final block adds ``x_0`` instead of its own input, so the last
U-net learns a global residual on top of the zero-filled image.

Images travel through the network as two real channels (real, imaginary).
The data-consistency layer's backward pass is implemented analytically (a
diagonal blend in Fourier space) instead of differentiating through the FFT
graph; finite-difference tests validate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .containers import read_checkpoint, write_checkpoint
from .data_consistency import DCConfig
from .errors import InvalidConfigError, InvalidInputError
from .fourier import ComplexImage, KSpaceData
from .sampling import SamplingMask

__all__ = [
    "AttentionConfig",
    "ModelConfig",
    "ChannelGate",
    "UCABlock",
    "MICCANCascade",
    "channel_squeeze",
    "build_cascade",
    "init_parameters",
    "gated_channel_widths",
    "gate_parameter_count",
    "count_parameters",
    "save_checkpoint",
    "load_checkpoint",
    "reconstruct",
]


@dataclass(frozen=True)
class AttentionConfig:
    """Reduction ratio and the channel widths of the gated decoder scales."""

    reduction_ratio: int
    channel_widths: tuple[int, ...]

    def __post_init__(self):
        if self.reduction_ratio < 1:
            raise InvalidConfigError(f"reduction_ratio must be >= 1, got {self.reduction_ratio}")
        for c in self.channel_widths:
            if c % self.reduction_ratio != 0:
                raise InvalidConfigError(
                    f"channel width {c} is not divisible by reduction ratio "
                    f"{self.reduction_ratio}"
                )


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of the cascade.

    ``use_attention`` and ``use_long_skip`` select the ablation variants:
    both off is the plain residual-U-net cascade (MRN5-style), both on is
    the full model.
    """

    n_blocks: int = 5
    encoder_depth: int = 3
    base_channels: int = 32
    use_attention: bool = True
    use_long_skip: bool = True
    reduction_ratio: int = 8
    dc: DCConfig = field(default_factory=DCConfig)

    def __post_init__(self):
        if self.n_blocks < 1:
            raise InvalidConfigError(f"n_blocks must be >= 1, got {self.n_blocks}")
        if self.encoder_depth < 1:
            raise InvalidConfigError(f"encoder_depth must be >= 1, got {self.encoder_depth}")
        if self.base_channels < 1:
            raise InvalidConfigError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.use_attention:
            # raises when any gated width is not divisible by the ratio
            AttentionConfig(self.reduction_ratio, gated_channel_widths(self))

    def to_dict(self) -> dict:
        return {
            "n_blocks": self.n_blocks,
            "encoder_depth": self.encoder_depth,
            "base_channels": self.base_channels,
            "use_attention": self.use_attention,
            "use_long_skip": self.use_long_skip,
            "reduction_ratio": self.reduction_ratio,
            "dc": self.dc.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            n_blocks=int(d["n_blocks"]),
            encoder_depth=int(d["encoder_depth"]),
            base_channels=int(d["base_channels"]),
            use_attention=bool(d["use_attention"]),
            use_long_skip=bool(d["use_long_skip"]),
            reduction_ratio=int(d["reduction_ratio"]),
            dc=DCConfig.from_dict(d.get("dc", {})),
        )


def gated_channel_widths(cfg: ModelConfig) -> tuple[int, ...]:
    """Channel widths of the stages that receive an attention gate.

    One gate per decoder stage. A depth-1 network has no up/down path, so
    its single stage feeds the output head directly and is gated instead.
    """
    depth, base = cfg.encoder_depth, cfg.base_channels
    if depth == 1:
        return (base,)
    return tuple(base * 2**i for i in range(depth - 1))


def gate_parameter_count(cfg: ModelConfig) -> int:
    """Closed-form number of parameters added by the attention gates."""
    if not cfg.use_attention:
        return 0
    r = cfg.reduction_ratio
    per_block = sum(c * (c // r) + (c // r) + (c // r) * c + c for c in gated_channel_widths(cfg))
    return cfg.n_blocks * per_block


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def _fft2c(z: torch.Tensor) -> torch.Tensor:
    return torch.fft.fftshift(
        torch.fft.fft2(torch.fft.ifftshift(z, dim=(-2, -1)), norm="ortho"), dim=(-2, -1)
    )


def _ifft2c(z: torch.Tensor) -> torch.Tensor:
    return torch.fft.fftshift(
        torch.fft.ifft2(torch.fft.ifftshift(z, dim=(-2, -1)), norm="ortho"), dim=(-2, -1)
    )


def _to_complex(planes: torch.Tensor) -> torch.Tensor:
    return torch.complex(planes[:, 0], planes[:, 1])


def _to_planes(z: torch.Tensor) -> torch.Tensor:
    return torch.stack((z.real, z.imag), dim=1)


class _DataConsistencyFn(torch.autograd.Function):
    """DC layer with analytic gradients.

    Forward: blend the spectrum of the prediction with the measurement on
    the sampled set (weight ``alpha`` on the prediction). The map is affine,
    with a Jacobian diagonal in Fourier space, so both backward passes are
    single masked multiplications between transforms.
    """

    @staticmethod
    def forward(ctx, x_planes, y_planes, mask, alpha):
        xhat = _fft2c(_to_complex(x_planes))
        y = _to_complex(y_planes)
        blended = torch.where(mask, alpha * xhat + (1.0 - alpha) * y, xhat)
        ctx.save_for_backward(mask)
        ctx.alpha = alpha
        return _to_planes(_ifft2c(blended))

    @staticmethod
    def backward(ctx, grad_out):
        (mask,) = ctx.saved_tensors
        alpha = ctx.alpha
        g = _fft2c(_to_complex(grad_out))
        grad_x = grad_y = None
        if ctx.needs_input_grad[0]:
            grad_x = _to_planes(_ifft2c(torch.where(mask, alpha * g, g)))
        if ctx.needs_input_grad[1]:
            grad_y = _to_planes(torch.where(mask, (1.0 - alpha) * g, torch.zeros_like(g)))
        return grad_x, grad_y, None, None


class DataConsistency(nn.Module):
    """Parameter-free module wrapping the analytic DC operation."""

    def __init__(self, cfg: DCConfig):
        super().__init__()
        self.cfg = cfg
        self.alpha = 0.0 if cfg.noiseless else 1.0 / (1.0 + cfg.noise_level_v)

    def forward(self, x_planes, y_planes, mask):
        return _DataConsistencyFn.apply(x_planes, y_planes, mask, self.alpha)


def channel_squeeze(f: torch.Tensor) -> torch.Tensor:
    """Global average pooling over the spatial axes of a feature stack."""
    return f.mean(dim=(-2, -1))


class ChannelGate(nn.Module):
    """Squeeze-and-excitation style gate: pooled channel statistics pass
    through a bottleneck of ratio ``r`` and a sigmoid, then rescale the
    input features per channel."""

    def __init__(self, channels: int, reduction_ratio: int):
        super().__init__()
        if channels % reduction_ratio != 0:
            raise InvalidConfigError(
                f"channels {channels} not divisible by reduction ratio {reduction_ratio}"
            )
        hidden = channels // reduction_ratio
        self.fc1 = nn.Conv2d(channels, hidden, kernel_size=1)
        self.fc2 = nn.Conv2d(hidden, channels, kernel_size=1)

    def gate_values(self, f: torch.Tensor) -> torch.Tensor:
        z = f.mean(dim=(-2, -1), keepdim=True)
        return torch.sigmoid(self.fc2(F.relu(self.fc1(z))))

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        return self.gate_values(f) * f


class _ConvStage(nn.Module):
    """Two 3x3 convolutions with ReLU activations."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1)

    def forward(self, x):
        return F.relu(self.conv2(F.relu(self.conv1(x))))


class UCABlock(nn.Module):
    """U-net reconstruction block with channel attention in the decoder.

    Takes a 2-channel complex image and returns a 2-channel residual of the
    same spatial shape. Attention gates sit after each decoder stage's
    convolutions (for depth 1, after the single stage).
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        depth, base = cfg.encoder_depth, cfg.base_channels
        self.depth = depth
        self.use_attention = cfg.use_attention

        enc_in = [2] + [base * 2**i for i in range(depth - 1)]
        enc_out = [base * 2**i for i in range(depth)]
        self.encoder = nn.ModuleList(_ConvStage(i, o) for i, o in zip(enc_in, enc_out))
        self.decoder = nn.ModuleList(
            _ConvStage(base * 2 ** (i + 1) + base * 2**i, base * 2**i)
            for i in reversed(range(depth - 1))
        )
        if cfg.use_attention:
            self.gates = nn.ModuleList(
                ChannelGate(c, cfg.reduction_ratio)
                for c in (
                    reversed(gated_channel_widths(cfg)) if depth > 1 else gated_channel_widths(cfg)
                )
            )
        self.out_conv = nn.Conv2d(base, 2, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != 2:
            raise InvalidInputError(f"expected (B, 2, H, W) input, got {tuple(x.shape)}")
        h, w = x.shape[-2:]
        factor = 2**self.depth
        if h % factor or w % factor:
            raise InvalidInputError(
                f"image size {h}x{w} must be divisible by 2^encoder_depth = {factor}"
            )
        skips = []
        out = x
        for i, stage in enumerate(self.encoder):
            out = stage(out)
            if i < self.depth - 1:
                skips.append(out)
                out = F.max_pool2d(out, 2)
        for i, stage in enumerate(self.decoder):
            out = F.interpolate(out, scale_factor=2, mode="nearest")
            out = stage(torch.cat((out, skips.pop()), dim=1))
            if self.use_attention:
                out = self.gates[i](out)
        if self.depth == 1 and self.use_attention:
            out = self.gates[0](out)
        return self.out_conv(out)


class MICCANCascade(nn.Module):
    """N reconstruction blocks with data consistency after each one."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        self.blocks = nn.ModuleList(UCABlock(cfg) for _ in range(cfg.n_blocks))
        self.dc = DataConsistency(cfg.dc)

    def forward(self, y_planes: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Reconstruct from k-space planes (B, 2, H, W) and a sampling mask.

        ``mask`` may be (H, W) or (B, H, W); nonzero entries mark sampled
        positions.
        """
        if y_planes.dim() != 4 or y_planes.shape[1] != 2:
            raise InvalidInputError(f"expected (B, 2, H, W) k-space, got {tuple(y_planes.shape)}")
        mask = torch.as_tensor(mask, device=y_planes.device) != 0
        if mask.dim() == 2:
            mask = mask.unsqueeze(0).expand(y_planes.shape[0], -1, -1)
        if mask.shape != (y_planes.shape[0], *y_planes.shape[-2:]):
            raise InvalidInputError(
                f"mask shape {tuple(mask.shape)} does not match k-space "
                f"{tuple(y_planes.shape)}"
            )
        x0 = _to_planes(_ifft2c(_to_complex(y_planes)))
        x = x0
        n_blocks = len(self.blocks)
        for n, block in enumerate(self.blocks, start=1):
            residual = block(x)
            base = x0 if (n == n_blocks and self.config.use_long_skip) else x
            x = self.dc(residual + base, y_planes, mask)
        return x


def init_parameters(model: nn.Module, seed: int) -> None:
    """Fan-in-scaled uniform initialization from a dedicated, seeded generator."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, nn.Conv2d):
                fan_in = module.in_channels * module.kernel_size[0] * module.kernel_size[1]
                bound = 1.0 / math.sqrt(fan_in)
                module.weight.uniform_(-bound, bound, generator=gen)
                if module.bias is not None:
                    module.bias.uniform_(-bound, bound, generator=gen)


def build_cascade(cfg: ModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> MICCANCascade:
    model = MICCANCascade(cfg).to(dtype)
    init_parameters(model, seed)
    return model


def save_checkpoint(path, model: MICCANCascade, extra: dict | None = None) -> None:
    config = {"model": model.config.to_dict()}
    if extra:
        config["extra"] = extra
    arrays = {
        name: tensor.detach().cpu().to(torch.float64).numpy()
        for name, tensor in model.state_dict().items()
    }
    write_checkpoint(path, config, arrays)


def load_checkpoint(
    path, dtype: torch.dtype = torch.float32
) -> tuple[MICCANCascade, dict]:
    config, arrays = read_checkpoint(path)
    cfg = ModelConfig.from_dict(config["model"])
    model = MICCANCascade(cfg).to(dtype)
    state = {name: torch.from_numpy(arr).to(dtype) for name, arr in arrays.items()}
    model.load_state_dict(state)
    return model, config.get("extra", {})


def kspace_to_planes(y: KSpaceData, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    values = torch.from_numpy(np.ascontiguousarray(y.values))
    return torch.stack((values.real, values.imag), dim=0).to(dtype)


def image_to_planes(img: ComplexImage, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    return torch.stack(
        (torch.from_numpy(img.real_plane), torch.from_numpy(img.imag_plane)), dim=0
    ).to(dtype)


def planes_to_image(planes: torch.Tensor) -> ComplexImage:
    arr = planes.detach().cpu().to(torch.float64).numpy()
    return ComplexImage(arr[0], arr[1])


def reconstruct(model: MICCANCascade, y: KSpaceData, mask: SamplingMask) -> ComplexImage:
    """Run the cascade on one measurement and return the image-domain result."""
    dtype = next(model.parameters()).dtype
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            y_t = kspace_to_planes(y, dtype).unsqueeze(0)
            mask_t = torch.from_numpy(mask.grid.astype(np.bool_))
            out = model(y_t, mask_t)
    finally:
        model.train(was_training)
    return planes_to_image(out[0])
