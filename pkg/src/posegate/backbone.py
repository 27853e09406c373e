"""Two feature streams: residual 2D-conv stacks with temporal channel shifts.

Streams consume ``(N, T, C, H, W)`` clips (a leading batch axis is optional)
and emit per-frame feature sequences ``(N, T, C_out)`` via a spatial global
average pool. Temporal mixing comes only from the shift module, which moves
a fraction of channels one frame forward and another fraction one frame
backward before each residual branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

__all__ = [
    "StreamConfig",
    "temporal_shift",
    "temporal_avg_pool",
    "ResidualBlock",
    "FeatureStream",
    "reset_parameters",
    "INIT_STD",
]

APPEARANCE = "appearance"
POSE = "pose"

# Default init for parts trained from scratch: zero-mean Gaussian, std 1e-3.
INIT_STD = 1e-3


@dataclass(frozen=True)
class StreamConfig:
    """Architecture of one stream."""

    kind: str
    stage_widths: tuple[int, ...]
    blocks_per_stage: tuple[int, ...]
    input_channels: int
    spatial_in: tuple[int, int]
    num_frames: int
    shift_fraction: float = 0.125

    def __post_init__(self):
        if self.kind not in (APPEARANCE, POSE):
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if len(self.stage_widths) != len(self.blocks_per_stage):
            raise ValueError("stage_widths and blocks_per_stage lengths differ")
        if not 0.0 <= self.shift_fraction <= 0.5:
            raise ValueError("shift_fraction must lie in [0, 1/2]")

    @property
    def out_channels(self) -> int:
        return self.stage_widths[-1]


def temporal_shift(x: torch.Tensor, fraction: float) -> torch.Tensor:
    """Shift ``floor(fraction * C)`` channels forward and as many backward.

    ``x`` has shape ``(..., T, C, H, W)``; vacated boundary frames are zero
    and the remaining channels pass through untouched.
    """
    if x.dim() < 4:
        raise ValueError(f"expected (..., T, C, H, W), got shape {tuple(x.shape)}")
    channels = x.shape[-3]
    fold = int(math.floor(fraction * channels))
    if fold == 0:
        return x
    if 2 * fold > channels:
        raise ValueError(f"cannot shift 2*{fold} of {channels} channels")
    out = torch.zeros_like(x)
    out[..., 1:, :fold, :, :] = x[..., :-1, :fold, :, :]
    out[..., :-1, fold : 2 * fold, :, :] = x[..., 1:, fold : 2 * fold, :, :]
    out[..., :, 2 * fold :, :, :] = x[..., :, 2 * fold :, :, :]
    return out


def temporal_avg_pool(f: torch.Tensor, factor: int) -> torch.Tensor:
    """Non-overlapping mean over groups of ``factor`` frames along dim -2."""
    if factor == 1:
        return f
    frames = f.shape[-2]
    if frames % factor != 0:
        raise ValueError(f"frame count {frames} not divisible by pool factor {factor}")
    shape = f.shape[:-2] + (frames // factor, factor, f.shape[-1])
    return f.reshape(shape).mean(dim=-2)


class ResidualBlock(nn.Module):
    """Shift -> conv3 -> BN -> ReLU -> conv3 -> BN, added to the skip path.

    The shift touches only the residual branch; the skip is identity, or a
    strided 1x1 projection when width or resolution changes.
    """

    def __init__(self, in_channels: int, out_channels: int, stride: int, shift_fraction: float):
        super().__init__()
        self.shift_fraction = shift_fraction
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.proj = nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False)
            self.proj_bn = nn.BatchNorm2d(out_channels)
        else:
            self.proj = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (N, T, C, H, W)
        batch, frames = x.shape[0], x.shape[1]
        branch = temporal_shift(x, self.shift_fraction).flatten(0, 1)
        branch = self.bn1(self.conv1(branch)).relu()
        branch = self.bn2(self.conv2(branch))
        skip = x.flatten(0, 1)
        if self.proj is not None:
            skip = self.proj_bn(self.proj(skip))
        return (branch + skip).relu().unflatten(0, (batch, frames))


class FeatureStream(nn.Module):
    """One stream: stem, residual stages with shifts, spatial average pool.

    The appearance stem downsamples twice (strided 7x7 conv, then a 3x3 max
    pool); the pose stem is a stride-1 3x3 block adapting the heatmap+PAF
    channel count, so a pose canvas a quarter the appearance size reaches the
    stages at the same resolution.
    """

    def __init__(self, cfg: StreamConfig):
        super().__init__()
        self.cfg = cfg
        width0 = cfg.stage_widths[0]
        if cfg.kind == APPEARANCE:
            self.stem = nn.Conv2d(cfg.input_channels, width0, 7, stride=2, padding=3, bias=False)
            self.pool = nn.MaxPool2d(3, stride=2, padding=1)
        else:
            self.stem = nn.Conv2d(cfg.input_channels, width0, 3, padding=1, bias=False)
            self.pool = None
        self.stem_bn = nn.BatchNorm2d(width0)

        blocks = []
        in_ch = width0
        for stage, (width, depth) in enumerate(zip(cfg.stage_widths, cfg.blocks_per_stage)):
            for i in range(depth):
                stride = 2 if stage > 0 and i == 0 else 1
                blocks.append(ResidualBlock(in_ch, width, stride, cfg.shift_fraction))
                in_ch = width
        self.blocks = nn.ModuleList(blocks)

    @property
    def out_channels(self) -> int:
        return self.cfg.out_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 4:
            return self.forward(x.unsqueeze(0)).squeeze(0)
        if x.dim() != 5:
            raise ValueError(f"expected (N, T, C, H, W) clip, got shape {tuple(x.shape)}")
        batch, frames = x.shape[0], x.shape[1]
        h = self.stem_bn(self.stem(x.flatten(0, 1))).relu()
        if self.pool is not None:
            h = self.pool(h)
        h = h.unflatten(0, (batch, frames))
        for block in self.blocks:
            h = block(h)
        return h.mean(dim=(-2, -1))


def reset_parameters(module: nn.Module, std: float = INIT_STD) -> None:
    """Gaussian init for conv/linear weights, zero bias, identity norms."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.normal_(m.weight, mean=0.0, std=std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d, nn.LayerNorm)):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)
            if isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
                m.reset_running_stats()
