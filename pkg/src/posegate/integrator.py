"""Feature alignment, pose-driven gating, and gated aggregation.

Feature sequences are ``(..., T, C)`` tensors. The alignment blocks map each
stream into a common channel space; the gating block produces a per-frame,
per-channel gate in (0, 1) that weighs the appearance feature against the
pose feature:

    integrated = gate * aligned_appearance + (1 - gate) * aligned_pose

The regularizer ``mean(-log(1 - gate))`` prices every bit of gate opening,
biasing integration toward the pose stream.
"""

from __future__ import annotations

import torch
from torch import nn

__all__ = [
    "GATE_EPS",
    "AlignBlock",
    "GateBlock",
    "integrate",
    "no_gate_integrate",
    "gate_regularizer",
]

# Gates are clamped to [GATE_EPS, 1 - GATE_EPS] so the regularizer stays finite.
GATE_EPS = 1e-6


class AlignBlock(nn.Module):
    """Per-frame linear map, layer norm over channels, ReLU."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.proj = nn.Linear(in_channels, out_channels)
        self.norm = nn.LayerNorm(out_channels)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        if f.shape[-1] != self.proj.in_features:
            raise ValueError(
                f"expected {self.proj.in_features} input channels, got {f.shape[-1]}"
            )
        return self.norm(self.proj(f)).relu()


class GateBlock(nn.Module):
    """Per-frame linear map, batch norm, sigmoid, clamped into (0, 1).

    Batch statistics are used in training mode and running averages in eval
    mode (the module's train/eval flag), so single-clip evaluation is well
    defined.
    """

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.proj = nn.Linear(in_channels, out_channels)
        self.norm = nn.BatchNorm1d(out_channels)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        if f.shape[-1] != self.proj.in_features:
            raise ValueError(
                f"expected {self.proj.in_features} input channels, got {f.shape[-1]}"
            )
        pre = self.proj(f)
        flat = pre.reshape(-1, pre.shape[-1])
        normed = self.norm(flat).reshape(pre.shape)
        return torch.sigmoid(normed).clamp(GATE_EPS, 1.0 - GATE_EPS)


def _check_same_shape(*tensors: torch.Tensor) -> None:
    shapes = {tuple(t.shape) for t in tensors}
    if len(shapes) > 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def integrate(
    f_a_aligned: torch.Tensor, f_p_aligned: torch.Tensor, gate: torch.Tensor
) -> torch.Tensor:
    """Elementwise convex combination: gate picks appearance, 1-gate pose."""
    _check_same_shape(f_a_aligned, f_p_aligned, gate)
    return gate * f_a_aligned + (1.0 - gate) * f_p_aligned


def no_gate_integrate(f_a_aligned: torch.Tensor, f_p_aligned: torch.Tensor) -> torch.Tensor:
    """Ungated baseline: plain elementwise sum of the aligned features."""
    _check_same_shape(f_a_aligned, f_p_aligned)
    return f_a_aligned + f_p_aligned


def gate_regularizer(gate: torch.Tensor) -> torch.Tensor:
    """Mean of -log(1 - g) over all gate entries."""
    return (-torch.log1p(-gate)).mean()
