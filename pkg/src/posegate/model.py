"""Full model assembly: streams, integration, per-frame classification, loss.

Variants cover the integration baselines: the gated integrated model, the
two single-stream models, plain feature concatenation, the ungated aligned
sum, and (at evaluation time only) averaging of single-stream scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .backbone import FeatureStream, StreamConfig, temporal_avg_pool
from .integrator import AlignBlock, GateBlock, integrate, no_gate_integrate, gate_regularizer

__all__ = [
    "VARIANTS",
    "GATE_SOURCES",
    "ModelConfig",
    "Prediction",
    "ActionModel",
    "classify_frames",
    "aggregate_probs",
    "composite_loss",
    "score_average",
]

VARIANTS = (
    "integral",
    "appearance_only",
    "pose_only",
    "feature_fuse",
    "no_gate",
    "score_average",
)
GATE_SOURCES = ("pose", "appearance", "both")

_PROB_FLOOR = 1e-12  # keeps the log in the cross entropy finite


@dataclass(frozen=True)
class ModelConfig:
    appearance: StreamConfig
    pose: StreamConfig
    num_classes: int
    variant: str = "integral"
    gate_source: str = "pose"
    gate_weight: float = 1.5  # regularizer balance; 1.5 weak / 5.0 strong presets
    width: int = 512  # common channel width after alignment
    pool_factor: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.gate_source not in GATE_SOURCES:
            raise ValueError(f"unknown gate source {self.gate_source!r}")
        if self.gate_weight < 0:
            raise ValueError("gate_weight must be >= 0")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.pool_factor < 1:
            raise ValueError("pool_factor must be >= 1")


@dataclass
class Prediction:
    """Video-level class probabilities plus the per-frame rows behind them."""

    video_probs: torch.Tensor
    per_frame_probs: torch.Tensor
    gate: torch.Tensor | None = None


def classify_frames(f: torch.Tensor, head: nn.Linear) -> torch.Tensor:
    """Per-frame affine map and softmax over classes; f is (..., T, C)."""
    if f.shape[-1] != head.in_features:
        raise ValueError(f"classifier expects {head.in_features} channels, got {f.shape[-1]}")
    return torch.softmax(head(f), dim=-1)


def aggregate_probs(per_frame: torch.Tensor) -> torch.Tensor:
    """Arithmetic mean of the per-frame probability rows."""
    if per_frame.shape[-2] == 0:
        raise ValueError("cannot aggregate zero frames")
    return per_frame.mean(dim=-2)


class ActionModel(nn.Module):
    """Assembles the configured variant. ``forward`` takes whichever inputs
    the variant consumes and ignores the other entirely."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.variant == "score_average":
            raise ValueError(
                "score_average is a test-time combination of two single-stream "
                "models; evaluate those separately and use score_average()"
            )
        self.cfg = cfg
        c_a = cfg.appearance.out_channels
        c_p = cfg.pose.out_channels

        self.appearance_stream = FeatureStream(cfg.appearance) if self.uses_appearance else None
        self.pose_stream = FeatureStream(cfg.pose) if self.uses_pose else None

        self.align_a = self.align_p = self.gate_block = None
        if cfg.variant == "appearance_only":
            self.head = nn.Linear(c_a, cfg.num_classes)
        elif cfg.variant == "pose_only":
            self.head = nn.Linear(c_p, cfg.num_classes)
        elif cfg.variant == "feature_fuse":
            self.head = nn.Linear(c_a + c_p, cfg.num_classes)
        else:  # integral, no_gate
            self.align_a = AlignBlock(c_a, cfg.width)
            self.align_p = AlignBlock(c_p, cfg.width)
            self.head = nn.Linear(cfg.width, cfg.num_classes)
            if cfg.variant == "integral":
                gate_in = {"pose": c_p, "appearance": c_a, "both": c_a + c_p}[cfg.gate_source]
                self.gate_block = GateBlock(gate_in, cfg.width)

    @property
    def uses_appearance(self) -> bool:
        return self.cfg.variant != "pose_only"

    @property
    def uses_pose(self) -> bool:
        return self.cfg.variant != "appearance_only"

    def stream_features(
        self, appearance: torch.Tensor | None, pose: torch.Tensor | None
    ) -> tuple[torch.Tensor | None, torch.Tensor | None]:
        """Run whichever streams the variant needs; unused inputs stay untouched."""
        f_a = f_p = None
        if self.uses_appearance:
            if appearance is None:
                raise ValueError(f"variant {self.cfg.variant!r} needs an appearance clip")
            f_a = self.appearance_stream(appearance)
        if self.uses_pose:
            if pose is None:
                raise ValueError(f"variant {self.cfg.variant!r} needs a pose clip")
            f_p = self.pose_stream(pose)
        return f_a, f_p

    def integrate_and_classify(
        self, f_a: torch.Tensor | None, f_p: torch.Tensor | None
    ) -> Prediction:
        """Head-only forward from raw stream features (pre temporal pool)."""
        variant = self.cfg.variant
        if variant == "appearance_only":
            per_frame = classify_frames(f_a, self.head)
            return Prediction(aggregate_probs(per_frame), per_frame)
        if variant == "pose_only":
            per_frame = classify_frames(f_p, self.head)
            return Prediction(aggregate_probs(per_frame), per_frame)

        f_p_pooled = temporal_avg_pool(f_p, self.cfg.pool_factor)
        if f_p_pooled.shape[-2] != f_a.shape[-2]:
            raise ValueError(
                f"streams disagree on frame count after pooling: "
                f"{f_a.shape[-2]} vs {f_p_pooled.shape[-2]}"
            )
        if variant == "feature_fuse":
            per_frame = classify_frames(torch.cat([f_a, f_p_pooled], dim=-1), self.head)
            return Prediction(aggregate_probs(per_frame), per_frame)
        if variant == "no_gate":
            fused = no_gate_integrate(self.align_a(f_a), self.align_p(f_p_pooled))
            per_frame = classify_frames(fused, self.head)
            return Prediction(aggregate_probs(per_frame), per_frame)

        # integral
        gate_input = {
            "pose": f_p_pooled,
            "appearance": f_a,
            "both": torch.cat([f_a, f_p_pooled], dim=-1),
        }[self.cfg.gate_source]
        gate = self.gate_block(gate_input)
        fused = integrate(self.align_a(f_a), self.align_p(f_p_pooled), gate)
        per_frame = classify_frames(fused, self.head)
        return Prediction(aggregate_probs(per_frame), per_frame, gate=gate)

    def forward(
        self, appearance: torch.Tensor | None = None, pose: torch.Tensor | None = None
    ) -> Prediction:
        return self.integrate_and_classify(*self.stream_features(appearance, pose))

    def head_modules(self) -> list[nn.Module]:
        """The integration/classification parts (everything but the streams)."""
        mods = [m for m in (self.align_a, self.align_p, self.gate_block) if m is not None]
        return mods + [self.head]


def composite_loss(
    pred: Prediction, label: int | torch.Tensor, gate_weight: float
) -> torch.Tensor:
    """Cross entropy on the video probabilities plus the weighted gate cost.

    The gate term is omitted for gateless variants (and skipped entirely at
    weight zero, so the loss then equals the cross entropy exactly).
    """
    probs = pred.video_probs
    if probs.dim() == 1:
        probs = probs.unsqueeze(0)
    label = torch.as_tensor(label, device=probs.device).reshape(-1)
    if label.min() < 0 or label.max() >= probs.shape[-1]:
        raise ValueError("label out of range")
    p_true = probs.gather(-1, label.unsqueeze(-1)).squeeze(-1)
    loss = -torch.log(p_true.clamp_min(_PROB_FLOOR)).mean()
    if pred.gate is not None and gate_weight != 0.0:
        loss = loss + gate_weight * gate_regularizer(pred.gate)
    return loss


def score_average(pred_a: Prediction, pred_p: Prediction, w: float) -> Prediction:
    """Convex combination of two models' probabilities: w on the first."""
    if pred_a.video_probs.shape[-1] != pred_p.video_probs.shape[-1]:
        raise ValueError("predictions disagree on class count")
    video = w * pred_a.video_probs + (1.0 - w) * pred_p.video_probs
    per_frame = None
    if (
        pred_a.per_frame_probs is not None
        and pred_p.per_frame_probs is not None
        and pred_a.per_frame_probs.shape == pred_p.per_frame_probs.shape
    ):
        per_frame = w * pred_a.per_frame_probs + (1.0 - w) * pred_p.per_frame_probs
    return Prediction(video, per_frame)
