"""Experiment configuration: one JSON file with one section per subsystem.

Sections: ``codec``, ``sampling``, ``streams``, ``integrator``, ``model``,
``synth``, ``train``. Every tunable default lives here; the presets are
:func:`toy` (CPU-sized, the test default) and :func:`full_scale` (the
published training recipe's shapes and schedule).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .backbone import StreamConfig
from .model import ModelConfig
from .pose_codec import CodecConfig
from .sampling import AugmentConfig, ClipSpec
from .synth import SynthConfig, stick_skeleton

__all__ = ["TrainConfig", "SamplingSection", "ExperimentConfig", "toy", "full_scale"]


@dataclass(frozen=True)
class TrainConfig:
    """One optimization stage: SGD with momentum and a step lr schedule."""

    epochs: int = 15
    batch_size: int = 8
    lr: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 1e-4
    decay_epochs: tuple[int, ...] = (10, 13)
    decay_factor: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.decay_factor <= 1:
            raise ValueError("lr must be > 0 and decay_factor > 1")

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for e in self.decay_epochs if epoch >= e)
        return self.lr / self.decay_factor**drops


@dataclass(frozen=True)
class SamplingSection:
    num_frames: int = 8
    tau: int = 6
    pose_num_frames: int | None = None  # defaults to num_frames * pool_factor
    pose_tau: int | None = None
    clips_per_video_eval: int = 10
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    augment_streams: bool = True  # stage-1 training
    augment_integrator: bool = False  # stage-2; off enables feature caching


@dataclass(frozen=True)
class ModelSection:
    variant: str = "integral"
    gate_source: str = "pose"
    gate_weight: float = 1.5
    pool_factor: int = 1
    width: int = 64  # integrator channel width C


@dataclass(frozen=True)
class StreamSection:
    stage_widths: tuple[int, ...] = (8, 16, 32, 64)
    blocks_per_stage: tuple[int, ...] = (2, 2, 2, 2)
    shift_fraction: float = 0.125
    normalize_mean: float = 0.5
    normalize_std: float = 0.5
    init_std: float = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    codec: CodecConfig = field(default_factory=lambda: CodecConfig(heatmap_height=16, heatmap_width=16))
    sampling: SamplingSection = field(default_factory=SamplingSection)
    appearance_stream: StreamSection = field(default_factory=StreamSection)
    pose_stream: StreamSection = field(default_factory=StreamSection)
    model: ModelSection = field(default_factory=ModelSection)
    synth: SynthConfig = field(default_factory=SynthConfig)
    train_stream_cfg: TrainConfig = field(default_factory=TrainConfig)
    train_integrator_cfg: TrainConfig = field(
        default_factory=lambda: TrainConfig(epochs=30, lr=1e-3, decay_epochs=(20, 26))
    )

    @property
    def skeleton(self):
        return stick_skeleton()

    @property
    def pose_frames_per_clip(self) -> int:
        return self.sampling.pose_num_frames or self.sampling.num_frames * self.model.pool_factor

    @property
    def pose_tau(self) -> int:
        return self.sampling.pose_tau or self.sampling.tau

    def clip_spec(self, mode: str) -> ClipSpec:
        return ClipSpec(num_frames=self.sampling.num_frames, tau=self.sampling.tau, mode=mode)

    def pose_clip_spec(self, mode: str) -> ClipSpec:
        return ClipSpec(num_frames=self.pose_frames_per_clip, tau=self.pose_tau, mode=mode)

    def stream_config(self, kind: str) -> StreamConfig:
        if kind == "appearance":
            section = self.appearance_stream
            return StreamConfig(
                kind=kind,
                stage_widths=tuple(section.stage_widths),
                blocks_per_stage=tuple(section.blocks_per_stage),
                shift_fraction=section.shift_fraction,
                input_channels=3,
                spatial_in=tuple(self.synth.appearance_size),
                num_frames=self.sampling.num_frames,
            )
        section = self.pose_stream
        return StreamConfig(
            kind="pose",
            stage_widths=tuple(section.stage_widths),
            blocks_per_stage=tuple(section.blocks_per_stage),
            shift_fraction=section.shift_fraction,
            input_channels=self.skeleton.num_channels,
            spatial_in=tuple(self.synth.pose_size),
            num_frames=self.pose_frames_per_clip,
        )

    def model_config(
        self,
        variant: str | None = None,
        gate_source: str | None = None,
        gate_weight: float | None = None,
    ) -> ModelConfig:
        m = self.model
        return ModelConfig(
            appearance=self.stream_config("appearance"),
            pose=self.stream_config("pose"),
            num_classes=self.synth.num_classes,
            variant=variant if variant is not None else m.variant,
            gate_source=gate_source if gate_source is not None else m.gate_source,
            gate_weight=gate_weight if gate_weight is not None else m.gate_weight,
            width=m.width,
            pool_factor=m.pool_factor,
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "codec": dataclasses.asdict(self.codec),
            "sampling": dataclasses.asdict(self.sampling),
            "streams": {
                "appearance": dataclasses.asdict(self.appearance_stream),
                "pose": dataclasses.asdict(self.pose_stream),
            },
            "integrator": {"width": self.model.width},
            "model": {
                "variant": self.model.variant,
                "gate_source": self.model.gate_source,
                "gate_weight": self.model.gate_weight,
                "pool_factor": self.model.pool_factor,
            },
            "synth": dataclasses.asdict(self.synth),
            "train": {
                "stream": dataclasses.asdict(self.train_stream_cfg),
                "integrator": dataclasses.asdict(self.train_integrator_cfg),
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        base = cls()

        def merge(default, section: dict | None, **overrides):
            if section is None:
                section = {}
            fields = {f.name for f in dataclasses.fields(default)}
            clean = {k: _tuplify(v) for k, v in {**section, **overrides}.items() if k in fields}
            return dataclasses.replace(default, **clean)

        sampling_raw = dict(raw.get("sampling", {}))
        if "augment" in sampling_raw:
            sampling_raw["augment"] = merge(AugmentConfig(), sampling_raw["augment"])
        streams = raw.get("streams", {})
        model_raw = dict(raw.get("model", {}))
        integrator_raw = raw.get("integrator", {})
        if "width" in integrator_raw:
            model_raw["width"] = integrator_raw["width"]
        train_raw = raw.get("train", {})
        return cls(
            codec=merge(base.codec, raw.get("codec")),
            sampling=merge(base.sampling, sampling_raw),
            appearance_stream=merge(base.appearance_stream, streams.get("appearance")),
            pose_stream=merge(base.pose_stream, streams.get("pose")),
            model=merge(base.model, model_raw),
            synth=merge(base.synth, raw.get("synth")),
            train_stream_cfg=merge(base.train_stream_cfg, train_raw.get("stream")),
            train_integrator_cfg=merge(base.train_integrator_cfg, train_raw.get("integrator")),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def toy() -> ExperimentConfig:
    """CPU-sized default: 64x64 appearance, 16x16 pose, narrow streams."""
    return ExperimentConfig()


def full_scale() -> ExperimentConfig:
    """The published recipe's shapes: 224/56 inputs, T=8, wide streams,
    C=512, the two-stage lr schedule. Far beyond CPU test budgets."""
    return ExperimentConfig(
        codec=CodecConfig(heatmap_height=56, heatmap_width=56),
        sampling=SamplingSection(num_frames=8, tau=8, augment=AugmentConfig(max_translate=22.0)),
        appearance_stream=StreamSection(stage_widths=(64, 128, 256, 512)),
        pose_stream=StreamSection(stage_widths=(64, 128, 256, 512)),
        model=ModelSection(width=512),
        synth=SynthConfig(appearance_size=(224, 224), pose_size=(56, 56)),
        train_stream_cfg=TrainConfig(
            epochs=40, batch_size=32, lr=1e-2, decay_epochs=(20, 30)
        ),
        train_integrator_cfg=TrainConfig(
            epochs=20, batch_size=32, lr=1e-3, decay_epochs=(10, 15)
        ),
    )
