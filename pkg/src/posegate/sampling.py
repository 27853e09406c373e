"""Clip frame sampling and paired appearance/pose augmentation.

Appearance clips are plain ``(T, 3, H, W)`` float arrays (RGB). The same
:class:`AugmentSpec` must be applied to a clip and to its pose frames so the
two inputs stay geometrically consistent; the augment order is scale about
the frame center, then translate, then horizontal flip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pose_codec import Keypoint, PersonPose, PoseFrame, Skeleton, flip_pose_frame

__all__ = [
    "ClipSpec",
    "AugmentSpec",
    "AugmentConfig",
    "sample_clip_indices",
    "eval_clip_starts",
    "make_augment_spec",
    "apply_augment_appearance",
    "apply_augment_pose",
]

TRAIN_RANDOM_START = "train-random-start"
EVAL_UNIFORM_STARTS = "eval-uniform-starts"


@dataclass(frozen=True)
class ClipSpec:
    """How many frames to take and at what interval."""

    num_frames: int
    tau: int
    mode: str = TRAIN_RANDOM_START

    def __post_init__(self):
        if self.num_frames < 1 or self.tau < 1:
            raise ValueError("num_frames and tau must be >= 1")
        if self.mode not in (TRAIN_RANDOM_START, EVAL_UNIFORM_STARTS):
            raise ValueError(f"unknown sampling mode {self.mode!r}")


@dataclass(frozen=True)
class AugmentSpec:
    """One clip's geometric augmentation, shared by both input streams."""

    scale: float = 1.0
    translate_x: float = 0.0
    translate_y: float = 0.0
    hflip: bool = False

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be > 0")

    @property
    def is_identity(self) -> bool:
        return (
            self.scale == 1.0
            and self.translate_x == 0.0
            and self.translate_y == 0.0
            and not self.hflip
        )


@dataclass(frozen=True)
class AugmentConfig:
    """Draw ranges for :func:`make_augment_spec` (not fixed by the protocol;
    exposed as configuration)."""

    scale_range: tuple[float, float] = (0.8, 1.25)
    max_translate: float = 0.0  # pixels, in appearance coordinates
    flip_prob: float = 0.5


def sample_clip_indices(
    video_len: int,
    spec: ClipSpec,
    rng: np.random.Generator | None = None,
    start: int | None = None,
) -> list[int]:
    """Frame indices ``start + i * tau``, wrapped modulo the video length.

    Train mode draws the start uniformly when none is given; eval mode
    requires the caller to supply it (see :func:`eval_clip_starts`).
    """
    if video_len < 1:
        raise ValueError("video_len must be >= 1")
    if start is None:
        if spec.mode != TRAIN_RANDOM_START:
            raise ValueError("eval-mode sampling requires an explicit start")
        if rng is None:
            raise ValueError("train-mode sampling requires an rng when start is unset")
        start = int(rng.integers(0, video_len))
    return [(start + i * spec.tau) % video_len for i in range(spec.num_frames)]


def eval_clip_starts(video_len: int, clips_per_video: int = 10) -> list[int]:
    """Starts placed uniformly over the video: floor(i * len / n)."""
    return [i * video_len // clips_per_video for i in range(clips_per_video)]


def make_augment_spec(rng: np.random.Generator, cfg: AugmentConfig) -> AugmentSpec:
    """Draw one augmentation. Draw order is fixed: scale, tx, ty, flip."""
    scale = float(rng.uniform(cfg.scale_range[0], cfg.scale_range[1]))
    tx = float(rng.uniform(-cfg.max_translate, cfg.max_translate))
    ty = float(rng.uniform(-cfg.max_translate, cfg.max_translate))
    hflip = bool(rng.random() < cfg.flip_prob)
    return AugmentSpec(scale=scale, translate_x=tx, translate_y=ty, hflip=hflip)


def apply_augment_appearance(clip: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    """Scale about the center, translate, then flip; bilinear, zero fill.

    The flip is a pure index reversal, so flipping twice is exact.
    """
    if clip.ndim != 4:
        raise ValueError(f"expected (T, C, H, W) clip, got shape {clip.shape}")
    _, _, height, width = clip.shape
    out = clip
    if spec.scale != 1.0 or spec.translate_x != 0.0 or spec.translate_y != 0.0:
        out = _resample_bilinear(
            clip, spec.scale, spec.translate_x, spec.translate_y, height, width
        )
    if spec.hflip:
        out = out[..., ::-1]
    return np.ascontiguousarray(out)


def _resample_bilinear(clip, scale, tx, ty, height, width):
    # Inverse of the forward map p' = s * (p - c) + c + t.
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    xs = (np.arange(width, dtype=np.float64) - cx - tx) / scale + cx
    ys = (np.arange(height, dtype=np.float64) - cy - ty) / scale + cy
    src_x = np.broadcast_to(xs[None, :], (height, width))
    src_y = np.broadcast_to(ys[:, None], (height, width))

    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0

    def gather(yy, xx):
        valid = (xx >= 0) & (xx < width) & (yy >= 0) & (yy < height)
        vals = clip[:, :, np.clip(yy, 0, height - 1), np.clip(xx, 0, width - 1)]
        return np.where(valid, vals, 0.0)

    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = fy * fx
    out = (
        w00 * gather(y0, x0)
        + w01 * gather(y0, x0 + 1)
        + w10 * gather(y0 + 1, x0)
        + w11 * gather(y0 + 1, x0 + 1)
    )
    return out.astype(clip.dtype)


def apply_augment_pose(
    frames: list[PoseFrame],
    spec: AugmentSpec,
    skeleton: Skeleton,
    width: int,
    height: int,
    coord_ratio: float = 1.0,
) -> list[PoseFrame]:
    """Apply the paired transform to keypoint coordinates.

    ``coord_ratio`` is the appearance/pose resolution ratio; the spec's
    translation is stated in appearance pixels and is divided down.
    """
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    tx = spec.translate_x / coord_ratio
    ty = spec.translate_y / coord_ratio
    out = []
    for frame in frames:
        persons = []
        for person in frame.persons:
            kps = tuple(
                Keypoint(
                    x=spec.scale * (kp.x - cx) + cx + tx,
                    y=spec.scale * (kp.y - cy) + cy + ty,
                    score=kp.score,
                    visible=kp.visible,
                )
                for kp in person.keypoints
            )
            persons.append(PersonPose(keypoints=kps, person_score=person.person_score))
        frame = PoseFrame(persons=tuple(persons), frame_index=frame.frame_index)
        if spec.hflip:
            frame = flip_pose_frame(frame, skeleton, width)
        out.append(frame)
    return out
