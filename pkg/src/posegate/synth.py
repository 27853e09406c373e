"""Procedural stick-figure action videos with class-keyed context cues.

Each video pairs RGB frames with ground-truth keypoint tracks. The *action*
label is defined purely by the figure's motion; the *context* label picks the
background style (a tinted grating plus a corner patch). In matched mode the
two labels agree, so the context is a perfectly predictive shortcut; in
derangement mode every video gets a wrong-class context, which is what makes
appearance shortcuts measurable.

Design notes baked into the class set:

* two near-duplicate motions (``wave_right_small`` / ``wave_right_large``)
  differ only in wrist amplitude, so the pose signal alone is ambiguous and
  a classifier benefits from context on them;
* ``circle`` and ``jump`` are whole-body motions that no context is needed
  for, giving the opposite extreme.

All randomness is drawn once per video from the manifest seed, so every
tensor is reproducible from its descriptor.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pose_codec import Keypoint, PersonPose, PoseFrame, Skeleton

__all__ = [
    "MOTION_CLASS_NAMES",
    "CONTEXT_RELIANT_CLASSES",
    "MOTION_DEFINED_CLASSES",
    "SPLITS",
    "SynthConfig",
    "SyntheticVideo",
    "stick_skeleton",
    "generate_video",
    "make_dataset",
    "joint_tracks",
    "video_params",
    "render_appearance_frame",
    "pose_frame_at",
    "save_appearance_clip",
    "load_appearance_clip",
    "save_manifest",
    "load_manifest",
]

MOTION_CLASS_NAMES = (
    "circle",
    "zigzag",
    "jump",
    "squat",
    "arms_raise",
    "arm_circle_left",
    "wave_right_small",
    "wave_right_large",
)

# The designed extremes used by gate analytics: the wave pair needs context,
# the whole-body pair does not.
CONTEXT_RELIANT_CLASSES = (6, 7)
MOTION_DEFINED_CLASSES = (0, 2)

SPLITS = ("train", "val_in_context", "val_out_of_context")

HEAD, NECK = 0, 1
L_SHOULDER, R_SHOULDER = 2, 3
L_ELBOW, R_ELBOW = 4, 5
L_WRIST, R_WRIST = 6, 7
PELVIS = 8
L_KNEE, R_KNEE = 9, 10
L_ANKLE, R_ANKLE = 11, 12

_NUM_JOINTS = 13

# Neutral standing pose, in units of the body scale, pelvis at the origin,
# y pointing down.
_BASE_POSE = np.array(
    [
        [0.00, -0.95],
        [0.00, -0.70],
        [-0.22, -0.65],
        [0.22, -0.65],
        [-0.30, -0.40],
        [0.30, -0.40],
        [-0.34, -0.15],
        [0.34, -0.15],
        [0.00, 0.00],
        [-0.14, 0.35],
        [0.14, 0.35],
        [-0.17, 0.75],
        [0.17, 0.75],
    ]
)

_BONES = (
    (NECK, HEAD),
    (NECK, L_SHOULDER),
    (NECK, R_SHOULDER),
    (L_SHOULDER, L_ELBOW),
    (R_SHOULDER, R_ELBOW),
    (L_ELBOW, L_WRIST),
    (R_ELBOW, R_WRIST),
    (NECK, PELVIS),
    (PELVIS, L_KNEE),
    (PELVIS, R_KNEE),
    (L_KNEE, L_ANKLE),
    (R_KNEE, R_ANKLE),
)

_FLIP_PAIRS = (
    (L_SHOULDER, R_SHOULDER),
    (L_ELBOW, R_ELBOW),
    (L_WRIST, R_WRIST),
    (L_KNEE, R_KNEE),
    (L_ANKLE, R_ANKLE),
)

_TINTS = np.array(
    [
        [0.90, 0.20, 0.20],
        [0.20, 0.90, 0.20],
        [0.25, 0.35, 0.95],
        [0.90, 0.85, 0.20],
        [0.80, 0.25, 0.90],
        [0.20, 0.90, 0.90],
        [0.95, 0.55, 0.15],
        [0.65, 0.65, 0.65],
    ]
)

_BONE_COLOR = np.array([0.78, 0.78, 0.72])
_JOINT_COLOR = np.array([1.00, 0.97, 0.92])


def stick_skeleton() -> Skeleton:
    """The 13-keypoint / 12-bone figure used by the generator."""
    return Skeleton(num_keypoints=_NUM_JOINTS, bones=_BONES, flip_pairs=_FLIP_PAIRS)


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 8
    frames_per_video: int = 48
    appearance_size: tuple[int, int] = (64, 64)  # (H_A, W_A)
    pose_size: tuple[int, int] = (16, 16)  # (H_P, W_P)
    pose_noise: float = 0.5  # jitter sigma, pose pixels
    pose_dropout: float = 0.1  # chance a frame loses its person
    person_count: int = 1  # extra persons are static distractors
    context_mode: str = "matched"  # default for direct generation
    train_videos_per_class: int = 40
    val_videos_per_class: int = 10

    def __post_init__(self):
        if not 2 <= self.num_classes <= len(MOTION_CLASS_NAMES):
            raise ValueError(
                f"num_classes must be in [2, {len(MOTION_CLASS_NAMES)}]"
            )
        if self.frames_per_video < 1:
            raise ValueError("frames_per_video must be >= 1")
        if not 1 <= self.person_count <= 3:
            raise ValueError("person_count must be in [1, 3]")
        if self.context_mode not in ("matched", "shuffled-derangement"):
            raise ValueError(f"unknown context_mode {self.context_mode!r}")

    @property
    def coord_ratio(self) -> float:
        """Appearance-to-pose resolution ratio (same for both axes)."""
        ratio = self.appearance_size[0] / self.pose_size[0]
        if ratio != self.appearance_size[1] / self.pose_size[1]:
            raise ValueError("appearance/pose aspect ratios differ")
        return ratio


@dataclass
class SyntheticVideo:
    appearance_frames: np.ndarray  # (F, 3, H_A, W_A) float32 RGB in [0, 1]
    pose_frames: list[PoseFrame]
    action_label: int
    context_label: int


@dataclass(frozen=True)
class VideoParams:
    """All per-video random draws, fixed once so rendering is deterministic."""

    center: tuple[float, float]
    body_scale: float
    bg_phase: float
    person_score: float
    noise: np.ndarray  # (F, K, 2) pose-pixel jitter
    dropped: np.ndarray  # (F,) bool, detector-failure frames
    distractors: tuple[tuple[float, float, float, float], ...]  # (cx, cy, scale, score)


def video_params(seed: int, cfg: SynthConfig) -> VideoParams:
    rng = np.random.default_rng(seed)
    h, w = cfg.appearance_size
    s64 = h / 64.0
    center = (
        w / 2.0 + float(rng.uniform(-4.0, 4.0)) * s64,
        h / 2.0 + float(rng.uniform(-3.0, 3.0)) * s64,
    )
    body_scale = 0.28 * h * float(rng.uniform(0.9, 1.1))
    bg_phase = float(rng.uniform(0.0, 2.0 * np.pi))
    person_score = float(rng.uniform(0.75, 1.0))
    noise = rng.normal(0.0, cfg.pose_noise, size=(cfg.frames_per_video, _NUM_JOINTS, 2))
    dropped = rng.uniform(size=cfg.frames_per_video) < cfg.pose_dropout
    distractors = []
    for i in range(cfg.person_count - 1):
        side = -1.0 if i % 2 == 0 else 1.0
        distractors.append(
            (
                center[0] + side * float(rng.uniform(14.0, 20.0)) * s64,
                center[1] + float(rng.uniform(-2.0, 2.0)) * s64,
                body_scale * 0.7,
                float(rng.uniform(0.3, 0.7)),
            )
        )
    return VideoParams(
        center=center,
        body_scale=body_scale,
        bg_phase=bg_phase,
        person_score=person_score,
        noise=noise,
        dropped=dropped,
        distractors=tuple(distractors),
    )


def _triangle(u: np.ndarray) -> np.ndarray:
    """Triangle wave with period 1 and range [-1, 1], peak at u = 0.5."""
    return 4.0 * np.abs(u - np.floor(u + 0.5)) - 1.0


def joint_tracks(action: int, params: VideoParams, cfg: SynthConfig) -> np.ndarray:
    """Noise-free joint positions, appearance pixels: (F, 13, 2)."""
    frames = cfg.frames_per_video
    h = cfg.appearance_size[0]
    s64 = h / 64.0
    t = np.arange(frames, dtype=np.float64)
    theta = 2.0 * np.pi * t / frames
    scale = params.body_scale

    tracks = np.broadcast_to(_BASE_POSE * scale, (frames, _NUM_JOINTS, 2)).copy()
    root = np.zeros((frames, 2))
    name = MOTION_CLASS_NAMES[action]

    if name == "circle":
        radius = 9.0 * s64
        root[:, 0] = radius * np.cos(theta)
        root[:, 1] = radius * np.sin(theta)
    elif name == "zigzag":
        root[:, 0] = 10.0 * s64 * _triangle(t / frames)
        root[:, 1] = 2.0 * s64 * np.sin(2.0 * theta)
    elif name == "jump":
        lift = 8.0 * s64 * np.abs(np.sin(theta))
        root[:, 1] = -lift
        tracks[:, [L_ANKLE, R_ANKLE], 1] -= (0.45 * lift)[:, None]
        tracks[:, [L_KNEE, R_KNEE], 1] -= (0.20 * lift)[:, None]
    elif name == "squat":
        drop = 8.0 * s64 * (1.0 - np.cos(theta)) / 2.0
        root[:, 1] = drop
        tracks[:, [L_ANKLE, R_ANKLE], 1] -= drop[:, None]  # feet stay planted
        tracks[:, L_KNEE, 0] -= 0.5 * drop
        tracks[:, R_KNEE, 0] += 0.5 * drop
        tracks[:, [L_KNEE, R_KNEE], 1] -= (0.30 * drop)[:, None]
    elif name == "arms_raise":
        lift = 9.0 * s64 * (1.0 - np.cos(theta)) / 2.0
        tracks[:, [L_ELBOW, R_ELBOW], 1] -= (0.7 * lift)[:, None]
        tracks[:, [L_WRIST, R_WRIST], 1] -= (1.4 * lift)[:, None]
    elif name == "arm_circle_left":
        radius = 8.0 * s64
        phi = 2.0 * theta
        shoulder = _BASE_POSE[L_SHOULDER] * scale
        tracks[:, L_WRIST, 0] = shoulder[0] + radius * np.cos(phi)
        tracks[:, L_WRIST, 1] = shoulder[1] + radius * np.sin(phi)
        tracks[:, L_ELBOW, 0] = shoulder[0] + 0.5 * radius * np.cos(phi)
        tracks[:, L_ELBOW, 1] = shoulder[1] + 0.5 * radius * np.sin(phi)
    elif name in ("wave_right_small", "wave_right_large"):
        # Identical arm carriage; only the wrist amplitude differs.
        amplitude = (2.0 if name == "wave_right_small" else 5.0) * s64
        tracks[:, R_ELBOW, 1] -= 4.0 * s64
        tracks[:, R_WRIST, 1] -= 9.0 * s64
        tracks[:, R_WRIST, 0] += amplitude * np.sin(3.0 * theta)
    else:  # pragma: no cover - guarded by SynthConfig validation
        raise ValueError(f"unknown action class {action}")

    tracks += root[:, None, :]
    tracks[:, :, 0] += params.center[0]
    tracks[:, :, 1] += params.center[1]
    return tracks


def _static_pose(cx: float, cy: float, scale: float) -> np.ndarray:
    pose = _BASE_POSE * scale
    pose[:, 0] += cx
    pose[:, 1] += cy
    return pose


def context_background(context: int, cfg: SynthConfig, phase: float) -> np.ndarray:
    """Class-keyed grating plus a solid corner patch: (3, H, W) float32."""
    h, w = cfg.appearance_size
    angle = np.pi * context / len(MOTION_CLASS_NAMES)
    freq = 2.0 + (context % 5)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    wave = np.sin(2.0 * np.pi * freq * (xs * np.cos(angle) + ys * np.sin(angle)) / w + phase)
    level = 0.12 + 0.33 * (0.5 + 0.5 * wave)
    bg = _TINTS[context][:, None, None] * level[None]
    patch = max(2, int(round(6 * h / 64.0)))
    bg[:, :patch, :patch] = (_TINTS[context] * 0.85)[:, None, None]
    return bg.astype(np.float32)


def _paint_figure(frame: np.ndarray, joints: np.ndarray, cfg: SynthConfig) -> None:
    h, w = cfg.appearance_size
    s64 = h / 64.0
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    half_bone = 0.65 * s64
    for parent, child in _BONES:
        x1, y1 = joints[parent]
        x2, y2 = joints[child]
        dx, dy = x2 - x1, y2 - y1
        length_sq = dx * dx + dy * dy
        if length_sq == 0.0:
            continue
        t = np.clip(((xs - x1) * dx + (ys - y1) * dy) / length_sq, 0.0, 1.0)
        dist_sq = (xs - (x1 + t * dx)) ** 2 + (ys - (y1 + t * dy)) ** 2
        frame[:, dist_sq <= half_bone**2] = _BONE_COLOR[:, None]
    radius_sq = (1.7 * s64) ** 2
    for x, y in joints:
        mask = (xs - x) ** 2 + (ys - y) ** 2 <= radius_sq
        frame[:, mask] = _JOINT_COLOR[:, None]


def render_appearance_frame(
    action: int,
    context: int,
    params: VideoParams,
    tracks: np.ndarray,
    t: int,
    cfg: SynthConfig,
    background: np.ndarray | None = None,
) -> np.ndarray:
    """One RGB frame: context background with the figure(s) painted on top."""
    if background is None:
        background = context_background(context, cfg, params.bg_phase)
    frame = background.copy()
    for cx, cy, scale, _score in params.distractors:
        _paint_figure(frame, _static_pose(cx, cy, scale), cfg)
    _paint_figure(frame, tracks[t], cfg)
    return frame


def pose_frame_at(
    params: VideoParams, tracks: np.ndarray, t: int, cfg: SynthConfig
) -> PoseFrame:
    """Ground-truth keypoints on the pose canvas, with jitter and dropout."""
    if params.dropped[t]:
        return PoseFrame(persons=(), frame_index=t)
    ratio = cfg.coord_ratio
    persons = []
    coords = tracks[t] / ratio + params.noise[t]
    persons.append(
        PersonPose(
            keypoints=tuple(
                Keypoint(x=float(x), y=float(y), score=params.person_score)
                for x, y in coords
            ),
            person_score=params.person_score,
        )
    )
    for cx, cy, scale, score in params.distractors:
        pose = _static_pose(cx, cy, scale) / ratio
        persons.append(
            PersonPose(
                keypoints=tuple(Keypoint(x=float(x), y=float(y), score=score) for x, y in pose),
                person_score=score,
            )
        )
    return PoseFrame(persons=tuple(persons), frame_index=t)


def generate_video(action: int, context: int, seed: int, cfg: SynthConfig) -> SyntheticVideo:
    """Render the full video. Deterministic in (action, context, seed, cfg)."""
    if not (0 <= action < cfg.num_classes and 0 <= context < cfg.num_classes):
        raise ValueError("action/context class out of range")
    params = video_params(seed, cfg)
    tracks = joint_tracks(action, params, cfg)
    background = context_background(context, cfg, params.bg_phase)
    frames = np.stack(
        [
            render_appearance_frame(action, context, params, tracks, t, cfg, background)
            for t in range(cfg.frames_per_video)
        ]
    )
    poses = [pose_frame_at(params, tracks, t, cfg) for t in range(cfg.frames_per_video)]
    return SyntheticVideo(
        appearance_frames=frames,
        pose_frames=poses,
        action_label=action,
        context_label=context,
    )


def derangement_context(action: int, num_classes: int) -> int:
    """Fixed derangement used by the out-of-context split."""
    return (action + 1) % num_classes


def make_dataset(split: str, cfg: SynthConfig, seed: int) -> list[dict]:
    """Balanced, deterministic manifest of video descriptors for one split."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
    split_idx = SPLITS.index(split)
    per_class = cfg.train_videos_per_class if split == "train" else cfg.val_videos_per_class
    manifest = []
    for action in range(cfg.num_classes):
        if split == "val_out_of_context":
            context = derangement_context(action, cfg.num_classes)
        else:
            context = action
        for idx in range(per_class):
            video_seed = int(
                np.random.SeedSequence([seed, split_idx, action, idx]).generate_state(1)[0]
            )
            manifest.append(
                {
                    "video_id": f"{split}-{action:02d}-{idx:03d}",
                    "action": action,
                    "context": context,
                    "seed": video_seed,
                    "split": split,
                }
            )
    return manifest


# ---------------------------------------------------------------------------
# File interfaces
# ---------------------------------------------------------------------------

_AVC_MAGIC = b"AVC1"


def save_appearance_clip(frames: np.ndarray, path: str | Path) -> None:
    """Raw float RGB container mirroring the pose tensor header layout."""
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise ValueError(f"expected (F, 3, H, W) frames, got {frames.shape}")
    f, c, h, w = frames.shape
    header = _AVC_MAGIC + struct.pack("<5I", f, c, h, w, 0)
    Path(path).write_bytes(header + np.ascontiguousarray(frames, dtype="<f4").tobytes())


def load_appearance_clip(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != _AVC_MAGIC:
        raise ValueError(f"{path}: not an appearance clip container")
    f, c, h, w, _ = struct.unpack("<5I", blob[4:24])
    return np.frombuffer(blob[24:], dtype="<f4").reshape(f, c, h, w).copy()


def save_manifest(manifest: list[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for entry in manifest:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> list[dict]:
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries
