"""Pose tensor codec: multi-person keypoint detections -> heatmap + PAF tensors.

Coordinate convention: continuous pixel coordinates in the pose canvas, x to
the right, y down. Heatmaps and part affinity fields (PAFs) are evaluated at
integer pixel centers (x, y) in [0, W) x [0, H).

Channel layout of an encoded clip with K keypoints and B bones:

    channels 0..K-1        keypoint heatmaps, keypoint order
    channels K..K+2B-1     (x-component, y-component) pairs, bone order

so channel K + 2b is the x field of bone b and K + 2b + 1 its y field.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Keypoint",
    "PersonPose",
    "PoseFrame",
    "Skeleton",
    "CodecConfig",
    "PoseTensorClip",
    "select_persons",
    "render_keypoint_heatmaps",
    "render_pafs",
    "encode_pose_clip",
    "flip_pose_frame",
    "load_skeleton",
    "save_skeleton",
    "load_pose_frames",
    "save_pose_frames",
    "load_pose_tensor",
    "save_pose_tensor",
]


@dataclass(frozen=True)
class Keypoint:
    """One detected joint. When ``visible`` is false, x and y are ignored."""

    x: float
    y: float
    score: float = 1.0
    visible: bool = True

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"keypoint score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class PersonPose:
    """All keypoints of one detected person, in skeleton keypoint order."""

    keypoints: tuple[Keypoint, ...]
    person_score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        if not 0.0 <= self.person_score <= 1.0:
            raise ValueError(f"person score {self.person_score} outside [0, 1]")


@dataclass(frozen=True)
class PoseFrame:
    """All persons detected in one video frame (possibly none)."""

    persons: tuple[PersonPose, ...]
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")


@dataclass(frozen=True)
class Skeleton:
    """Keypoint count, directed bones (parent, child), and mirror pairs."""

    num_keypoints: int
    bones: tuple[tuple[int, int], ...]
    flip_pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bones", tuple(tuple(b) for b in self.bones))
        object.__setattr__(self, "flip_pairs", tuple(tuple(p) for p in self.flip_pairs))
        if self.num_keypoints < 1:
            raise ValueError("skeleton needs at least one keypoint")
        for parent, child in self.bones:
            if not (0 <= parent < self.num_keypoints and 0 <= child < self.num_keypoints):
                raise ValueError(f"bone ({parent}, {child}) references missing keypoint")
            if parent == child:
                raise ValueError(f"bone ({parent}, {child}) is degenerate")
        seen: set[int] = set()
        for left, right in self.flip_pairs:
            if not (0 <= left < self.num_keypoints and 0 <= right < self.num_keypoints):
                raise ValueError(f"flip pair ({left}, {right}) references missing keypoint")
            if left in seen or right in seen or left == right:
                raise ValueError("flip pairs must be disjoint")
            seen.update((left, right))

    @property
    def num_bones(self) -> int:
        return len(self.bones)

    @property
    def num_channels(self) -> int:
        """Encoded channel count: K heatmaps plus a 2-channel field per bone."""
        return self.num_keypoints + 2 * self.num_bones


@dataclass(frozen=True)
class CodecConfig:
    """Rendering parameters for the pose tensor."""

    heatmap_height: int
    heatmap_width: int
    sigma: float = 0.5
    max_persons: int = 5
    min_person_score: float = 0.1
    paf_line_width: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.max_persons < 1:
            raise ValueError("max_persons must be >= 1")
        if self.paf_line_width < 1:
            raise ValueError("paf_line_width must be >= 1")
        if self.heatmap_height < 1 or self.heatmap_width < 1:
            raise ValueError("heatmap size must be positive")


@dataclass
class PoseTensorClip:
    """Dense (T, K + 2B, H, W) float32 tensor of heatmap and PAF channels."""

    data: np.ndarray
    num_keypoints: int
    num_bones: int

    def __post_init__(self):
        expected = self.num_keypoints + 2 * self.num_bones
        if self.data.ndim != 4 or self.data.shape[1] != expected:
            raise ValueError(
                f"pose tensor shape {self.data.shape} does not match "
                f"K={self.num_keypoints}, B={self.num_bones}"
            )

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    def heatmaps(self) -> np.ndarray:
        return self.data[:, : self.num_keypoints]

    def pafs(self) -> np.ndarray:
        return self.data[:, self.num_keypoints :]


def select_persons(frame: PoseFrame, cfg: CodecConfig) -> list[PersonPose]:
    """Keep persons scoring at least the threshold, best first, capped.

    Ties keep their original frame order (stable sort).
    """
    kept = [p for p in frame.persons if p.person_score >= cfg.min_person_score]
    kept.sort(key=lambda p: -p.person_score)
    return kept[: cfg.max_persons]


def _pixel_grid(cfg: CodecConfig) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0 : cfg.heatmap_height, 0 : cfg.heatmap_width]
    return xs.astype(np.float64), ys.astype(np.float64)


def render_keypoint_heatmaps(persons: list[PersonPose], cfg: CodecConfig) -> np.ndarray:
    """Sum per-person Gaussian blobs per keypoint channel, clamped to 1.0.

    Keypoints outside the canvas still contribute their Gaussian tails;
    invisible keypoints contribute nothing. Expects persons already filtered
    by :func:`select_persons`.
    """
    if persons:
        num_keypoints = len(persons[0].keypoints)
    else:
        num_keypoints = 0
    xs, ys = _pixel_grid(cfg)
    out = np.zeros((num_keypoints, cfg.heatmap_height, cfg.heatmap_width), dtype=np.float64)
    denom = 2.0 * cfg.sigma * cfg.sigma
    for person in persons:
        if len(person.keypoints) != num_keypoints:
            raise ValueError("persons disagree on keypoint count")
        for k, kp in enumerate(person.keypoints):
            if not kp.visible:
                continue
            out[k] += np.exp(-((xs - kp.x) ** 2 + (ys - kp.y) ** 2) / denom)
    np.minimum(out, 1.0, out=out)
    return out.astype(np.float32)


def render_pafs(persons: list[PersonPose], skeleton: Skeleton, cfg: CodecConfig) -> np.ndarray:
    """Rasterize per-bone unit-vector fields, averaging overlapping persons.

    A pixel belongs to a bone when its center lies within half the line width
    (Euclidean) of the segment between the bone's endpoints. Bones with an
    invisible endpoint, and zero-length bones, contribute nothing.
    """
    height, width = cfg.heatmap_height, cfg.heatmap_width
    xs, ys = _pixel_grid(cfg)
    half_width_sq = (cfg.paf_line_width / 2.0) ** 2
    out = np.zeros((2 * skeleton.num_bones, height, width), dtype=np.float64)
    for b, (parent, child) in enumerate(skeleton.bones):
        acc = np.zeros((2, height, width), dtype=np.float64)
        count = np.zeros((height, width), dtype=np.int64)
        for person in persons:
            if len(person.keypoints) != skeleton.num_keypoints:
                raise ValueError("person keypoint count does not match skeleton")
            start, end = person.keypoints[parent], person.keypoints[child]
            if not (start.visible and end.visible):
                continue
            dx, dy = end.x - start.x, end.y - start.y
            length_sq = dx * dx + dy * dy
            if length_sq == 0.0:
                continue  # direction undefined; neutral under averaging
            t = ((xs - start.x) * dx + (ys - start.y) * dy) / length_sq
            np.clip(t, 0.0, 1.0, out=t)
            dist_sq = (xs - (start.x + t * dx)) ** 2 + (ys - (start.y + t * dy)) ** 2
            mask = dist_sq <= half_width_sq
            length = np.sqrt(length_sq)
            acc[0][mask] += dx / length
            acc[1][mask] += dy / length
            count[mask] += 1
        hit = count > 0
        out[2 * b][hit] = acc[0][hit] / count[hit]
        out[2 * b + 1][hit] = acc[1][hit] / count[hit]
    return out.astype(np.float32)


def encode_pose_clip(
    frames: list[PoseFrame], skeleton: Skeleton, cfg: CodecConfig
) -> PoseTensorClip:
    """Encode a frame sequence into the stacked heatmap+PAF tensor."""
    if not frames:
        raise ValueError("cannot encode an empty clip")
    channels = skeleton.num_channels
    data = np.zeros(
        (len(frames), channels, cfg.heatmap_height, cfg.heatmap_width), dtype=np.float32
    )
    for t, frame in enumerate(frames):
        persons = select_persons(frame, cfg)
        if persons:
            heat = render_keypoint_heatmaps(persons, cfg)
            if heat.shape[0] != skeleton.num_keypoints:
                raise ValueError("frame keypoint count does not match skeleton")
            data[t, : skeleton.num_keypoints] = heat
            data[t, skeleton.num_keypoints :] = render_pafs(persons, skeleton, cfg)
    return PoseTensorClip(data=data, num_keypoints=skeleton.num_keypoints, num_bones=skeleton.num_bones)


def flip_pose_frame(frame: PoseFrame, skeleton: Skeleton, width: float) -> PoseFrame:
    """Mirror a frame horizontally: x -> (W - 1) - x, then swap mirror pairs."""
    flipped_persons = []
    for person in frame.persons:
        kps = [
            Keypoint(x=(width - 1.0) - kp.x, y=kp.y, score=kp.score, visible=kp.visible)
            for kp in person.keypoints
        ]
        for left, right in skeleton.flip_pairs:
            kps[left], kps[right] = kps[right], kps[left]
        flipped_persons.append(PersonPose(keypoints=tuple(kps), person_score=person.person_score))
    return PoseFrame(persons=tuple(flipped_persons), frame_index=frame.frame_index)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_PTC_MAGIC = b"PTC1"


def save_skeleton(skeleton: Skeleton, path: str | Path) -> None:
    payload = {
        "num_keypoints": skeleton.num_keypoints,
        "bones": [list(b) for b in skeleton.bones],
        "flip_pairs": [list(p) for p in skeleton.flip_pairs],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_skeleton(path: str | Path) -> Skeleton:
    payload = json.loads(Path(path).read_text())
    return Skeleton(
        num_keypoints=payload["num_keypoints"],
        bones=tuple(tuple(b) for b in payload["bones"]),
        flip_pairs=tuple(tuple(p) for p in payload.get("flip_pairs", [])),
    )


def save_pose_frames(frames: list[PoseFrame], path: str | Path) -> None:
    """Write newline-delimited JSON, one frame object per line.

    A null keypoint entry marks an invisible (undetected) joint.
    """
    with open(path, "w") as fh:
        for frame in frames:
            persons = []
            for person in frame.persons:
                entries = [
                    [kp.x, kp.y, kp.score] if kp.visible else None
                    for kp in person.keypoints
                ]
                persons.append({"score": person.person_score, "keypoints": entries})
            fh.write(json.dumps({"frame": frame.frame_index, "persons": persons}) + "\n")


def load_pose_frames(path: str | Path) -> list[PoseFrame]:
    frames = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            persons = []
            for raw in obj.get("persons", []):
                kps = tuple(
                    Keypoint(x=e[0], y=e[1], score=e[2])
                    if e is not None
                    else Keypoint(x=0.0, y=0.0, score=0.0, visible=False)
                    for e in raw["keypoints"]
                )
                persons.append(PersonPose(keypoints=kps, person_score=raw["score"]))
            frames.append(PoseFrame(persons=tuple(persons), frame_index=obj["frame"]))
    return frames


def save_pose_tensor(clip: PoseTensorClip, path: str | Path) -> None:
    """Flat binary container: magic ``PTC1``, five u32 dims, f32 LE payload."""
    t, _, h, w = clip.data.shape
    header = _PTC_MAGIC + struct.pack(
        "<5I", t, clip.num_keypoints, clip.num_bones, h, w
    )
    Path(path).write_bytes(header + np.ascontiguousarray(clip.data, dtype="<f4").tobytes())


def load_pose_tensor(path: str | Path) -> PoseTensorClip:
    blob = Path(path).read_bytes()
    if blob[:4] != _PTC_MAGIC:
        raise ValueError(f"{path}: not a pose tensor container")
    t, k, b, h, w = struct.unpack("<5I", blob[4:24])
    data = np.frombuffer(blob[24:], dtype="<f4").reshape(t, k + 2 * b, h, w).copy()
    return PoseTensorClip(data=data, num_keypoints=k, num_bones=b)
