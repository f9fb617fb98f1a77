"""Synthetic motion datasets, the PCV container and video corruption/resampling.

PCV layout (little-endian): magic b"PCV1", u16 version, u16 T, u16 N,
u32 num_videos, u32 num_classes, then per video a u32 label followed by
T*N*3 float32 coordinates.
"""
import logging
import math
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    DataError,
    TruncatedFileError,
    VersionMismatchError,
)
from .geometry import knn
from .models.config import SyntheticSpec
from .models.video import PointCloudVideo, VideoDataset

logger = logging.getLogger(__name__)

PCV_MAGIC = b"PCV1"
PCV_VERSION = 1
PCV_HEADER = struct.Struct("<4sHHHII")
MAX_DIM = 0xFFFF

STEP_METERS = 0.05
ROTATE_DEGREES = 6.0
SCALE_AMPLITUDE = 0.1


def _motion_offsets(name: str, t_frames: int) -> np.ndarray:
    """Per-frame translation (T x 3) for the translating classes."""
    offsets = np.zeros((t_frames, 3))
    t = np.arange(t_frames)
    if name == "translate_x":
        offsets[:, 0] = STEP_METERS * t
    elif name == "translate_y":
        offsets[:, 1] = STEP_METERS * t
    elif name == "zigzag":
        period = math.ceil(t_frames / 4)
        # step s moves frame s to s+1
        steps = np.where((t[:-1] // period) % 2 == 0, STEP_METERS, -STEP_METERS)
        offsets[1:, 0] = np.cumsum(steps)
    return offsets


def _animate(base: np.ndarray, name: str, t_frames: int) -> np.ndarray:
    centroid = base.mean(axis=0)
    rel = base - centroid
    t = np.arange(t_frames)
    if name == "rotate_z":
        angles = np.deg2rad(ROTATE_DEGREES) * t
        cos, sin = np.cos(angles)[:, None], np.sin(angles)[:, None]
        frames = np.repeat(rel[None], t_frames, axis=0)
        x, y = rel[None, :, 0], rel[None, :, 1]
        frames[..., 0] = cos * x - sin * y
        frames[..., 1] = sin * x + cos * y
        return frames + centroid
    if name == "oscillate_scale":
        scale = 1.0 + SCALE_AMPLITUDE * np.sin(2.0 * np.pi * t / t_frames)
        return scale[:, None, None] * rel[None] + centroid
    return base[None] + _motion_offsets(name, t_frames)[:, None, :]


def generate_synthetic(spec: SyntheticSpec) -> VideoDataset:
    """Class-major labeled videos; labels follow the order of `spec.classes`."""
    videos = []
    for label, name in enumerate(spec.classes):
        for v in range(spec.videos_per_class):
            rng = np.random.default_rng([spec.seed, label, v])
            base = rng.random((spec.n_points, 3))
            frames = _animate(base, name, spec.t_frames)
            if spec.noise_sigma > 0:
                frames = frames + rng.normal(0.0, spec.noise_sigma, size=frames.shape)
            videos.append(PointCloudVideo(frames=frames, label=label))
    logger.debug("generated %d videos over %d classes", len(videos), len(spec.classes))
    return VideoDataset(
        videos=videos,
        num_classes=len(spec.classes),
        num_frames=spec.t_frames,
        num_points=spec.n_points,
    )


def pcv_size(num_videos: int, t: int, n: int) -> int:
    return PCV_HEADER.size + num_videos * (4 + t * n * 12)


def write_pcv(path: Union[str, Path], dataset: VideoDataset) -> None:
    t, n = dataset.num_frames, dataset.num_points
    if t > MAX_DIM or n > MAX_DIM:
        raise ConfigError(f"PCV stores T and N as u16, got T={t}, N={n}")
    chunks = [PCV_HEADER.pack(PCV_MAGIC, PCV_VERSION, t, n, len(dataset), dataset.num_classes)]
    for video in dataset.videos:
        chunks.append(struct.pack("<I", video.label))
        chunks.append(np.ascontiguousarray(video.frames, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))
    logger.debug("wrote %d videos to %s", len(dataset), path)


def read_pcv(path: Union[str, Path]) -> VideoDataset:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc.strerror}", code="unreadable") from exc

    if len(raw) < PCV_HEADER.size:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is shorter than the PCV header")
    magic, version, t, n, num_videos, num_classes = PCV_HEADER.unpack_from(raw)
    if magic != PCV_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {PCV_MAGIC!r}")
    if version != PCV_VERSION:
        raise VersionMismatchError(f"{path}: PCV version {version}, this reader handles {PCV_VERSION}")
    expected = pcv_size(num_videos, t, n)
    if len(raw) < expected:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes, header promises {expected}")
    if len(raw) > expected:
        raise DataError(f"{path}: {len(raw) - expected} trailing bytes after the last video", code="trailing_bytes")

    record = np.dtype([("label", "<u4"), ("points", "<f4", (t, n, 3))])
    body = np.frombuffer(raw, dtype=record, count=num_videos, offset=PCV_HEADER.size) if num_videos else []
    try:
        videos = [
            PointCloudVideo(frames=row["points"].astype(np.float64), label=int(row["label"])) for row in body
        ]
        return VideoDataset(videos=videos, num_classes=num_classes, num_frames=t, num_points=n)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}", code="invalid") from exc


def drop_local(video: PointCloudVideo, drop_ratio: float, seed: int) -> PointCloudVideo:
    """Remove a local cluster per frame and refill N by resampling the survivors.

    Each frame gets a seeded center; its floor(ratio * N) nearest neighbours
    (itself included) are dropped. Survivors keep their order and coordinates,
    and the freed slots are filled by sampling survivors with replacement.
    """
    if not 0.0 <= drop_ratio < 1.0:
        raise ConfigError(f"drop ratio must lie in [0, 1), got {drop_ratio}")
    n = video.num_points
    n_drop = math.floor(drop_ratio * n)
    if n_drop == 0:
        return video.with_frames(video.frames.copy())
    if n - n_drop < 1:
        raise ConfigError(f"dropping {n_drop} of {n} points leaves no survivors")

    rng = np.random.default_rng(seed)
    frames = np.empty_like(video.frames)
    for t, frame in enumerate(video.frames):
        center = int(rng.integers(n))
        removed = knn(frame[center : center + 1], frame, n_drop)[0]
        keep = np.ones(n, dtype=bool)
        keep[removed] = False
        survivors = np.flatnonzero(keep)
        refill = rng.choice(survivors, size=n_drop, replace=True)
        frames[t] = frame[np.concatenate([survivors, refill])]
    return video.with_frames(frames)


def temporal_subsample(video: PointCloudVideo, step: int, length: int, offset: int = 0) -> PointCloudVideo:
    if step < 1 or length < 1 or offset < 0:
        raise ConfigError(f"need step >= 1, length >= 1, offset >= 0; got {step}, {length}, {offset}")
    last = offset + step * (length - 1)
    if last >= video.num_frames:
        raise ConfigError(
            f"frames {offset}..{last} step {step} run past a {video.num_frames}-frame video"
        )
    indices = offset + step * np.arange(length)
    return PointCloudVideo(
        frames=video.frames[indices],
        frame_interval=video.frame_interval * step,
        label=video.label,
    )


def subsample_dataset(dataset: VideoDataset, frames: int, step: int = 1) -> VideoDataset:
    videos = [temporal_subsample(video, step, frames) for video in dataset.videos]
    return VideoDataset.from_videos(videos, dataset.num_classes) if videos else dataset
