from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PointCloudVideo(BaseModel):
    """T frames of N points each, stored as a T x N x 3 float64 array."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    frames: np.ndarray
    frame_interval: float = 1.0 / 15.0
    label: Optional[int] = None

    @field_validator("frames", mode="before")
    @classmethod
    def check_frames(cls, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise ValueError(f"frames must be T x N x 3, got shape {frames.shape}")
        if frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"a video needs at least one frame and one point, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frame coordinates must be finite")
        return frames

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_points(self) -> int:
        return self.frames.shape[1]

    def with_frames(self, frames: np.ndarray) -> "PointCloudVideo":
        return PointCloudVideo(frames=frames, frame_interval=self.frame_interval, label=self.label)


class AnchorTrack(BaseModel):
    """Per-frame FPS anchors: indices are T x M, coords are M x T x 3."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    anchor_indices: np.ndarray
    anchor_coords: np.ndarray

    @model_validator(mode="after")
    def check_shapes(self) -> "AnchorTrack":
        t, m = self.anchor_indices.shape
        if self.anchor_coords.shape != (m, t, 3):
            raise ValueError(f"anchor coords {self.anchor_coords.shape} do not match indices {self.anchor_indices.shape}")
        return self

    @property
    def num_anchors(self) -> int:
        return self.anchor_coords.shape[0]


class SyntheticTarget(BaseModel):
    """Anchors carried by the displacement of their cross-frame neighborhood, M x T x 3."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coords: np.ndarray
    padded: np.ndarray
    fallback: np.ndarray


class MotionField(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    vectors: np.ndarray
    sign: Literal[1, -1] = 1
    padded: Optional[np.ndarray] = None
    fallback: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, num_anchors: int, num_frames: int) -> "MotionField":
        return cls(vectors=np.zeros((num_anchors, num_frames, 3)))

    def frame(self, t: int) -> np.ndarray:
        return self.vectors[:, t, :]


class VideoDataset(BaseModel):
    """Labeled videos sharing one T x N shape, as stored in a PCV file."""

    videos: list[PointCloudVideo]
    num_classes: int = Field(ge=0)
    num_frames: int = Field(ge=0)
    num_points: int = Field(ge=0)

    @model_validator(mode="after")
    def check_videos(self) -> "VideoDataset":
        for i, video in enumerate(self.videos):
            if (video.num_frames, video.num_points) != (self.num_frames, self.num_points):
                raise ValueError(
                    f"video {i} is {video.num_frames} x {video.num_points}, "
                    f"dataset is {self.num_frames} x {self.num_points}"
                )
            if video.label is None or not 0 <= video.label < self.num_classes:
                raise ValueError(f"video {i} label {video.label} outside [0, {self.num_classes})")
        return self

    @classmethod
    def from_videos(cls, videos: list[PointCloudVideo], num_classes: int) -> "VideoDataset":
        t, n = (videos[0].num_frames, videos[0].num_points) if videos else (0, 0)
        return cls(videos=videos, num_classes=num_classes, num_frames=t, num_points=n)

    @property
    def labels(self) -> np.ndarray:
        return np.array([video.label for video in self.videos], dtype=np.int64)

    def subset(self, indices) -> "VideoDataset":
        return self.model_copy(update={"videos": [self.videos[i] for i in indices]})

    def __len__(self) -> int:
        return len(self.videos)
