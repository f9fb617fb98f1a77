"""Motion Imitator: per-anchor displacement from cross-frame neighborhoods.

Anchors are sampled by FPS independently in every frame. Each anchor queries
the next frame (the last frame queries itself) for K members. The members are
registered back onto the anchor's own frame by a translation, and the
synthetic target E is the anchor carried by that translation, so the motion
E - D is the mean displacement of the anchor's neighborhood.
"""
import logging
from typing import Literal

import numpy as np

from .errors import ConfigError
from .geometry import NeighborGroups, ball_query, batched_take, farthest_point_sample, knn
from .models.video import AnchorTrack, MotionField, PointCloudVideo, SyntheticTarget

logger = logging.getLogger(__name__)

QueryOrder = Literal["index", "distance"]

REGISTRATION_ROUNDS = 8


def next_frame_indices(num_frames: int) -> np.ndarray:
    """Frame queried by each frame: t+1, clamped at the last frame."""
    return np.minimum(np.arange(num_frames) + 1, num_frames - 1)


def anchors_from_frames(frames: np.ndarray, m: int, seed: int) -> AnchorTrack:
    indices = np.stack([farthest_point_sample(frame, m, seed) for frame in frames])
    coords = np.take_along_axis(frames, indices[..., None], axis=1)
    return AnchorTrack(anchor_indices=indices, anchor_coords=coords.transpose(1, 0, 2))


def select_anchors(video: PointCloudVideo, m: int, seed: int) -> AnchorTrack:
    return anchors_from_frames(video.frames, m, seed)


def cross_frame_query(
    video: PointCloudVideo,
    anchors: AnchorTrack,
    k: int,
    radius: float,
    order: QueryOrder = "index",
) -> NeighborGroups:
    """Ball query of the frame-t anchors into frame t+1; indices come back T x M x K."""
    return _cross_frame_query(video.frames, anchors.anchor_coords, k, radius, order)


def _cross_frame_query(
    frames: np.ndarray, anchor_coords: np.ndarray, k: int, radius: float, order: QueryOrder
) -> NeighborGroups:
    if k < 1 or radius <= 0:
        raise ConfigError(f"imitator query needs k >= 1 and radius > 0, got k={k}, radius={radius}")
    targets = frames[next_frame_indices(frames.shape[0])]
    return ball_query(anchor_coords.transpose(1, 0, 2), targets, radius, k, order=order)


def register_members(
    members: np.ndarray,
    previous: np.ndarray,
    limit: np.ndarray,
    rounds: int = REGISTRATION_ROUNDS,
) -> np.ndarray:
    """Per-group translation (T x M x 3) carrying members (T x M x K x 3) back onto `previous` (T x N x 3).

    Every round matches each shifted member to its nearest point of the previous
    frame and re-estimates the shift as the mean member-to-match displacement,
    counting only displacements no longer than the group's `limit` (T x M).
    A group with no such match keeps its current shift. Rounds stop early once
    no shift changes.
    """
    t, m, k, _ = members.shape
    shift = np.zeros((t, m, 3))
    for _ in range(rounds):
        query = (members - shift[..., None, :]).reshape(t, m * k, 3)
        nearest = knn(query, previous, 1)[..., 0]
        matched = batched_take(previous, nearest).reshape(t, m, k, 3)
        steps = members - matched
        accepted = np.linalg.norm(steps, axis=-1) <= limit[..., None]
        count = accepted.sum(axis=-1)
        total = np.where(accepted[..., None], steps, 0.0).sum(axis=-2)
        updated = np.where(count[..., None] > 0, total / np.maximum(count, 1)[..., None], shift)
        if np.array_equal(updated, shift):
            break
        shift = updated
    return shift


def aggregate_target(groups: NeighborGroups, video: PointCloudVideo, anchors: AnchorTrack) -> SyntheticTarget:
    return _aggregate_target(groups, video.frames, anchors.anchor_coords)


def _aggregate_target(groups: NeighborGroups, frames: np.ndarray, anchor_coords: np.ndarray) -> SyntheticTarget:
    members = batched_take(frames[next_frame_indices(frames.shape[0])], groups.indices)
    # fallback members lie outside the ball by construction
    limit = np.where(groups.fallback, np.inf, groups.radius)
    shift = register_members(members, frames, limit)
    return SyntheticTarget(
        coords=anchor_coords + shift.transpose(1, 0, 2),
        padded=groups.padded.T,
        fallback=groups.fallback.T,
    )


def extract_motion(targets: SyntheticTarget, anchors: AnchorTrack, sign: int = 1) -> MotionField:
    if sign not in (1, -1):
        raise ConfigError(f"motion sign must be +1 or -1, got {sign}")
    if targets.coords.shape != anchors.anchor_coords.shape:
        raise ConfigError(
            f"synthetic targets {targets.coords.shape} do not match anchors {anchors.anchor_coords.shape}"
        )
    return MotionField(
        vectors=sign * (targets.coords - anchors.anchor_coords),
        sign=sign,
        padded=targets.padded,
        fallback=targets.fallback,
    )


def motion_for_anchors(
    frames: np.ndarray,
    anchors: AnchorTrack,
    k: int,
    radius: float,
    sign: int = 1,
    order: QueryOrder = "index",
) -> MotionField:
    groups = _cross_frame_query(frames, anchors.anchor_coords, k, radius, order)
    return extract_motion(_aggregate_target(groups, frames, anchors.anchor_coords), anchors, sign)


def imitate(
    video: PointCloudVideo,
    m: int,
    k: int = 3,
    radius: float = 0.2,
    seed: int = 0,
    sign: int = 1,
    order: QueryOrder = "index",
) -> tuple[AnchorTrack, MotionField]:
    if video.num_frames < 2:
        raise ConfigError(f"motion extraction needs at least 2 frames, got {video.num_frames}")
    anchors = select_anchors(video, m, seed)
    motion = motion_for_anchors(video.frames, anchors, k, radius, sign, order)
    logger.debug(
        "imitated %d anchors x %d frames, mean |X| = %.4f",
        anchors.num_anchors,
        video.num_frames,
        float(np.linalg.norm(motion.vectors, axis=-1).mean()),
    )
    return anchors, motion
