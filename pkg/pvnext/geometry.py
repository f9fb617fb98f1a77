"""Deterministic point-set kernels: FPS, ball query, kNN, chamfer, grouping.

All searches are brute force over the full pairwise distance matrix. Functions
accept either a single point set (N x 3) or a stack with matching leading
dimensions (e.g. T x N x 3), in which case every leading slice is searched
independently.
"""
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel

from . import instrument
from .errors import ConfigError

logger = logging.getLogger(__name__)

PointSet = np.ndarray


class NeighborGroup(BaseModel):
    center_index: int
    neighbor_indices: list[int]
    padded: bool
    fallback: bool = False


@dataclass(frozen=True)
class NeighborGroups:
    """Ball-query result for many centers: indices are (..., C, K)."""

    indices: np.ndarray
    padded: np.ndarray
    fallback: np.ndarray
    found: np.ndarray
    radius: float = float("inf")

    @property
    def k(self) -> int:
        return self.indices.shape[-1]

    def group(self, center_index: int) -> NeighborGroup:
        if self.indices.ndim != 2:
            raise ConfigError("group() is only defined for a single center set")
        return NeighborGroup(
            center_index=center_index,
            neighbor_indices=self.indices[center_index].tolist(),
            padded=bool(self.padded[center_index]),
            fallback=bool(self.fallback[center_index]),
        )


def as_points(points, name: str = "points") -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim < 2 or points.shape[-1] != 3:
        raise ConfigError(f"{name} must be N x 3 (optionally stacked), got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ConfigError(f"{name} contains non-finite coordinates")
    return points


def pairwise_sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[..., :, None, :] - b[..., None, :, :]
    return np.einsum("...ijk,...ijk->...ij", diff, diff)


def farthest_point_sample(points: PointSet, m: int, seed: int) -> np.ndarray:
    """Greedy max-min selection of `m` indices; seeded start, ties to the lowest index."""
    points = as_points(points)
    if points.ndim != 2:
        raise ConfigError(f"farthest_point_sample takes a single N x 3 set, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= m <= n:
        raise ConfigError(f"cannot sample {m} points from a set of {n}")

    selected = np.empty(m, dtype=np.int64)
    selected[0] = np.random.default_rng(seed).integers(n)
    diff = points - points[selected[0]]
    min_dist = np.einsum("ij,ij->i", diff, diff)
    min_dist[selected[0]] = -1.0
    for j in range(1, m):
        idx = int(np.argmax(min_dist))
        selected[j] = idx
        diff = points - points[idx]
        np.minimum(min_dist, np.einsum("ij,ij->i", diff, diff), out=min_dist)
    return selected


def ball_query(
    centers: PointSet,
    targets: PointSet,
    radius: float,
    k: int,
    order: Literal["index", "distance"] = "index",
) -> NeighborGroups:
    """Up to `k` targets within `radius` of each center.

    `order="index"` keeps the first-found (lowest target index) members,
    `order="distance"` the nearest ones. Short groups repeat their first member;
    empty balls fall back to the single nearest target, repeated k times.
    """
    centers = as_points(centers, "centers")
    targets = as_points(targets, "targets")
    if radius <= 0 or k < 1:
        raise ConfigError(f"ball query needs radius > 0 and k >= 1, got radius={radius}, k={k}")
    if targets.shape[-2] == 0:
        raise ConfigError("ball query against an empty target set")
    if order not in ("index", "distance"):
        raise ConfigError(f"unknown ball query order {order!r}")

    instrument.current().ball_queries += int(np.prod(centers.shape[:-1]))

    d2 = pairwise_sq_dist(centers, targets)
    inside = d2 <= radius * radius
    if order == "index":
        ranked = np.argsort(~inside, axis=-1, kind="stable")
    else:
        ranked = np.argsort(np.where(inside, d2, np.inf), axis=-1, kind="stable")
    ranked = ranked[..., :k]
    if ranked.shape[-1] < k:
        ranked = np.concatenate(
            [ranked, np.repeat(ranked[..., :1], k - ranked.shape[-1], axis=-1)], axis=-1
        )

    found = inside.sum(axis=-1)
    slot = np.arange(k)
    indices = np.where(slot < found[..., None], ranked, ranked[..., :1])

    fallback = found == 0
    if np.any(fallback):
        nearest = np.argmin(d2, axis=-1)
        indices = np.where(fallback[..., None], nearest[..., None], indices)
        logger.debug("ball query: %d empty balls fell back to the nearest target", int(fallback.sum()))

    return NeighborGroups(
        indices=indices.astype(np.int64),
        padded=found < k,
        fallback=fallback,
        found=found,
        radius=float(radius),
    )


def knn(centers: PointSet, targets: PointSet, k: int) -> np.ndarray:
    """k nearest targets per center, ascending distance, ties to the lower index."""
    centers = as_points(centers, "centers")
    targets = as_points(targets, "targets")
    n = targets.shape[-2]
    if not 1 <= k <= n:
        raise ConfigError(f"knn needs 1 <= k <= {n}, got k={k}")
    d2 = pairwise_sq_dist(centers, targets)
    return np.argsort(d2, axis=-1, kind="stable")[..., :k]


def chamfer_distance(a: PointSet, b: PointSet) -> float:
    a = as_points(a, "a")
    b = as_points(b, "b")
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise ConfigError(f"chamfer distance needs two non-empty N x 3 sets, got {a.shape} and {b.shape}")
    d2 = pairwise_sq_dist(a, b)
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


def batched_take(source: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """source (..., N, C) gathered by indices (..., *) along N, per leading slice."""
    n = source.shape[-2]
    if indices.size and (indices.min() < 0 or indices.max() >= n):
        raise ConfigError(f"group index out of range for {n} targets")
    lead = source.shape[:-2]
    if not lead:
        return source[indices]
    batch = int(np.prod(lead))
    flat_src = source.reshape(batch, n, source.shape[-1])
    flat_idx = indices.reshape(batch, -1)
    out = flat_src[np.arange(batch)[:, None], flat_idx]
    return out.reshape(*indices.shape, source.shape[-1])


def gather_group(targets: np.ndarray, indices: np.ndarray, centers: np.ndarray | None = None) -> np.ndarray:
    """Rows targets[indices]; with `centers` given, expressed relative to each center."""
    targets = np.asarray(targets, dtype=np.float64)
    grouped = batched_take(targets, np.asarray(indices))
    if centers is not None:
        grouped = grouped - np.asarray(centers, dtype=np.float64)[..., None, :]
    return grouped
