from typing import Callable

import numpy as np
import pytest

from pvnext.models import PointCloudVideo, micro_preset


def central_difference(f: Callable[[], float], array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Numerical gradient of scalar f() w.r.t. `array`, perturbed in place."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = array[idx]
        array[idx] = saved + h
        plus = f()
        array[idx] = saved - h
        minus = f()
        array[idx] = saved
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)


def lattice_video(velocity=(0.05, 0.0, 0.0), frames: int = 4, spacing: float = 1.0) -> PointCloudVideo:
    """A sparse 3x3x3 lattice translating rigidly; neighbours are `spacing` apart."""
    axis = np.arange(3) * spacing
    base = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    return PointCloudVideo(frames=np.stack([base + t * np.asarray(velocity) for t in range(frames)]))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_video(rng) -> PointCloudVideo:
    """4 frames of 32 points drifting along x."""
    base = rng.random((32, 3))
    frames = np.stack([base + [0.03 * t, 0.0, 0.0] for t in range(4)])
    return PointCloudVideo(frames=frames, label=1)


@pytest.fixture
def micro_cfg():
    return micro_preset(num_classes=3)
