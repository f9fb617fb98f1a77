import math

import numpy as np
import pytest

from pvnext.dataio import drop_local, generate_synthetic
from pvnext.errors import ConfigError
from pvnext.evaluation import evaluate_occlusion, frame_chamfers, imitator_chamfer_rows, occlude
from pvnext.models import PointCloudVideo, StageConfig, SyntheticSpec, micro_preset
from pvnext.network import PvNeXt
from pvnext.training import evaluate

from .conftest import lattice_video


@pytest.fixture
def videos():
    spec = SyntheticSpec(classes=["static", "translate_y"], n_points=32, t_frames=4, videos_per_class=2, seed=2)
    return generate_synthetic(spec).videos


def _every_point_anchored():
    stage = StageConfig(mlps=[[8]], nsamples=4, spatial_stride=1, radius=0.3)
    return micro_preset(2).model_copy(update={"stages": [stage]})


def test_occlude_uses_one_seed_per_video(videos):
    once = occlude(videos, 0.25, seed=7)
    again = occlude(videos, 0.25, seed=7)
    assert all(np.array_equal(a.frames, b.frames) for a, b in zip(once, again))
    np.testing.assert_array_equal(once[1].frames, drop_local(videos[1], 0.25, 8).frames)


def test_clean_row_matches_evaluate(videos):
    model = PvNeXt(micro_preset(2), seed=0)
    row, matrix = evaluate_occlusion(model, videos, 2)
    acc, expected = evaluate(model, videos, 2)
    assert row.mode == "clean"
    assert row.occlude_ratio == 0.0
    assert row.accuracy == acc
    assert row.num_videos == len(videos)
    assert np.array_equal(matrix, expected)


def test_tiny_ratio_leaves_accuracy_unchanged(videos):
    model = PvNeXt(micro_preset(2), seed=0)
    clean, _ = evaluate_occlusion(model, videos, 2)
    # floor(0.02 * 32) == 0 points dropped
    occluded, _ = evaluate_occlusion(model, videos, 2, ratio=0.02, occlude_seed=3)
    assert occluded.mode == "occluded"
    assert occluded.accuracy == clean.accuracy


def test_chamfer_rows_per_frame_plus_summary(videos):
    rows = imitator_chamfer_rows(videos, micro_preset(2))
    assert len(rows) == len(videos) * 3 + 1
    assert (rows[-1].video, rows[-1].frame) == ("mean", "all")
    assert rows[-1].imitator_chamfer == pytest.approx(np.mean([r.imitator_chamfer for r in rows[:-1]]))
    assert rows[-1].ratio == pytest.approx(rows[-1].imitator_chamfer / rows[-1].baseline_chamfer)
    assert [r.frame for r in rows[:3]] == ["0", "1", "2"]


@pytest.mark.parametrize("motion", ["translate_x", "translate_y", "zigzag"])
def test_advected_groups_beat_groups_left_in_place(motion):
    spec = SyntheticSpec(classes=[motion], n_points=128, t_frames=16, videos_per_class=2, seed=0)
    rows = imitator_chamfer_rows(generate_synthetic(spec).videos, micro_preset(6))
    assert rows[-1].ratio <= 0.8
    assert not any(r.note for r in rows)


@pytest.mark.parametrize("target", ["tracked", "frame"])
def test_advected_groups_track_a_translating_lattice(target):
    video = lattice_video(velocity=(0.05, 0.02, 0.0), frames=5)
    pairs = frame_chamfers(video, _every_point_anchored(), target=target)
    advected = np.mean([p.advected for p in pairs])
    in_place = np.mean([p.in_place for p in pairs])
    assert in_place > 0
    assert advected < 0.8 * in_place
    assert all(p.moved for p in pairs)


def test_static_frames_are_flagged_without_a_ratio():
    spec = SyntheticSpec(classes=["static"], n_points=32, t_frames=3, videos_per_class=1, noise_sigma=0.0)
    rows = imitator_chamfer_rows(generate_synthetic(spec).videos, micro_preset(1))
    assert all(r.note == "no_motion" and math.isnan(r.ratio) for r in rows[:-1])
    assert rows[-1].baseline_chamfer == 0.0
    assert rows[-1].note == "zero_baseline"
    assert math.isnan(rows[-1].ratio)


def test_unknown_chamfer_target(videos):
    with pytest.raises(ConfigError):
        frame_chamfers(videos[0], micro_preset(2), target="nearest")


def test_chamfer_needs_two_frames(rng):
    with pytest.raises(ConfigError):
        frame_chamfers(PointCloudVideo(frames=rng.random((1, 16, 3))), micro_preset(2))
