import numpy as np
import pytest

from pvnext import instrument
from pvnext.dense import dense_accounting, dense_encode_frame, dense_run_stage, dense_temporal_pool, window_pairs
from pvnext.geometry import ball_query, gather_group
from pvnext.models import DenseConfig, PointCloudVideo, micro_preset
from pvnext.network import PvNeXt, StageBlock, StageOutput, count_params_and_flops, run_stage
from pvnext.nn import Tensor, no_grad


def _dense_cfg(stage_cfg, delta_t):
    return DenseConfig.from_stage(stage_cfg, delta_t)


def test_window_is_clipped_at_the_ends():
    cfg = DenseConfig(delta_t=1, k=4, radius=0.2, mlps=[[8]], spatial_stride=2)
    assert cfg.window(0, 5) == [0, 1]
    assert cfg.window(2, 5) == [1, 2, 3]
    assert cfg.window(4, 5) == [3, 4]


def test_window_pairs_pad_with_the_first_column():
    cfg = DenseConfig(delta_t=1, k=4, radius=0.2, mlps=[[8]], spatial_stride=2)
    pair_t, pair_tau, windows = window_pairs(3, cfg)
    assert pair_t.tolist() == [0, 0, 1, 1, 1, 2, 2]
    assert pair_tau.tolist() == [0, 1, 0, 1, 2, 1, 2]
    assert windows.tolist() == [[0, 1, 0], [2, 3, 4], [5, 6, 5]]


class TestTemporalPool:
    def test_single_frame_is_identity(self, rng):
        g = rng.normal(size=(5, 1, 4))
        np.testing.assert_array_equal(dense_temporal_pool(Tensor(g), axis=1).data, g[:, 0])

    def test_equal_frames(self, rng):
        g = rng.normal(size=(5, 4))
        stacked = np.stack([g, g], axis=1)
        np.testing.assert_array_equal(dense_temporal_pool(Tensor(stacked), axis=1).data, g)

    def test_matches_exhaustive_max(self, rng):
        g = rng.normal(size=(3, 5, 4))
        np.testing.assert_array_equal(dense_temporal_pool(Tensor(g), axis=1).data, g.max(axis=1))


def test_query_count_example(rng):
    """T=4, dt=1, M=8: windows of 2, 3, 3, 2 frames give 80 queries."""
    frames = rng.random((4, 32, 3))
    cfg = micro_preset(3).stages[0]
    stage = StageBlock(cfg, 0, rng)
    with instrument.counting() as counters, no_grad():
        dense_run_stage(StageOutput.from_video(PointCloudVideo(frames=frames)), _dense_cfg(cfg, 1), stage, seed=0)
    assert cfg.out_points(32) == 8
    assert counters.ball_queries == 80


@pytest.mark.parametrize("delta_t", [1, 2, 3])
def test_embedding_ratio_on_interior_frames(rng, delta_t):
    frames = rng.random((10, 32, 3))
    video = PointCloudVideo(frames=frames)
    cfg = micro_preset(3).stages[0]
    stage = StageBlock(cfg, 0, rng)
    m, k = cfg.out_points(32), cfg.nsamples
    dense_cfg = _dense_cfg(cfg, delta_t)

    with instrument.counting() as onestep, no_grad():
        run_stage(StageOutput.from_video(video), cfg, stage, seed=0)
    with instrument.counting() as dense, no_grad():
        dense_run_stage(StageOutput.from_video(video), dense_cfg, stage, seed=0)

    per_frame = [len(dense_cfg.window(t, 10)) for t in range(10)]
    assert onestep.member_embeddings == m * k * 10
    assert dense.member_embeddings == m * k * sum(per_frame)
    interior = [w for t, w in enumerate(per_frame) if delta_t <= t < 10 - delta_t]
    assert all(w == 2 * delta_t + 1 for w in interior)
    assert onestep.ball_queries == 2 * m * 10
    assert dense.ball_queries == m * sum(per_frame)


def test_zero_window_matches_zero_motion_one_step(tiny_video):
    cfg = micro_preset(3).stages[0]
    stage = StageBlock(cfg, 0, np.random.default_rng(7))
    state = StageOutput.from_video(tiny_video)
    with no_grad():
        dense = dense_run_stage(state, _dense_cfg(cfg, 0), stage, seed=2)
        onestep = run_stage(state, cfg, stage, seed=2, zero_motion=True)
    assert np.array_equal(dense.feats.data, onestep.feats.data)
    assert np.array_equal(dense.coords, onestep.coords)


def test_zero_window_query_count_drops_the_imitator_share(tiny_video):
    cfg = micro_preset(3)
    model = PvNeXt(cfg)
    with instrument.counting() as onestep, no_grad():
        model(tiny_video)
    with instrument.counting() as dense, no_grad():
        model(tiny_video, delta_t=0)
    m = cfg.stages[0].out_points(tiny_video.num_points)
    assert dense.ball_queries == onestep.ball_queries - m * tiny_video.num_frames


def test_dense_encode_frame_matches_naive_reference(tiny_video, rng):
    cfg = micro_preset(3).stages[0]
    stage = StageBlock(cfg, 0, rng)
    dense_cfg = _dense_cfg(cfg, 1)
    anchors = tiny_video.frames[2, :5]
    with no_grad():
        out = dense_encode_frame(tiny_video.frames, anchors, 2, dense_cfg, stage).data

    expected = np.full((5, cfg.mlps[0][-1]), -np.inf)
    for tau in (1, 2, 3):
        groups = ball_query(anchors, tiny_video.frames[tau], cfg.radius, cfg.nsamples)
        rel = gather_group(tiny_video.frames[tau], groups.indices, anchors)
        with no_grad():
            g = stage.encoder(Tensor(rel)).data.max(axis=1)
        expected = np.maximum(expected, g)
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_model_forward_with_dense_stages(tiny_video):
    model = PvNeXt(micro_preset(3))
    with no_grad():
        logits = model(tiny_video, delta_t=1)
    assert logits.shape == (3,)
    assert np.all(np.isfinite(logits.data))


def test_dense_accounting_counts_window_pairs():
    cfg = micro_preset(3)
    onestep = count_params_and_flops(cfg, 128, 16)
    zero = dense_accounting(cfg, 128, 16, 0)
    assert zero.macs == onestep.macs
    wide = dense_accounting(cfg, 128, 16, 2)
    assert wide.macs > onestep.macs
    assert wide.params == onestep.params
