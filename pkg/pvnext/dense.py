"""Dense-query temporal-window stage, the baseline the one-step encoder replaces.

For every frame t each anchor queries every frame tau in [t - dt, t + dt]
(clipped to the sequence), embeds the K members with the shared per-member
MLP, max-pools over members and then over the window.
"""
import logging
from typing import Optional

import numpy as np

from .geometry import ball_query, gather_group
from .imitator import anchors_from_frames
from .models.config import DenseConfig, ModelConfig
from .models.metrics import AccountingReport
from .network import (
    BYTES_PER_VALUE,
    DISTANCE_FLOPS,
    StageBlock,
    StageOutput,
    count_params_and_flops,
    encode_members,
    member_inputs,
)
from .nn import Tensor, maxpool, take

logger = logging.getLogger(__name__)


def window_pairs(num_frames: int, cfg: DenseConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t, tau) pairs in frame-major order and, per t, the pair columns of its window.

    Windows shorter than the widest are padded by repeating their first column;
    duplicates leave a max unchanged.
    """
    pair_t: list[int] = []
    pair_tau: list[int] = []
    windows: list[list[int]] = []
    for t in range(num_frames):
        columns = []
        for tau in cfg.window(t, num_frames):
            columns.append(len(pair_t))
            pair_t.append(t)
            pair_tau.append(tau)
        windows.append(columns)
    width = max(len(w) for w in windows)
    padded = [w + [w[0]] * (width - len(w)) for w in windows]
    return np.asarray(pair_t), np.asarray(pair_tau), np.asarray(padded, dtype=np.int64)


def _encode_pairs(
    frames: np.ndarray,
    feats: Optional[Tensor],
    anchor_coords: np.ndarray,
    pair_t: np.ndarray,
    pair_tau: np.ndarray,
    cfg: DenseConfig,
    stage: StageBlock,
    order: str,
) -> Tensor:
    """Per-(anchor, pair) pooled member embeddings, M x P x C."""
    centers = anchor_coords[:, pair_t].transpose(1, 0, 2)
    targets = frames[pair_tau]
    groups = ball_query(centers, targets, cfg.radius, cfg.k, order=order)
    rel = gather_group(targets, groups.indices, centers).transpose(1, 0, 2, 3)
    x = member_inputs(rel, feats, groups.indices.transpose(1, 0, 2), pair_tau)
    return encode_members(stage, x)


def dense_temporal_pool(window_feats: Tensor, axis: int = -2) -> Tensor:
    """Elementwise max over the window axis."""
    pooled, _ = maxpool(window_feats, axis=axis)
    return pooled


def dense_encode_frame(
    frames: np.ndarray,
    anchors: np.ndarray,
    t: int,
    cfg: DenseConfig,
    stage: StageBlock,
    feats: Optional[Tensor] = None,
    order: str = "index",
) -> Tensor:
    """Dense encoding of frame t for anchors M x 3; frames is T x N x 3, feats N x T x C.

    Returns the window-pooled member features, M x C, before the refine MLP.
    """
    frames = np.asarray(frames, dtype=np.float64)
    window = cfg.window(t, frames.shape[0])
    pair_tau = np.asarray(window)
    pair_t = np.zeros(len(window), dtype=np.int64)
    anchor_coords = np.asarray(anchors, dtype=np.float64)[:, None, :]
    g = _encode_pairs(frames, feats, anchor_coords, pair_t, pair_tau, cfg, stage, order)
    return dense_temporal_pool(g, axis=1)


def dense_run_stage(
    stage_in: StageOutput,
    cfg: DenseConfig,
    stage: StageBlock,
    seed: int,
    order: str = "index",
) -> StageOutput:
    frames = stage_in.frames()
    num_frames = frames.shape[0]
    m_out = max(1, stage_in.num_points // cfg.spatial_stride)
    anchors = anchors_from_frames(frames, m_out, seed)

    pair_t, pair_tau, windows = window_pairs(num_frames, cfg)
    g = _encode_pairs(frames, stage_in.feats, anchors.anchor_coords, pair_t, pair_tau, cfg, stage, order)
    per_window = take(g, (slice(None), windows))
    pooled = dense_temporal_pool(per_window, axis=2)
    logger.debug(
        "dense stage: %d anchors x %d frames, %d window queries, dt=%d",
        m_out,
        num_frames,
        len(pair_t),
        cfg.delta_t,
    )
    return StageOutput(coords=anchors.anchor_coords, feats=stage.finish(pooled))


def dense_accounting(cfg: ModelConfig, n: int, t: int, delta_t: int) -> AccountingReport:
    """Analytic counts for the stage stack run with dense temporal windows."""
    base = count_params_and_flops(cfg, n, t)
    stage_macs: list[int] = []
    distance_evals = 0
    peak = n * t * 3 * BYTES_PER_VALUE
    m_in, channels = n, 0
    for stage_cfg in cfg.stages:
        dense = DenseConfig.from_stage(stage_cfg, delta_t)
        pairs = sum(len(dense.window(i, t)) for i in range(t))
        m_out = stage_cfg.out_points(m_in)
        enc_widths = stage_cfg.encoder_widths(channels)
        enc_macs = sum(a * b for a, b in zip(enc_widths[:-1], enc_widths[1:]))
        refine = stage_cfg.refine_widths() or []
        ref_macs = sum(a * b for a, b in zip(refine[:-1], refine[1:]))
        stage_macs.append(m_out * (pairs * stage_cfg.nsamples * enc_macs + t * ref_macs))
        distance_evals += pairs * m_out * m_in
        peak = max(peak, m_out * pairs * stage_cfg.nsamples * sum(enc_widths) * BYTES_PER_VALUE)
        m_in, channels = m_out, stage_cfg.out_channels
    macs = sum(stage_macs) + base.head_macs
    return base.model_copy(
        update={
            "stage_macs": stage_macs,
            "macs": macs,
            "flops": 2 * macs,
            "query_distance_evals": distance_evals,
            "query_flops": DISTANCE_FLOPS * distance_evals,
            "peak_bytes": peak,
        }
    )
