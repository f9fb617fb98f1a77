"""Single-step motion encoder, the stage stack and the classifier.

Stage tensors use an anchor-major layout: coordinates are M x T x 3, features
M x T x C and groups M x T x K x (3 + C).
"""
import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import instrument
from .errors import ConfigError
from .geometry import ball_query, gather_group
from .imitator import anchors_from_frames, motion_for_anchors
from .instrument import StageHook, StageTrace
from .models.config import DenseConfig, ModelConfig, StageConfig
from .models.metrics import AccountingReport
from .models.video import PointCloudVideo
from .nn import MlpBlock, Module, Tensor, concat, maxpool, reshape, take

logger = logging.getLogger(__name__)

BYTES_PER_VALUE = 8
DISTANCE_FLOPS = 8


@dataclass
class StageOutput:
    coords: np.ndarray
    feats: Optional[Tensor] = None

    @classmethod
    def from_video(cls, video: PointCloudVideo) -> "StageOutput":
        return cls(coords=np.ascontiguousarray(video.frames.transpose(1, 0, 2)))

    @property
    def num_points(self) -> int:
        return self.coords.shape[0]

    @property
    def num_frames(self) -> int:
        return self.coords.shape[1]

    @property
    def channels(self) -> int:
        return 0 if self.feats is None else self.feats.shape[-1]

    def frames(self) -> np.ndarray:
        return np.ascontiguousarray(self.coords.transpose(1, 0, 2))


class StageBlock(Module):
    """Parameters of one stage: the per-member encoder and the optional refine MLP."""

    def __init__(self, cfg: StageConfig, in_channels: int, rng: np.random.Generator):
        self.cfg = cfg
        self.in_channels = in_channels
        self.encoder = MlpBlock(cfg.encoder_widths(in_channels), rng, final_activation=cfg.relu_after)
        refine = cfg.refine_widths()
        self.refine = MlpBlock(refine, rng, final_activation=cfg.relu_after) if refine else None

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        yield from self.encoder.named_parameters(f"{prefix}encoder.")
        if self.refine is not None:
            yield from self.refine.named_parameters(f"{prefix}refine.")

    def finish(self, pooled: Tensor) -> Tensor:
        return self.refine(pooled) if self.refine is not None else pooled


def synthesize_virtual_frame(groups: np.ndarray, motion: np.ndarray) -> np.ndarray:
    """Virtual groups: anchor-relative members shifted by the anchor's motion broadcast over its K members."""
    groups = np.asarray(groups, dtype=np.float64)
    motion = np.asarray(motion, dtype=np.float64)
    if groups.shape[:-2] != motion.shape[:-1] or groups.shape[-1] != 3 or motion.shape[-1] != 3:
        raise ConfigError(f"groups {groups.shape} and motion {motion.shape} do not line up")
    return groups + motion[..., None, :]


def member_inputs(
    rel_xyz: np.ndarray,
    feats: Optional[Tensor],
    indices: np.ndarray,
    frame_of_column: np.ndarray,
) -> Tensor:
    """[relative xyz || gathered input features] per group member, M x P x K x (3 + C)."""
    x = Tensor(rel_xyz)
    if feats is None:
        return x
    gathered = take(feats, (indices, frame_of_column[None, :, None]))
    return concat([x, gathered], axis=-1)


def query_groups(
    frames: np.ndarray,
    anchor_coords: np.ndarray,
    radius: float,
    k: int,
    order: str = "index",
) -> tuple[np.ndarray, np.ndarray]:
    """Ball query anchors (M x T x 3) into their own frames (T x N x 3).

    Returns member indices M x T x K and relative coordinates M x T x K x 3.
    """
    centers = anchor_coords.transpose(1, 0, 2)
    groups = ball_query(centers, frames, radius, k, order=order)
    rel = gather_group(frames, groups.indices, centers)
    return groups.indices.transpose(1, 0, 2), rel.transpose(1, 0, 2, 3)


def encode_members(stage: StageBlock, x: Tensor) -> Tensor:
    m, p, k = x.shape[:3]
    instrument.current().member_embeddings += m * p * k
    pooled, _ = maxpool(stage.encoder(x), axis=2)
    return pooled


def one_step_encode(
    frame_points: np.ndarray,
    anchors: np.ndarray,
    motion: Optional[np.ndarray],
    cfg: StageConfig,
    stage: StageBlock,
    features: Optional[Tensor] = None,
    order: str = "index",
) -> Tensor:
    """Encode one frame: a single ball query per anchor, motion shift, max-pooled member embeddings.

    frame_points is N x 3, anchors M x 3, motion M x 3 (or None), features N x C.
    Returns M x C.
    """
    frames = np.asarray(frame_points, dtype=np.float64)[None]
    anchor_coords = np.asarray(anchors, dtype=np.float64)[:, None, :]
    feats = None if features is None else reshape(features, (features.shape[0], 1, features.shape[1]))
    motion_mt = None if motion is None else np.asarray(motion, dtype=np.float64)[:, None, :]
    out, _, _ = _one_step_stage(frames, feats, anchor_coords, motion_mt, cfg, stage, order)
    return reshape(out, (out.shape[0], out.shape[2]))


def _one_step_stage(
    frames: np.ndarray,
    feats: Optional[Tensor],
    anchor_coords: np.ndarray,
    motion: Optional[np.ndarray],
    cfg: StageConfig,
    stage: StageBlock,
    order: str,
) -> tuple[Tensor, np.ndarray, np.ndarray]:
    indices, rel = query_groups(frames, anchor_coords, cfg.radius, cfg.nsamples, order)
    virtual = rel if motion is None else synthesize_virtual_frame(rel, motion)
    x = member_inputs(virtual, feats, indices, np.arange(frames.shape[0]))
    return stage.finish(encode_members(stage, x)), rel, virtual


def run_stage(
    stage_in: StageOutput,
    cfg: StageConfig,
    stage: StageBlock,
    seed: int,
    imitator_k: int = 3,
    imitator_enabled: bool = True,
    motion_sign: int = 1,
    zero_motion: bool = False,
    order: str = "index",
    hooks: Sequence[StageHook] = (),
    stage_index: int = 0,
) -> StageOutput:
    m_in = stage_in.num_points
    if m_in < 1:
        raise ConfigError("a stage needs at least one input point")
    frames = stage_in.frames()
    anchors = anchors_from_frames(frames, cfg.out_points(m_in), seed)

    if zero_motion:
        motion = np.zeros_like(anchors.anchor_coords)
    elif imitator_enabled:
        motion = motion_for_anchors(frames, anchors, imitator_k, cfg.radius, motion_sign, order).vectors
    else:
        motion = None

    feats, rel, virtual = _one_step_stage(
        frames, stage_in.feats, anchors.anchor_coords, motion, cfg, stage, order
    )
    for hook in hooks:
        hook(
            StageTrace(
                stage=stage_index,
                anchor_coords=anchors.anchor_coords,
                groups=rel,
                virtual_groups=virtual,
                motion=motion if motion is not None else np.zeros_like(anchors.anchor_coords),
            )
        )
    return StageOutput(coords=anchors.anchor_coords, feats=feats)


class PvNeXt(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        self.order = cfg.query_order
        rng = np.random.default_rng(seed)
        self.stages: list[StageBlock] = []
        channels = 0
        for stage_cfg in cfg.stages:
            self.stages.append(StageBlock(stage_cfg, channels, rng))
            channels = stage_cfg.out_channels
        self.head = MlpBlock([channels, *cfg.head_hidden, cfg.num_classes], rng, final_activation=False)
        logger.debug("built %d-stage model with %d parameters", len(self.stages), self.num_parameters())

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for i, stage in enumerate(self.stages):
            yield from stage.named_parameters(f"{prefix}stages.{i}.")
        yield from self.head.named_parameters(f"{prefix}head.")

    def encode(
        self,
        video: PointCloudVideo,
        seed: int = 0,
        delta_t: Optional[int] = None,
        zero_motion: bool = False,
        hooks: Sequence[StageHook] = (),
    ) -> StageOutput:
        """Run the stage stack; `delta_t` switches every stage to the dense-query operator."""
        from .dense import dense_run_stage

        state = StageOutput.from_video(video)
        for i, (stage_cfg, stage) in enumerate(zip(self.cfg.stages, self.stages)):
            if delta_t is None:
                state = run_stage(
                    state,
                    stage_cfg,
                    stage,
                    seed,
                    imitator_k=self.cfg.imitator_k,
                    imitator_enabled=self.cfg.imitator_enabled,
                    motion_sign=self.cfg.motion_sign,
                    zero_motion=zero_motion,
                    order=self.order,
                    hooks=hooks,
                    stage_index=i,
                )
            else:
                state = dense_run_stage(state, DenseConfig.from_stage(stage_cfg, delta_t), stage, seed, self.order)
        return state

    def forward(
        self,
        video: PointCloudVideo,
        seed: int = 0,
        delta_t: Optional[int] = None,
        zero_motion: bool = False,
        hooks: Sequence[StageHook] = (),
    ) -> Tensor:
        """Logits of shape (num_classes,): stages, max over points then frames, head."""
        state = self.encode(video, seed, delta_t, zero_motion, hooks)
        per_frame, _ = maxpool(state.feats, axis=0)
        descriptor, _ = maxpool(per_frame, axis=0)
        logits = self.head(reshape(descriptor, (1, descriptor.shape[0])))
        return reshape(logits, (self.cfg.num_classes,))

    __call__ = forward


def classify(video: PointCloudVideo, model: PvNeXt, seed: int = 0) -> Tensor:
    return model.forward(video, seed)


def _mlp_cost(widths: Sequence[int]) -> tuple[int, int]:
    """(params, multiply-adds per row) of a chain of linear layers."""
    params = sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))
    macs = sum(a * b for a, b in zip(widths[:-1], widths[1:]))
    return params, macs


def count_params_and_flops(cfg: ModelConfig, n: int, t: int) -> AccountingReport:
    """Analytic parameter and compute counts for N points x T frames.

    `macs` counts multiply-adds, `flops` counts them as two operations each.
    Ball-query distance work is reported separately.
    """
    params = 0
    stage_macs: list[int] = []
    distance_evals = 0
    peak = n * t * 3 * BYTES_PER_VALUE
    m_in, channels = n, 0
    queries_per_anchor = 2 if cfg.imitator_enabled else 1
    for stage in cfg.stages:
        m_out = stage.out_points(m_in)
        enc_widths = stage.encoder_widths(channels)
        enc_params, enc_macs = _mlp_cost(enc_widths)
        refine = stage.refine_widths()
        ref_params, ref_macs = _mlp_cost(refine) if refine else (0, 0)
        params += enc_params + ref_params
        stage_macs.append(m_out * t * (stage.nsamples * enc_macs + ref_macs))
        distance_evals += queries_per_anchor * m_out * t * m_in
        members = m_out * t * stage.nsamples
        peak = max(peak, members * sum(enc_widths) * BYTES_PER_VALUE)
        m_in, channels = m_out, stage.out_channels

    head_params, head_macs = _mlp_cost([channels, *cfg.head_hidden, cfg.num_classes])
    params += head_params
    macs = sum(stage_macs) + head_macs
    return AccountingReport(
        params=params,
        stage_macs=stage_macs,
        head_macs=head_macs,
        macs=macs,
        flops=2 * macs,
        query_distance_evals=distance_evals,
        query_flops=DISTANCE_FLOPS * distance_evals,
        peak_bytes=peak,
        points=n,
        frames=t,
    )
