"""Timed, counted comparison of the one-step and dense-query stage stacks."""
import contextvars
import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import AbstractContextManager, nullcontext
from typing import Callable, Literal, Optional

from pydantic import BaseModel, Field
from threadpoolctl import threadpool_limits

from . import instrument
from .dataio import generate_synthetic
from .dense import dense_accounting
from .models.config import ModelConfig, SyntheticSpec, build_preset
from .models.video import PointCloudVideo
from .network import PvNeXt, count_params_and_flops
from .nn import no_grad
from .reporting import BenchRow
from .utils import array_checksum

logger = logging.getLogger(__name__)

Pipeline = Literal["onestep", "dense"]


class BenchConfig(BaseModel):
    preset: Literal["msr", "micro", "ntu"] = "msr"
    pipelines: list[Pipeline] = Field(default_factory=lambda: ["onestep", "dense"], min_length=1)
    delta_t: int = Field(default=1, ge=0)
    points: int = Field(default=2048, gt=0)
    frames: int = Field(default=16, gt=0)
    batch_size: int = Field(default=1, gt=0)
    num_classes: int = Field(default=20, gt=0)
    warmup: int = Field(default=3, ge=3)
    iterations: int = Field(default=10, ge=10)
    seed: int = 0
    imitator_enabled: bool = True
    motion_sign: Literal[1, -1] = 1
    imitator_k: int = Field(default=3, gt=0)
    parallel: bool = False

    def build_model_config(self) -> ModelConfig:
        return build_preset(
            self.preset,
            self.num_classes,
            imitator_enabled=self.imitator_enabled,
            motion_sign=self.motion_sign,
            imitator_k=self.imitator_k,
        )


def bench_videos(cfg: BenchConfig) -> list[PointCloudVideo]:
    spec = SyntheticSpec(
        classes=["translate_x"],
        n_points=cfg.points,
        t_frames=cfg.frames,
        videos_per_class=cfg.batch_size,
        seed=cfg.seed,
    )
    return generate_synthetic(spec).videos


def time_median_ns(fn: Callable[[], object], warmup: int, iterations: int) -> int:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iterations):
        started = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - started)
    return int(statistics.median(samples))


def _encoder(model: PvNeXt, pipeline: Pipeline, delta_t: int, seed: int):
    window = delta_t if pipeline == "dense" else None

    def run(video: PointCloudVideo):
        with no_grad():
            return model.encode(video, seed, delta_t=window)

    return run


def _batch_runner(
    cfg: BenchConfig,
    model_cfg: ModelConfig,
    pipeline: Pipeline,
    videos: list[PointCloudVideo],
    pool: Optional[ThreadPoolExecutor] = None,
    workers: int = 1,
) -> Callable[[], object]:
    """A callable encoding the whole batch, serially or on `pool`."""
    if pool is None:
        encode = _encoder(PvNeXt(model_cfg, cfg.seed), pipeline, cfg.delta_t, cfg.seed)
        return lambda: [encode(video) for video in videos]

    # one model instance per worker; instances share no mutable state
    encoders = [_encoder(PvNeXt(model_cfg, cfg.seed), pipeline, cfg.delta_t, cfg.seed) for _ in range(workers)]

    def run_parallel():
        futures = [
            pool.submit(contextvars.copy_context().run, encoders[i % workers], video)
            for i, video in enumerate(videos)
        ]
        return [f.result() for f in futures]

    return run_parallel


def worker_count(cfg: BenchConfig, num_videos: int) -> int:
    return max(1, min(num_videos, os.cpu_count() or 1)) if cfg.parallel else 1


def blas_limits(cfg: BenchConfig) -> AbstractContextManager:
    """Native thread pools (BLAS, OpenMP) pinned to one thread unless the run is parallel."""
    return nullcontext() if cfg.parallel else threadpool_limits(limits=1)


def bench_pipeline(cfg: BenchConfig, pipeline: Pipeline, videos: Optional[list[PointCloudVideo]] = None) -> BenchRow:
    model_cfg = cfg.build_model_config()
    videos = videos if videos is not None else bench_videos(cfg)

    model = PvNeXt(model_cfg, cfg.seed)
    encode = _encoder(model, pipeline, cfg.delta_t, cfg.seed)
    with instrument.counting() as counters:
        outputs = [encode(video) for video in videos]
    checksum = array_checksum(*(out.feats.data for out in outputs))

    threads = worker_count(cfg, len(videos))
    with blas_limits(cfg):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                runner = _batch_runner(cfg, model_cfg, pipeline, videos, pool, threads)
                median_ns = time_median_ns(runner, cfg.warmup, cfg.iterations)
        else:
            median_ns = time_median_ns(_batch_runner(cfg, model_cfg, pipeline, videos), cfg.warmup, cfg.iterations)

    if pipeline == "dense":
        report = dense_accounting(model_cfg, cfg.points, cfg.frames, cfg.delta_t)
    else:
        report = count_params_and_flops(model_cfg, cfg.points, cfg.frames)
    row = BenchRow(
        run_id=f"{cfg.preset}-{pipeline}-dt{cfg.delta_t if pipeline == 'dense' else 0}-n{cfg.points}-t{cfg.frames}-s{cfg.seed}",
        pipeline=pipeline,
        delta_t=cfg.delta_t if pipeline == "dense" else 0,
        preset=cfg.preset,
        points=cfg.points,
        frames=cfg.frames,
        batch_size=len(videos),
        threads=threads,
        warmup=cfg.warmup,
        iterations=cfg.iterations,
        median_ns=median_ns,
        ball_queries=counters.ball_queries,
        member_embeddings=counters.member_embeddings,
        macs=counters.macs,
        flops=2 * counters.macs,
        peak_bytes=report.peak_bytes,
        checksum=checksum,
    )
    logger.info(
        "%s dt=%d: median %.2f ms, %d queries, %d embeddings",
        pipeline,
        row.delta_t,
        median_ns / 1e6,
        row.ball_queries,
        row.member_embeddings,
    )
    return row


def run_bench(cfg: BenchConfig) -> list[BenchRow]:
    """One row per requested pipeline over the same videos."""
    videos = bench_videos(cfg)
    return [bench_pipeline(cfg, pipeline, videos) for pipeline in cfg.pipelines]
