import logging
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

import typer
from pydantic import ValidationError
from typing_extensions import Annotated

from .bench import BenchConfig, run_bench
from .checkpoint import load_checkpoint, load_config, save_checkpoint
from .config import settings
from .dataio import generate_synthetic, read_pcv, subsample_dataset, write_pcv
from .dense import dense_accounting
from .errors import ConfigError, PvnextError
from .evaluation import evaluate_occlusion, imitator_chamfer_rows
from .models.config import MOTION_CLASSES, ModelConfig, RunConfig, SyntheticSpec, build_preset
from .models.video import VideoDataset
from .network import count_params_and_flops
from .reporting import BenchRow, ChamferRow, ConfusionRow, EvalRow, TrainRow, write_csv
from .training import confusion_rows, model_config_for, stratified_split, train_model
from .utils import config_digest, console, setup_logging

logger = logging.getLogger("pvnext.cli")

app = typer.Typer(name="pvnext", help="Point-cloud video motion encoding: data, training, evaluation, benchmarks.")


class Switch(str, Enum):
    on = "on"
    off = "off"


class PipelineChoice(str, Enum):
    onestep = "onestep"
    dense = "dense"
    both = "both"


class ChamferTargetChoice(str, Enum):
    tracked = "tracked"
    frame = "frame"


@contextmanager
def exit_codes() -> Iterator[None]:
    """Turn library errors into the documented process exit codes."""
    try:
        yield
    except PvnextError as exc:
        logger.error("%s [%s]", exc.message, exc.code)
        raise typer.Exit(code=exc.exit_code) from exc
    except ValidationError as exc:
        logger.error("invalid configuration: %s", exc)
        raise typer.Exit(code=ConfigError.exit_code) from exc


@app.callback()
def main(
    log_level: Annotated[str, typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")] = settings.LOG_LEVEL,
) -> None:
    setup_logging(log_level)


def _load_dataset(path: Path, frames: Optional[int], frame_step: int) -> VideoDataset:
    dataset = read_pcv(path)
    if frames is not None:
        dataset = subsample_dataset(dataset, frames, frame_step)
    return dataset


@app.command()
def synth(
    out: Annotated[Path, typer.Option("--out", help="PCV file to write")],
    classes: Annotated[str, typer.Option(help="comma-separated motion classes")] = ",".join(MOTION_CLASSES),
    n_points: Annotated[int, typer.Option("--points")] = 128,
    t_frames: Annotated[int, typer.Option("--frames")] = 16,
    videos_per_class: Annotated[int, typer.Option("--videos-per-class")] = 40,
    noise_sigma: Annotated[float, typer.Option("--noise-sigma")] = 0.005,
    seed: Annotated[int, typer.Option()] = settings.SEED,
) -> None:
    """Generate a labeled synthetic motion dataset."""
    with exit_codes():
        spec = SyntheticSpec(
            classes=[c.strip() for c in classes.split(",") if c.strip()],
            n_points=n_points,
            t_frames=t_frames,
            videos_per_class=videos_per_class,
            noise_sigma=noise_sigma,
            seed=seed,
        )
        dataset = generate_synthetic(spec)
        write_pcv(out, dataset)
        console.print(
            f"wrote {len(dataset)} videos ({dataset.num_classes} classes, "
            f"T={dataset.num_frames}, N={dataset.num_points}) to {out}"
        )


@app.command()
def train(
    data: Annotated[Path, typer.Option("--data", help="PCV dataset")],
    out: Annotated[Path, typer.Option("--out", help="checkpoint to write")],
    metrics: Annotated[Optional[Path], typer.Option(help="per-epoch CSV, default <out>.train.csv")] = None,
    preset: Annotated[str, typer.Option()] = settings.DEFAULT_PRESET,
    epochs: Annotated[int, typer.Option()] = 30,
    batch_size: Annotated[int, typer.Option("--batch-size")] = 8,
    seed: Annotated[int, typer.Option()] = settings.SEED,
    imitator: Annotated[Switch, typer.Option()] = Switch.on,
    motion_sign: Annotated[int, typer.Option("--motion-sign", help="+1 or -1")] = 1,
    imitator_k: Annotated[int, typer.Option("--imitator-k")] = 3,
    lr: Annotated[float, typer.Option("--lr")] = 0.05,
    momentum: Annotated[float, typer.Option()] = 0.9,
    frames: Annotated[Optional[int], typer.Option("--frames", help="keep this many frames")] = None,
    frame_step: Annotated[int, typer.Option("--frame-step")] = 1,
) -> None:
    """Train a classifier on the stratified half of a dataset."""
    with exit_codes():
        run = RunConfig(
            preset=preset,
            epochs=epochs,
            batch_size=batch_size,
            seed=seed,
            imitator_enabled=imitator is Switch.on,
            motion_sign=motion_sign,
            imitator_k=imitator_k,
            base_lr=lr,
            momentum=momentum,
            frames=frames,
            frame_step=frame_step,
        )
        dataset = _load_dataset(data, run.frames, run.frame_step)
        result = train_model(dataset, run)
        save_checkpoint(out, result.model)
        metrics = metrics if metrics is not None else out.with_name(out.name + ".train.csv")
        write_csv(metrics, TrainRow, result.rows)
        final = result.final_accuracy
        console.print(
            f"trained {run.epochs} epochs on {len(result.train_indices)} videos; "
            f"test accuracy {'n/a' if final is None else f'{final:.3f}'}; checkpoint {out}"
        )


def _resolve_config(checkpoint: Path, preset: Optional[str], num_classes: int, **flags) -> ModelConfig:
    if preset is None:
        return load_config(checkpoint)
    return build_preset(preset, num_classes, **flags)


@app.command("eval")
def eval_(
    data: Annotated[Path, typer.Option("--data")],
    checkpoint: Annotated[Path, typer.Option("--checkpoint")],
    out: Annotated[Path, typer.Option("--out", help="confusion CSV")],
    summary: Annotated[Optional[Path], typer.Option(help="eval.v1 summary CSV")] = None,
    preset: Annotated[Optional[str], typer.Option(help="rebuild the config from flags instead of the sidecar")] = None,
    imitator: Annotated[Switch, typer.Option()] = Switch.on,
    motion_sign: Annotated[int, typer.Option("--motion-sign")] = 1,
    imitator_k: Annotated[int, typer.Option("--imitator-k")] = 3,
    seed: Annotated[int, typer.Option(help="training seed; fixes the split and anchors")] = settings.SEED,
    occlude_ratio: Annotated[Optional[float], typer.Option("--occlude-ratio")] = None,
    occlude_seed: Annotated[int, typer.Option("--occlude-seed")] = 0,
    frames: Annotated[Optional[int], typer.Option("--frames")] = None,
    frame_step: Annotated[int, typer.Option("--frame-step")] = 1,
) -> None:
    """Held-out accuracy and confusion matrix, optionally under Drop-Local occlusion."""
    with exit_codes():
        dataset = _load_dataset(data, frames, frame_step)
        cfg = _resolve_config(
            checkpoint,
            preset,
            dataset.num_classes,
            imitator_enabled=imitator is Switch.on,
            motion_sign=motion_sign,
            imitator_k=imitator_k,
        )
        if cfg.num_classes != dataset.num_classes:
            raise ConfigError(f"checkpoint predicts {cfg.num_classes} classes, dataset has {dataset.num_classes}")
        model = load_checkpoint(checkpoint, cfg)
        _, test_idx = stratified_split(dataset.labels, seed)
        test_videos = [dataset.videos[i] for i in test_idx]
        row, matrix = evaluate_occlusion(model, test_videos, dataset.num_classes, occlude_ratio, occlude_seed, seed)
        write_csv(out, ConfusionRow, confusion_rows(matrix))
        if summary is not None:
            write_csv(summary, EvalRow, [row])
        console.print(f"{row.mode} accuracy {row.accuracy:.3f} on {row.num_videos} held-out videos")


@app.command("imitator-eval")
def imitator_eval(
    data: Annotated[Path, typer.Option("--data")],
    out: Annotated[Path, typer.Option("--out", help="chamfer CSV")],
    checkpoint: Annotated[Optional[Path], typer.Option(help="take the model config from this checkpoint")] = None,
    preset: Annotated[str, typer.Option()] = settings.DEFAULT_PRESET,
    imitator_k: Annotated[int, typer.Option("--imitator-k")] = 3,
    motion_sign: Annotated[int, typer.Option("--motion-sign")] = 1,
    seed: Annotated[int, typer.Option()] = settings.SEED,
    limit: Annotated[Optional[int], typer.Option(help="only the first LIMIT videos")] = None,
    target: Annotated[
        ChamferTargetChoice, typer.Option(help="tracked: same points one frame later; frame: whole next frame")
    ] = ChamferTargetChoice.tracked,
) -> None:
    """Chamfer distance of motion-advected groups against the next frame."""
    with exit_codes():
        dataset = read_pcv(data)
        if checkpoint is not None:
            cfg = load_config(checkpoint)
        else:
            cfg = build_preset(preset, max(dataset.num_classes, 1), imitator_k=imitator_k, motion_sign=motion_sign)
        videos = dataset.videos[:limit] if limit is not None else dataset.videos
        rows = imitator_chamfer_rows(videos, cfg, seed, target.value)
        write_csv(out, ChamferRow, rows)
        if rows:
            summary = rows[-1]
            console.print(
                f"mean chamfer: advected {summary.imitator_chamfer:.3e}, in place {summary.baseline_chamfer:.3e}, "
                f"ratio {summary.ratio:.3f}"
            )
            flagged = sum(1 for row in rows[:-1] if row.note)
            if flagged:
                console.print(f"{flagged} frames have no meaningful ratio (see the note column)")


@app.command()
def bench(
    out: Annotated[Path, typer.Option("--out", help="bench CSV")],
    preset: Annotated[str, typer.Option()] = "msr",
    pipeline: Annotated[PipelineChoice, typer.Option()] = PipelineChoice.both,
    delta_t: Annotated[int, typer.Option("--delta-t")] = 1,
    points: Annotated[int, typer.Option()] = 2048,
    frames: Annotated[int, typer.Option()] = 16,
    batch_size: Annotated[int, typer.Option("--batch-size")] = 1,
    warmup: Annotated[int, typer.Option()] = settings.BENCH_WARMUP,
    iterations: Annotated[int, typer.Option()] = settings.BENCH_ITERATIONS,
    imitator: Annotated[Switch, typer.Option()] = Switch.on,
    motion_sign: Annotated[int, typer.Option("--motion-sign")] = 1,
    imitator_k: Annotated[int, typer.Option("--imitator-k")] = 3,
    parallel: Annotated[bool, typer.Option("--parallel/--serial")] = settings.PARALLEL,
    seed: Annotated[int, typer.Option()] = settings.SEED,
) -> None:
    """Time and count the one-step and dense-query encoders on the same videos."""
    with exit_codes():
        cfg = BenchConfig(
            preset=preset,
            pipelines=["onestep", "dense"] if pipeline is PipelineChoice.both else [pipeline.value],
            delta_t=delta_t,
            points=points,
            frames=frames,
            batch_size=batch_size,
            warmup=warmup,
            iterations=iterations,
            seed=seed,
            imitator_enabled=imitator is Switch.on,
            motion_sign=motion_sign,
            imitator_k=imitator_k,
            parallel=parallel,
        )
        rows = run_bench(cfg)
        write_csv(out, BenchRow, rows)
        for row in rows:
            console.print(
                f"{row.pipeline:8s} dt={row.delta_t} median {row.median_ns / 1e6:.2f} ms "
                f"queries {row.ball_queries} embeddings {row.member_embeddings} checksum {row.checksum}"
            )


@app.command()
def accounting(
    preset: Annotated[str, typer.Option()] = "msr",
    points: Annotated[int, typer.Option()] = 2048,
    frames: Annotated[int, typer.Option()] = 16,
    num_classes: Annotated[int, typer.Option("--num-classes")] = 20,
    imitator: Annotated[Switch, typer.Option()] = Switch.on,
    delta_t: Annotated[Optional[int], typer.Option("--delta-t", help="count the dense-query stack instead")] = None,
) -> None:
    """Analytic parameter and multiply-add counts."""
    with exit_codes():
        cfg = build_preset(preset, num_classes, imitator_enabled=imitator is Switch.on)
        if delta_t is None:
            report = count_params_and_flops(cfg, points, frames)
        else:
            report = dense_accounting(cfg, points, frames, delta_t)
        console.print(f"config digest  {config_digest(cfg).hex()[:16]}")
        console.print(f"parameters     {report.params:,} ({report.params / 1e6:.3f} M)")
        console.print(f"multiply-adds  {report.macs:,} ({report.macs / 1e9:.3f} G, one per MAC)")
        console.print(f"FLOPs          {report.flops:,} ({report.flops / 1e9:.3f} G, two per MAC)")
        console.print(f"query FLOPs    {report.query_flops:,} over {report.query_distance_evals:,} distances")
        console.print(f"peak bytes     {report.peak_bytes:,}")


@app.command()
def serve(
    host: Annotated[str, typer.Option()] = "127.0.0.1",
    port: Annotated[int, typer.Option()] = 8000,
) -> None:
    """Serve the read-only HTTP API."""
    import uvicorn

    uvicorn.run("pvnext.main:app", host=host, port=port)


if __name__ == "__main__":
    app()
