"""Stratified split, the SGD training loop and held-out evaluation."""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import instrument
from .errors import ConfigError, NumericError
from .models.config import ModelConfig, RunConfig, build_preset
from .models.video import PointCloudVideo, VideoDataset
from .network import PvNeXt
from .nn import Sgd, SgdSchedule, Tensor, concat, no_grad, reshape, softmax_cross_entropy
from .reporting import ConfusionRow, TrainRow

logger = logging.getLogger(__name__)


def model_config_for(run: RunConfig, num_classes: int) -> ModelConfig:
    return build_preset(
        run.preset,
        num_classes,
        imitator_enabled=run.imitator_enabled,
        motion_sign=run.motion_sign,
        imitator_k=run.imitator_k,
    )


def stratified_split(labels: Sequence[int], seed: int, train_fraction: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class shuffle; the first ceil(fraction * n) of each class train."""
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == label))
        cut = math.ceil(train_fraction * len(members))
        train.extend(members[:cut])
        test.extend(members[cut:])
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))


def batch_logits(model: PvNeXt, videos: Sequence[PointCloudVideo], seed: int) -> Tensor:
    rows = [reshape(model(video, seed), (1, model.cfg.num_classes)) for video in videos]
    return concat(rows, axis=0)


def predict(model: PvNeXt, videos: Sequence[PointCloudVideo], seed: int = 0) -> np.ndarray:
    with no_grad():
        return np.array([int(np.argmax(model(video, seed).data)) for video in videos], dtype=np.int64)


def accuracy(labels: np.ndarray, predictions: np.ndarray) -> float:
    return float(np.mean(labels == predictions)) if len(labels) else 0.0


def confusion_matrix(labels: np.ndarray, predictions: np.ndarray, num_classes: int) -> np.ndarray:
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (labels, predictions), 1)
    return matrix


def confusion_rows(matrix: np.ndarray) -> list[ConfusionRow]:
    return [
        ConfusionRow(true_class=i, predicted_class=j, count=int(matrix[i, j]))
        for i in range(matrix.shape[0])
        for j in range(matrix.shape[1])
    ]


@dataclass
class TrainResult:
    model: PvNeXt
    rows: list[TrainRow] = field(default_factory=list)
    train_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    test_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def final_accuracy(self) -> Optional[float]:
        return self.rows[-1].test_accuracy if self.rows else None


def train_model(
    dataset: VideoDataset,
    run: RunConfig,
    model_cfg: Optional[ModelConfig] = None,
) -> TrainResult:
    if len(dataset) == 0:
        raise ConfigError("cannot train on an empty dataset")
    model_cfg = model_cfg if model_cfg is not None else model_config_for(run, dataset.num_classes)
    model = PvNeXt(model_cfg, seed=run.seed)
    train_idx, test_idx = stratified_split(dataset.labels, run.seed)
    result = TrainResult(model=model, train_indices=train_idx, test_indices=test_idx)
    if run.epochs == 0:
        return result

    schedule = SgdSchedule(base_lr=run.base_lr, total_epochs=run.epochs, momentum=run.momentum)
    optimizer = Sgd(list(model.named_parameters()), schedule)
    test_videos = [dataset.videos[i] for i in test_idx]
    test_labels = dataset.labels[test_idx]
    rng = np.random.default_rng([run.seed, 1])

    for epoch in range(run.epochs):
        started = time.perf_counter_ns()
        order = rng.permutation(train_idx)
        total_loss = 0.0
        with instrument.counting() as counters:
            for start in range(0, len(order), run.batch_size):
                batch = [dataset.videos[i] for i in order[start : start + run.batch_size]]
                labels = np.array([video.label for video in batch], dtype=np.int64)
                optimizer.zero_grad()
                loss = softmax_cross_entropy(batch_logits(model, batch, run.seed), labels)
                if not math.isfinite(loss.item()):
                    raise NumericError(f"non-finite loss {loss.item()} at epoch {epoch}")
                loss.backward()
                lr = optimizer.step(epoch)
                total_loss += loss.item() * len(batch)
            test_acc = accuracy(test_labels, predict(model, test_videos, run.seed))

        row = TrainRow(
            epoch=epoch,
            lr=lr,
            train_loss=total_loss / len(order),
            test_accuracy=test_acc,
            wall_ns=time.perf_counter_ns() - started,
            **counters.as_dict(),
        )
        result.rows.append(row)
        logger.info(
            "epoch %d/%d lr=%.5f loss=%.4f test_acc=%.3f", epoch + 1, run.epochs, lr, row.train_loss, test_acc
        )
    return result


def evaluate(
    model: PvNeXt,
    videos: Sequence[PointCloudVideo],
    num_classes: int,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """(accuracy, confusion matrix) of `model` on labeled videos."""
    labels = np.array([video.label for video in videos], dtype=np.int64)
    predictions = predict(model, videos, seed)
    return accuracy(labels, predictions), confusion_matrix(labels, predictions, num_classes)
