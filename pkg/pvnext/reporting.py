"""Versioned CSV rows. Every file starts with a header whose first column is `schema`."""
import csv
import logging
from pathlib import Path
from typing import ClassVar, Iterable, Union

from pydantic import BaseModel

logger = logging.getLogger(__name__)


class CsvRow(BaseModel):
    SCHEMA: ClassVar[str] = ""

    @classmethod
    def header(cls) -> list[str]:
        return ["schema", *cls.model_fields]

    def as_row(self) -> dict:
        return {"schema": self.SCHEMA, **self.model_dump()}


class TrainRow(CsvRow):
    SCHEMA: ClassVar[str] = "train.v1"

    epoch: int
    lr: float
    train_loss: float
    test_accuracy: float
    ball_queries: int
    member_embeddings: int
    macs: int
    wall_ns: int


class ConfusionRow(CsvRow):
    SCHEMA: ClassVar[str] = "confusion.v1"

    true_class: int
    predicted_class: int
    count: int


class EvalRow(CsvRow):
    SCHEMA: ClassVar[str] = "eval.v1"

    mode: str
    occlude_ratio: float
    accuracy: float
    num_videos: int


class ChamferRow(CsvRow):
    SCHEMA: ClassVar[str] = "chamfer.v2"

    video: str
    frame: str
    imitator_chamfer: float
    baseline_chamfer: float
    # imitator / baseline; NaN when `note` says the ratio is meaningless
    ratio: float
    note: str = ""


class BenchRow(CsvRow):
    SCHEMA: ClassVar[str] = "bench.v1"

    run_id: str
    pipeline: str
    delta_t: int
    preset: str
    points: int
    frames: int
    batch_size: int
    threads: int
    warmup: int
    iterations: int
    median_ns: int
    ball_queries: int
    member_embeddings: int
    macs: int
    flops: int
    peak_bytes: int
    checksum: str


def write_csv(path: Union[str, Path], row_type: type[CsvRow], rows: Iterable[CsvRow]) -> int:
    """Write header plus rows; returns the number of data rows."""
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=row_type.header(), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_row())
            count += 1
    logger.debug("wrote %d %s rows to %s", count, row_type.SCHEMA, path)
    return count


def read_csv(path: Union[str, Path]) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
