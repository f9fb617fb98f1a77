from typing import Literal

from pydantic import BaseModel, Field

from .models.config import ModelConfig
from .models.metrics import AccountingReport


class VideoPayload(BaseModel):
    frames: list[list[list[float]]] = Field(description="T x N x 3 coordinates")
    seed: int = 0


class MotionRequest(VideoPayload):
    m: int = Field(gt=0)
    k: int = Field(default=3, gt=0)
    radius: float = Field(default=0.2, gt=0)
    sign: Literal[1, -1] = 1
    order: Literal["index", "distance"] = "index"


class MotionResponse(BaseModel):
    anchors: list[list[list[float]]]
    motion: list[list[list[float]]]
    fallback_count: int


class ClassifyResponse(BaseModel):
    logits: list[float]
    predicted_class: int


def preset_serializer(name: str, cfg: ModelConfig) -> dict:
    return {
        "name": name,
        "num_classes": cfg.num_classes,
        "stages": len(cfg.stages),
        "config": cfg.model_dump(),
    }


def accounting_serializer(name: str, report: AccountingReport) -> dict:
    return {
        "preset": name,
        "params": report.params,
        "macs": report.macs,
        "flops": report.flops,
        "query_flops": report.query_flops,
        "peak_bytes": report.peak_bytes,
        "points": report.points,
        "frames": report.frames,
        "stage_macs": report.stage_macs,
    }
