from fastapi import APIRouter, HTTPException, Query, status

from ..errors import PvnextError
from ..models.config import PRESETS, build_preset
from ..network import count_params_and_flops
from ..schemas import accounting_serializer, preset_serializer
from . import http_error

router = APIRouter()


@router.get("")
async def list_presets():
    return {"presets": sorted(PRESETS)}


@router.get("/{name}")
async def show_preset(name: str, num_classes: int | None = Query(default=None, gt=0)):
    if name not in PRESETS:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"Unknown preset {name!r}.")
    return preset_serializer(name, build_preset(name, num_classes))


@router.get("/{name}/accounting")
def preset_accounting(
    name: str,
    points: int = Query(default=2048, gt=0),
    frames: int = Query(default=16, gt=0),
    num_classes: int | None = Query(default=None, gt=0),
):
    """
    Analytic parameter and compute counts of a preset.
    Args:
        name (str): Preset name (msr, micro or ntu).
        points (int): Points per frame.
        frames (int): Frames per video.
        num_classes (int, optional): Classifier width, preset default when omitted.
    Returns:
        dict: params, macs (one per multiply-add), flops (two per multiply-add),
        query_flops, peak_bytes and the per-stage multiply-adds.
    """
    if name not in PRESETS:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"Unknown preset {name!r}.")
    try:
        report = count_params_and_flops(build_preset(name, num_classes), points, frames)
    except PvnextError as exc:
        raise http_error(exc) from exc
    return accounting_serializer(name, report)
