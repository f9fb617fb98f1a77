import numpy as np
from fastapi import APIRouter, Depends, HTTPException, status

from ..errors import PvnextError
from ..network import classify
from ..nn import no_grad
from ..schemas import ClassifyResponse, VideoPayload
from ..store import get_model
from . import http_error
from .imitator import video_from_frames

router = APIRouter()


@router.post("/classify", response_model=ClassifyResponse)
def classify_video(payload: VideoPayload, model=Depends(get_model)):
    if model is None:
        raise HTTPException(status_code=status.HTTP_503_SERVICE_UNAVAILABLE, detail="No checkpoint configured.")
    video = video_from_frames(payload.frames)
    try:
        with no_grad():
            logits = classify(video, model, payload.seed).data
    except PvnextError as exc:
        raise http_error(exc) from exc
    return ClassifyResponse(logits=logits.tolist(), predicted_class=int(np.argmax(logits)))
