import numpy as np
from fastapi import APIRouter, HTTPException, status
from pydantic import ValidationError

from ..errors import PvnextError
from ..imitator import imitate
from ..models.video import PointCloudVideo
from ..schemas import MotionRequest, MotionResponse
from . import http_error

router = APIRouter()


def video_from_frames(frames) -> PointCloudVideo:
    try:
        return PointCloudVideo(frames=np.asarray(frames, dtype=np.float64))
    except (ValidationError, ValueError) as exc:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(exc)) from exc


@router.post("/motion", response_model=MotionResponse)
def estimate_motion(request: MotionRequest):
    """
    Runs the motion imitator on one video.
    Returns anchor coordinates and motion vectors, both M x T x 3, plus the
    number of (anchor, frame) pairs whose cross-frame ball was empty.
    """
    video = video_from_frames(request.frames)
    try:
        anchors, motion = imitate(
            video, request.m, request.k, request.radius, request.seed, request.sign, request.order
        )
    except PvnextError as exc:
        raise http_error(exc) from exc
    return MotionResponse(
        anchors=anchors.anchor_coords.tolist(),
        motion=motion.vectors.tolist(),
        fallback_count=int(motion.fallback.sum()) if motion.fallback is not None else 0,
    )
