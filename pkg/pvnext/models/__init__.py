from .config import (
    MOTION_CLASSES,
    DenseConfig,
    ModelConfig,
    RunConfig,
    StageConfig,
    SyntheticSpec,
    build_preset,
    micro_preset,
    msr_preset,
    ntu_preset,
)
from .metrics import AccountingReport
from .video import AnchorTrack, MotionField, PointCloudVideo, SyntheticTarget, VideoDataset
