from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from ..errors import ConfigError

MOTION_CLASSES = ("static", "translate_x", "translate_y", "rotate_z", "oscillate_scale", "zigzag")


class StageConfig(BaseModel):
    mlps: list[list[int]]
    nsamples: int = Field(gt=0)
    spatial_stride: int = Field(gt=0)
    radius: float = Field(gt=0)
    relu_after: bool = True

    @field_validator("mlps")
    @classmethod
    def check_mlps(cls, mlps: list[list[int]]) -> list[list[int]]:
        if not 1 <= len(mlps) <= 2:
            raise ValueError(f"a stage takes one or two width lists, got {len(mlps)}")
        if any(not widths or any(w <= 0 for w in widths) for widths in mlps):
            raise ValueError(f"MLP widths must be non-empty and positive, got {mlps}")
        if len(mlps) == 2 and mlps[1][0] != mlps[0][-1]:
            raise ValueError(f"second MLP must start at the pooled width {mlps[0][-1]}, got {mlps[1]}")
        return mlps

    @property
    def out_channels(self) -> int:
        return self.mlps[-1][-1]

    def out_points(self, m_in: int) -> int:
        return max(1, m_in // self.spatial_stride)

    def encoder_widths(self, in_channels: int) -> list[int]:
        """Widths of the per-member MLP: relative xyz plus carried features in."""
        return [3 + in_channels, *self.mlps[0]]

    def refine_widths(self) -> Optional[list[int]]:
        return list(self.mlps[1]) if len(self.mlps) == 2 and len(self.mlps[1]) > 1 else None


class ModelConfig(BaseModel):
    stages: list[StageConfig] = Field(min_length=1)
    num_classes: int = Field(gt=0)
    imitator_k: int = Field(default=3, gt=0)
    imitator_enabled: bool = True
    motion_sign: Literal[1, -1] = 1
    head_hidden: list[int] = Field(default_factory=lambda: [256])
    query_order: Literal["index", "distance"] = "index"

    @field_validator("head_hidden")
    @classmethod
    def check_head(cls, widths: list[int]) -> list[int]:
        if any(w <= 0 for w in widths):
            raise ValueError(f"head widths must be positive, got {widths}")
        return widths


class DenseConfig(BaseModel):
    delta_t: int = Field(ge=0)
    k: int = Field(gt=0)
    radius: float = Field(gt=0)
    mlps: list[list[int]]
    spatial_stride: int = Field(gt=0)

    @classmethod
    def from_stage(cls, stage: StageConfig, delta_t: int) -> "DenseConfig":
        return cls(
            delta_t=delta_t,
            k=stage.nsamples,
            radius=stage.radius,
            mlps=stage.mlps,
            spatial_stride=stage.spatial_stride,
        )

    def window(self, t: int, num_frames: int) -> list[int]:
        """Frames t-dt..t+dt clipped to the sequence."""
        return list(range(max(0, t - self.delta_t), min(num_frames - 1, t + self.delta_t) + 1))


class SyntheticSpec(BaseModel):
    classes: list[str] = Field(default_factory=lambda: list(MOTION_CLASSES))
    n_points: int = Field(default=128, gt=0)
    t_frames: int = Field(default=16, gt=0)
    videos_per_class: int = Field(default=40, ge=0)
    noise_sigma: float = Field(default=0.005, ge=0)
    seed: int = 0

    @field_validator("classes")
    @classmethod
    def check_classes(cls, classes: list[str]) -> list[str]:
        unknown = [c for c in classes if c not in MOTION_CLASSES]
        if unknown or not classes:
            raise ValueError(f"unknown motion classes {unknown}; choose from {MOTION_CLASSES}")
        if len(set(classes)) != len(classes):
            raise ValueError(f"duplicate motion classes in {classes}")
        return classes


class RunConfig(BaseModel):
    preset: Literal["msr", "micro", "ntu"] = "micro"
    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=8, gt=0)
    seed: int = 0
    imitator_enabled: bool = True
    motion_sign: Literal[1, -1] = 1
    imitator_k: int = Field(default=3, gt=0)
    base_lr: float = Field(default=0.05, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    frames: Optional[int] = Field(default=None, gt=0)
    frame_step: int = Field(default=1, gt=0)

    @model_validator(mode="after")
    def check_frames(self) -> "RunConfig":
        if self.frame_step > 1 and self.frames is None:
            raise ValueError("--frame-step needs --frames")
        return self


def _stage(mlps, nsamples, stride, radius) -> StageConfig:
    return StageConfig(mlps=mlps, nsamples=nsamples, spatial_stride=stride, radius=radius)


def msr_preset(num_classes: int = 20, **overrides) -> ModelConfig:
    return ModelConfig(
        stages=[
            _stage([[64]], 48, 32, 0.2),
            _stage([[128], [128, 256]], 32, 8, 0.4),
            _stage([[512], [512, 1024]], 8, 2, 0.4),
        ],
        num_classes=num_classes,
        **overrides,
    )


def ntu_preset(num_classes: int = 60, **overrides) -> ModelConfig:
    return ModelConfig(
        stages=[
            _stage([[64]], 32, 8, 0.1),
            _stage([[128], [128, 256]], 48, 8, 0.2),
            _stage([[128], [128, 256]], 16, 1, 0.4),
            _stage([[128], [128, 256]], 24, 1, 0.4),
            _stage([[512], [512, 1024]], 32, 4, 0.8),
        ],
        num_classes=num_classes,
        **overrides,
    )


def micro_preset(num_classes: int = 6, **overrides) -> ModelConfig:
    return ModelConfig(stages=[_stage([[16], [16, 32]], 8, 4, 0.3)], num_classes=num_classes, **overrides)


PRESETS = {"msr": msr_preset, "micro": micro_preset, "ntu": ntu_preset}


def build_preset(name: str, num_classes: Optional[int] = None, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    factory = PRESETS[name]
    return factory(**overrides) if num_classes is None else factory(num_classes, **overrides)
