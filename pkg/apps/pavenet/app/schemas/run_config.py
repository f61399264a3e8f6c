from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, validator

from apps.pavenet.models.config import VARIANTS, ModelConfig, apply_variant


class DataConfig(BaseModel):
    difficulty: Literal["easy", "hard"] = "easy"
    persons: tuple[int, int] = Field((1, 4), description="Inclusive person count range per clip.")
    train_clips: int = Field(512, gt=0)
    val_clips: int = Field(64, gt=0)
    corruption: Optional[Literal["blur", "occluder"]] = None
    severity: float = Field(0.0, ge=0.0, le=1.0)
    augment: bool = True

    class Config:
        extra = "forbid"

    @validator("persons")
    def check_persons(cls, value: tuple[int, int]) -> tuple[int, int]:
        if not 1 <= value[0] <= value[1]:
            raise ValueError(f"persons should be a range 1 <= low <= high, but got {value}")
        return value


class OptimConfig(BaseModel):
    lr: float = Field(2e-4, gt=0)
    backbone_lr_ratio: float = Field(0.1, gt=0)
    weight_decay: float = Field(1e-4, ge=0)
    clip_grad: float = Field(0.1, gt=0)
    milestones: tuple[float, float] = (2 / 3, 5 / 6)
    gamma: float = Field(0.1, gt=0)
    val_every: int = Field(500, ge=0, description="Validation and checkpoint period, 0 for the end only.")

    class Config:
        extra = "forbid"


class LossConfig(BaseModel):
    cls_weight: float = Field(0.5, ge=0)
    rle_weight: float = Field(1.0, ge=0)

    class Config:
        extra = "forbid"


class EvalConfig(BaseModel):
    radius_fraction: float = Field(0.1, gt=0)
    threshold: float = Field(0.3, ge=0, le=1)
    overlays: bool = False
    max_overlays: int = Field(16, ge=0)

    class Config:
        extra = "forbid"


class RunConfig(BaseModel):
    """Everything a run depends on; its YAML echo reproduces the run."""

    variant: str = "pave"
    seed: int = Field(0, ge=0)
    steps: int = Field(3000, gt=0)
    batch_size: int = Field(8, gt=0)
    model: ModelConfig = ModelConfig()
    data: DataConfig = DataConfig()
    optim: OptimConfig = OptimConfig()
    loss: LossConfig = LossConfig()
    eval: EvalConfig = EvalConfig()

    class Config:
        extra = "forbid"

    @validator("variant")
    def check_variant(cls, value: str) -> str:
        if value not in VARIANTS:
            raise ValueError(f"variant should be one of {sorted(VARIANTS)}, but got {value!r}")
        return value

    def resolved(self) -> ModelConfig:
        """Model configuration with the variant overrides applied."""
        return apply_variant(self.model, self.variant)
