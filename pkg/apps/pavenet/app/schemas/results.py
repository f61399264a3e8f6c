from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class BenchRow(BaseModel):
    pipeline: Literal["pave", "two-stage"]
    persons: int = Field(..., gt=0)
    reps: int = Field(..., gt=0)
    median_ms: float
    iqr_ms: float


class AblateRow(BaseModel):
    grid: str
    variant: str
    seed: int
    T: int
    decoder_layers: int
    map: float
    forward_ms: float
    encoder_cost: int
    stpd_params: int
    stjd_params: int
