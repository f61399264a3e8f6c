"""JSON-lines manifest of synthetic clips.

Only generation arguments are stored; frames are regenerated on demand.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from apps.pavenet.data.synth import FRAME_SIZE, layout_capacity


logger = logging.getLogger(name=__name__)


class ClipRecord(BaseModel):
    clip_id: str
    seed: int
    n_persons: int = Field(..., gt=0)
    difficulty: Literal["easy", "hard"] = "easy"
    span: int = Field(1, ge=0, le=2)
    split: Literal["train", "val", "test"] = "train"
    corruption: Optional[Literal["blur", "occluder"]] = None
    severity: float = Field(0.0, ge=0.0, le=1.0)
    image_size: tuple[int, int] = FRAME_SIZE

    class Config:
        extra = "forbid"


def write_manifest(records: list[ClipRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(record.json() + "\n")

    logger.info(f"wrote {len(records)} clip records to {path}")


def read_manifest(path: str | Path) -> list[ClipRecord]:
    with Path(path).open(encoding="utf-8") as f:
        return [ClipRecord.parse_raw(line) for line in f if line.strip()]


def build_records(
    split: str,
    num_clips: int,
    seed: int = 0,
    difficulty: str = "easy",
    span: int = 1,
    persons: tuple[int, int] = (1, 4),
    corruption: str | None = None,
    severity: float = 0.0,
    image_size: tuple[int, int] = FRAME_SIZE,
) -> list[ClipRecord]:
    """Deterministic records of one split.

    Clip seeds are drawn from ``(seed, split)`` so the splits never share a
    clip; person counts are uniform in ``persons`` (inclusive), capped by the
    layout capacity.

    Args:
        split (str): ``"train"``, ``"val"`` or ``"test"``.
        num_clips (int): clips in the split.
        seed (int, optional): base seed. Defaults to 0.
        difficulty (str, optional): ``"easy"`` or ``"hard"``.
            Defaults to "easy".
        span (int, optional): auxiliary frames T per side. Defaults to 1.
        persons (tuple[int, int], optional): person count range.
            Defaults to (1, 4).
        corruption (str | None, optional): keyframe corruption mode.
            Defaults to None.
        severity (float, optional): corruption severity. Defaults to 0.
        image_size (tuple[int, int], optional): frame (H, W).
            Defaults to (64, 96).

    Returns:
        list[ClipRecord]: the records.
    """
    splits = ("train", "val", "test")
    rng = np.random.default_rng([seed, splits.index(split)])
    low, high = persons
    high = min(high, layout_capacity(difficulty))

    records = []
    for i in range(num_clips):
        records.append(
            ClipRecord(
                clip_id=f"{split}-{i:05d}",
                seed=int(rng.integers(0, 2**31 - 1)),
                n_persons=int(rng.integers(low, high + 1)),
                difficulty=difficulty,
                span=span,
                split=split,
                corruption=corruption,
                severity=severity if corruption else 0.0,
                image_size=image_size,
            )
        )

    return records
