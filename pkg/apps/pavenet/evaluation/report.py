from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, validator


logger = logging.getLogger(name=__name__)


class KeypointCurve(BaseModel):
    precision: list[float]
    recall: list[float]


class EvalReport(BaseModel):
    """Per-keypoint AP (in keypoint order), mAP, the grouped row, the
    precision-recall curves and pose match counts."""

    keypoint_ap: dict[str, float]
    mean_ap: float
    group_ap: dict[str, float] = {}
    curves: dict[str, KeypointCurve] = {}
    matched: int = 0
    missed: int = 0
    false_positives: int = 0
    radius_fraction: float = 0.1

    @validator("keypoint_ap", "group_ap")
    def check_range(cls, value: dict[str, float]) -> dict[str, float]:
        for name, ap in value.items():
            if not 0.0 <= ap <= 1.0:
                raise ValueError(f"AP of {name} should be in [0, 1], but got {ap}")
        return value

    def to_frame(self) -> pd.DataFrame:
        rows = [dict(keypoint=name, ap=ap) for name, ap in self.keypoint_ap.items()]
        rows.append(dict(keypoint="mAP", ap=self.mean_ap))

        return pd.DataFrame(rows, columns=["keypoint", "ap"])


def write_report(report: EvalReport, path: str | Path) -> None:
    """Writes ``keypoint,ap`` rows plus an ``mAP`` row as CSV, and the full
    report as JSON next to it (same stem, ``.json``)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.to_frame().to_csv(path, index=False, float_format="%.12g")
    path.with_suffix(".json").write_text(report.json(indent=2), encoding="utf-8")

    logger.info(f"report written to {path}")


def read_report(path: str | Path) -> EvalReport:
    return EvalReport.parse_file(Path(path).with_suffix(".json"))
