"""Wall-clock scaling of the end-to-end model against the crop-based
two-stage reference."""
from __future__ import annotations

import logging
import time
from collections.abc import Callable

import numpy as np
import pandas as pd
import torch

from apps.pavenet.app.schemas.results import BenchRow
from apps.pavenet.app.schemas.run_config import RunConfig
from apps.pavenet.data.synth import ClipSample, generate_clip
from apps.pavenet.models.e2e import PaveNet, build_model
from apps.pavenet.models.two_stage import TwoStageReference


logger = logging.getLogger(name=__name__)

BENCH_COLUMNS = ["pipeline", "persons", "reps", "median_ms", "iqr_ms"]


def time_call(fn: Callable[[], object], reps: int, warmup: int = 3) -> np.ndarray:
    """Milliseconds of ``reps`` calls after ``warmup`` untimed ones."""
    for _ in range(warmup):
        fn()

    timings = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        timings.append((time.perf_counter() - start) * 1000.0)

    return np.asarray(timings)


def person_boxes(clip: ClipSample) -> torch.Tensor:
    """Keyframe ground-truth boxes (x0, y0, x1, y1) in pixels."""
    pixels = clip.pixel_joints()[clip.keyframe]
    return torch.from_numpy(np.concatenate([pixels.min(1), pixels.max(1)], axis=-1))


def _row(pipeline: str, persons: int, timings: np.ndarray) -> dict:
    q1, q3 = np.percentile(timings, [25, 75])
    return BenchRow(
        pipeline=pipeline,
        persons=persons,
        reps=len(timings),
        median_ms=float(np.median(timings)),
        iqr_ms=float(q3 - q1),
    ).dict()


def run_bench(
    config: RunConfig,
    persons: list[int],
    reps: int = 20,
    warmup: int = 3,
    model: PaveNet | None = None,
) -> pd.DataFrame:
    """Times both pipelines for every person count.

    Args:
        config (RunConfig): configuration of the end-to-end model.
        persons (list[int]): person counts; clips use the hard layout.
        reps (int, optional): timed repetitions per cell. Defaults to 20.
        warmup (int, optional): untimed repetitions. Defaults to 3.
        model (PaveNet | None, optional): trained model, fresh weights when
            None. Defaults to None.

    Returns:
        pd.DataFrame: one row per pipeline and person count, person counts
        ascending.
    """
    model = model if model is not None else build_model(config.model, config.variant)
    model.eval()
    cfg = model.cfg
    two_stage = TwoStageReference(cfg)

    rows = []
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        with torch.no_grad():
            for n in sorted(set(persons)):
                clip = generate_clip(config.seed, n, "hard", span=cfg.span, image_size=cfg.image_size)
                frames = clip.frames_tensor()
                boxes = person_boxes(clip)

                rows.append(_row("pave", n, time_call(lambda: model(frames[None]), reps, warmup)))
                rows.append(
                    _row("two-stage", n, time_call(lambda: two_stage(frames, boxes), reps, warmup))
                )
                logger.info(
                    f"{n} persons: pave {rows[-2]['median_ms']:.2f} ms, two-stage {rows[-1]['median_ms']:.2f} ms"
                )
    finally:
        torch.set_num_threads(threads)

    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
