"""Ablation grids: every cell is trained and evaluated with shared seeds."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from apps.pavenet.app.schemas.results import AblateRow
from apps.pavenet.app.schemas.run_config import RunConfig
from apps.pavenet.data.synth import generate_clip
from apps.pavenet.lib.bench import time_call
from apps.pavenet.lib.trainer import Trainer
from apps.pavenet.models.config import EncoderConfig, ModelConfig
from apps.pavenet.models.e2e import PaveNet
from apps.pavenet.models.encoders.cost import count_attention_cost


logger = logging.getLogger(name=__name__)

ABLATE_COLUMNS = list(AblateRow.__fields__)


@dataclass(frozen=True)
class AblationCell:
    """One grid entry: a variant plus dotted-key overrides of the model."""

    name: str
    variant: str = "pave"
    overrides: dict = field(default_factory=dict)


GRIDS: dict[str, list[AblationCell]] = {
    # encoder and decoder design
    "table3": [AblationCell("pave"), AblationCell("baseline-ste", "baseline-ste")],
    # joint decoder on/off
    "table4": [AblationCell("pave"), AblationCell("no-stjd", "no-stjd")],
    # pose-aware versus learnable references
    "table5": [AblationCell("pave"), AblationCell("random-refs", "random-refs")],
    "table6": [
        AblationCell(f"layers-{n}", overrides=dict(decoder_layers=n, joint_decoder_layers=n))
        for n in range(1, 6)
    ],
    "table7": [
        AblationCell("image-only", "image-only"),
        AblationCell("T=1", overrides=dict(span=1)),
        AblationCell("T=2", overrides=dict(span=2)),
    ],
}


def encoder_cost(cfg: ModelConfig) -> int:
    """Dense attention cost the encoder pays per keyframe.

    A spatiotemporal encoder attends over the whole window for every
    keyframe; a spatial encoder encodes one new frame and reuses the others.
    """
    dense = EncoderConfig(
        layers=cfg.encoder_layers,
        mode=cfg.encoder_mode,
        attention="dense",
        attn=cfg.attention_config(),
    )
    frames = cfg.num_frames if cfg.encoder_mode == "spatiotemporal" else 1

    return count_attention_cost(dense, frames, cfg.num_tokens)


def parameter_count(module: torch.nn.Module | None) -> int:
    return 0 if module is None else sum(p.numel() for p in module.parameters())


def forward_ms(model: PaveNet, seed: int, reps: int = 5) -> float:
    cfg = model.cfg
    clip = generate_clip(seed, 1, "easy", span=cfg.span, image_size=cfg.image_size)
    frames = clip.frames_tensor()[None]
    model.eval()
    with torch.no_grad():
        timings = time_call(lambda: model(frames), reps, warmup=1)

    return float(np.median(timings))


def cell_config(base: RunConfig, cell: AblationCell, seed: int, steps: int | None) -> RunConfig:
    update = dict(variant=cell.variant, seed=seed, model=base.model.copy(update=cell.overrides).dict())
    if steps is not None:
        update["steps"] = steps

    return RunConfig.parse_obj({**base.dict(), **update})


def run_ablation(
    base: RunConfig,
    grid: str,
    cells: list[AblationCell],
    seeds: list[int],
    out_dir: str | Path,
    steps: int | None = None,
) -> pd.DataFrame:
    """Trains and evaluates every cell for every seed.

    Args:
        base (RunConfig): shared configuration.
        grid (str): grid label written to every row.
        cells (list[AblationCell]): grid entries.
        seeds (list[int]): seeds shared by all cells.
        out_dir (str | Path): one run directory per cell and seed goes here.
        steps (int | None, optional): training steps override.
            Defaults to None.

    Returns:
        pd.DataFrame: one row per cell and seed.
    """
    out_dir = Path(out_dir)
    rows = []
    for cell in cells:
        for seed in seeds:
            config = cell_config(base, cell, seed, steps)
            result = Trainer(config, out_dir / f"{cell.name}-seed{seed}").train()
            model, cfg = result.model, result.model.cfg
            rows.append(
                AblateRow(
                    grid=grid,
                    variant=cell.name,
                    seed=seed,
                    T=cfg.span,
                    decoder_layers=cfg.decoder_layers,
                    map=result.val_map if result.val_map is not None else 0.0,
                    forward_ms=forward_ms(model, seed),
                    encoder_cost=encoder_cost(cfg),
                    stpd_params=parameter_count(model.pose_decoder),
                    stjd_params=parameter_count(model.joint_decoder),
                ).dict()
            )
            logger.info(f"{grid}/{cell.name} seed {seed}: mAP {rows[-1]['map']:.4f}")

    return pd.DataFrame(rows, columns=ABLATE_COLUMNS)
