"""Seed-reproducible, resumable training on synthetic clips."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch
import torch.nn as nn
from tqdm.auto import tqdm

from apps.pavenet.app.schemas.run_config import RunConfig
from apps.pavenet.core.checkpoint import load_checkpoint, save_checkpoint
from apps.pavenet.core.tensor import backward
from apps.pavenet.datasets.manifest import build_records
from apps.pavenet.datasets.synthetic import SyntheticPoseDataset, collate_clips
from apps.pavenet.lib.evaluator import Evaluator, validation_dataset
from apps.pavenet.lib.utils import dump_run_config, load_run_config, seed_everything
from apps.pavenet.models.e2e import PaveNet, build_model
from apps.pavenet.models.losses.set_loss import total_loss


logger = logging.getLogger(name=__name__)

CHECKPOINT_NAME = "model.pave"
STATE_NAME = "train_state.pt"
METRICS_NAME = "metrics.csv"
CONFIG_NAME = "config.yaml"


@dataclass
class TrainResult:
    model: PaveNet
    metrics: pd.DataFrame
    val_map: float | None
    out_dir: Path


def build_optimizer(
    model: nn.Module, config: RunConfig, steps: int
) -> tuple[torch.optim.Optimizer, torch.optim.lr_scheduler.MultiStepLR]:
    """AdamW with a reduced backbone rate and step decay at the configured
    fractions of ``steps``."""
    optim = config.optim
    backbone, rest = [], []
    for name, param in model.named_parameters():
        (backbone if name.startswith("backbone.") else rest).append(param)

    optimizer = torch.optim.AdamW(
        [
            dict(params=rest, lr=optim.lr),
            dict(params=backbone, lr=optim.lr * optim.backbone_lr_ratio),
        ],
        lr=optim.lr,
        weight_decay=optim.weight_decay,
    )
    milestones = sorted({max(1, int(round(steps * m))) for m in optim.milestones})
    scheduler = torch.optim.lr_scheduler.MultiStepLR(
        optimizer, milestones=milestones, gamma=optim.gamma
    )

    return optimizer, scheduler


def batch_indices(seed: int, step: int, size: int, batch_size: int) -> list[int]:
    rng = np.random.default_rng([seed, step])
    return rng.choice(size, size=batch_size, replace=batch_size > size).tolist()


class Trainer:
    """Trains the configured variant.

    Args:
        config (RunConfig): run configuration.
        out_dir (str | Path): output directory for ``model.pave``,
            ``train_state.pt``, ``metrics.csv``, ``config.yaml`` and the
            validation report.
        progress (bool, optional): show a progress bar. Defaults to False.
    """

    def __init__(self, config: RunConfig, out_dir: str | Path, progress: bool = False) -> None:
        self.config = config
        self.out_dir = Path(out_dir)
        self.progress = progress

    def train_dataset(self) -> SyntheticPoseDataset:
        config, data = self.config, self.config.data
        records = build_records(
            "train",
            data.train_clips,
            seed=config.seed,
            difficulty=data.difficulty,
            span=config.resolved().span,
            persons=data.persons,
            corruption=data.corruption,
            severity=data.severity,
            image_size=config.model.image_size,
        )

        return SyntheticPoseDataset(records, augment=data.augment, seed=config.seed)

    def validate(self, model: PaveNet, out_dir: Path | None = None) -> float:
        evaluator = Evaluator(model, self.config.eval, batch_size=self.config.batch_size)
        report = evaluator.run(validation_dataset(self.config), out_dir=out_dir)
        model.train()

        return report.mean_ap

    def save(self, model: PaveNet, optimizer, scheduler, step: int, rows: list[dict]) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, self.out_dir / CHECKPOINT_NAME)
        torch.save(
            dict(
                step=step,
                optimizer=optimizer.state_dict(),
                scheduler=scheduler.state_dict(),
                rng=torch.get_rng_state(),
                rows=rows,
            ),
            self.out_dir / STATE_NAME,
        )
        pd.DataFrame(rows).to_csv(self.out_dir / METRICS_NAME, index=False)

    def train(self, resume: bool = False) -> TrainResult:
        """Runs ``config.steps`` optimisation steps.

        Each step draws its batch and its augmentation from
        ``(seed, step, item)``, so a resumed run continues exactly where the
        saved one stopped.

        Args:
            resume (bool, optional): continue from ``train_state.pt`` in the
                output directory. Defaults to False.
        """
        config = self.config
        seed_everything(config.seed)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        dump_run_config(config, self.out_dir / CONFIG_NAME)

        model = build_model(config.model, config.variant)
        optimizer, scheduler = build_optimizer(model, config, config.steps)
        start, rows = 0, []
        if resume:
            load_checkpoint(model, self.out_dir / CHECKPOINT_NAME)
            state = torch.load(self.out_dir / STATE_NAME, weights_only=False)
            optimizer.load_state_dict(state["optimizer"])
            scheduler.load_state_dict(state["scheduler"])
            torch.set_rng_state(state["rng"])
            start, rows = state["step"], state["rows"]
            logger.info(f"resuming from step {start}")

        dataset = self.train_dataset()
        model.train()
        val_map = None
        loss_cfg, period = config.loss, config.optim.val_every

        for step in tqdm(range(start, config.steps), desc="train", disable=not self.progress):
            dataset.set_step(step)
            indices = batch_indices(config.seed, step, len(dataset), config.batch_size)
            frames, targets, _ = collate_clips([dataset[i] for i in indices])

            output = model(frames)
            losses = total_loss(
                output.stages, targets, loss_cfg.cls_weight, loss_cfg.rle_weight
            )
            optimizer.zero_grad()
            backward(losses.total)
            nn.utils.clip_grad_norm_(model.parameters(), config.optim.clip_grad)
            optimizer.step()
            scheduler.step()

            row = dict(step=step, lr=optimizer.param_groups[0]["lr"], **losses.as_row())
            last = step + 1 == config.steps
            if last or (period and (step + 1) % period == 0):
                val_map = self.validate(model, self.out_dir / "val" if last else None)
                row["val_map"] = val_map
                logger.info(f"step {step + 1}: loss {row['total']:.4f}, val mAP {val_map:.4f}")
                rows.append(row)
                self.save(model, optimizer, scheduler, step + 1, rows)
                continue

            logger.debug(f"step {step + 1}: loss {row['total']:.6f}")
            rows.append(row)

        if start >= config.steps:
            logger.warning(f"nothing to do: run already has {start} steps")

        return TrainResult(
            model=model,
            metrics=pd.DataFrame(rows),
            val_map=val_map,
            out_dir=self.out_dir,
        )


def load_run(out_dir: str | Path) -> tuple[RunConfig, PaveNet]:
    """Configuration echo and trained model of a run directory.

    Raises:
        CheckpointError: if the parameter file does not fit the configured
            model.
    """
    out_dir = Path(out_dir)
    config = load_run_config(out_dir / CONFIG_NAME)
    model = build_model(config.model, config.variant)
    load_checkpoint(model, out_dir / CHECKPOINT_NAME)
    model.eval()

    return config, model
