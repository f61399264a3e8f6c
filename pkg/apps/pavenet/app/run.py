from __future__ import annotations

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import click

from apps.pavenet.core.errors import PaveNetError
from apps.pavenet.evaluation.metrics import evaluate
from apps.pavenet.evaluation.posetrack import parse_posetrack_json
from apps.pavenet.evaluation.report import write_report
from apps.pavenet.lib.ablate import GRIDS, AblationCell, run_ablation
from apps.pavenet.lib.bench import run_bench
from apps.pavenet.lib.evaluator import Evaluator, validation_dataset
from apps.pavenet.lib.trainer import Trainer, load_run
from apps.pavenet.lib.utils import configure_torch, load_run_config
from apps.pavenet.models.config import VARIANTS


@contextmanager
def reported_errors() -> Iterator[None]:
    try:
        yield
    except PaveNetError as e:
        raise click.ClickException(str(e)) from e


def parse_ints(ctx, param, value: str) -> list[int]:
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise click.BadParameter(f"should be comma separated integers, but got {value!r}")


@click.group()
@click.option("--log-level", default="INFO", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]))
@click.option("--threads", default=None, type=int, help="Torch threads, PAVENET_NUM_THREADS otherwise.")
def cli(log_level: str, threads: int | None) -> None:
    logging.basicConfig(level=log_level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    configure_torch(threads)


@cli.command()
@click.option("-c", "--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", default="runs/pave", type=click.Path(file_okay=False))
@click.option("--seed", default=None, type=int)
@click.option("--variant", default=None, type=str)
@click.option("--steps", default=None, type=int)
@click.option("--resume", is_flag=True, help="Continue from the state saved in --out.")
@click.option("--set", "overrides", multiple=True, help="key=value override, repeatable.")
@click.option("--progress/--no-progress", default=True)
def train(config_path, out, seed, variant, steps, resume, overrides, progress) -> None:
    """Trains a variant on synthetic clips."""
    with reported_errors():
        config = load_run_config(config_path, overrides, seed=seed, variant=variant, steps=steps)
        result = Trainer(config, out, progress=progress).train(resume=resume)

    click.echo(f"checkpoint: {Path(out) / 'model.pave'}")
    if result.val_map is not None:
        click.echo(f"val mAP: {result.val_map:.4f}")


@cli.command("eval")
@click.option("--checkpoint", default=None, type=click.Path(exists=True, file_okay=False), help="Run directory.")
@click.option("--annotations", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--predictions", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", default=None, type=click.Path(file_okay=False))
@click.option("--split", default="val", type=click.Choice(["train", "val", "test"]))
@click.option("--overlays/--no-overlays", default=None)
@click.option("--threshold", default=None, type=float)
@click.option("--radius-fraction", default=None, type=float)
def evaluate_cmd(checkpoint, annotations, predictions, out, split, overlays, threshold, radius_fraction) -> None:
    """Scores a checkpoint on a synthetic split, or a prediction file
    against an annotation file."""
    if annotations is not None or predictions is not None:
        if annotations is None or predictions is None:
            raise click.UsageError("--annotations and --predictions go together")
        with reported_errors():
            gt, pred = parse_posetrack_json(annotations), parse_posetrack_json(predictions)
        if threshold is not None:
            pred = pred.above(threshold)
        report = evaluate(gt, pred, radius_fraction=radius_fraction or 0.1)
        out = Path(out or Path(predictions).parent)
        write_report(report, out / "report.csv")
    elif checkpoint is not None:
        with reported_errors():
            config, model = load_run(checkpoint)
        updates = dict(overlays=overlays, threshold=threshold, radius_fraction=radius_fraction)
        cfg = config.eval.copy(update={k: v for k, v in updates.items() if v is not None})
        out = Path(out or Path(checkpoint) / f"eval-{split}")
        report = Evaluator(model, cfg, batch_size=config.batch_size).run(
            validation_dataset(config, split), out_dir=out, progress=True
        )
    else:
        raise click.UsageError("give --checkpoint or --annotations with --predictions")

    click.echo(report.to_frame().to_string(index=False))
    click.echo(f"report: {out / 'report.csv'}")


@cli.command()
@click.option("--checkpoint", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("-c", "--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--persons", default="1,5,10,20", callback=parse_ints)
@click.option("--reps", default=20, type=click.IntRange(min=1))
@click.option("--warmup", default=3, type=click.IntRange(min=0))
@click.option("-o", "--out", default="runs/bench.csv", type=click.Path(dir_okay=False))
def bench(checkpoint, config_path, persons, reps, warmup, out) -> None:
    """Inference time against the number of persons."""
    with reported_errors():
        if checkpoint is not None:
            config, model = load_run(checkpoint)
        else:
            config, model = load_run_config(config_path), None
        frame = run_bench(config, persons, reps=reps, warmup=warmup, model=model)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    click.echo(frame.to_string(index=False))


@cli.command()
@click.option("--grid", default=None, type=click.Choice(sorted(GRIDS)))
@click.option("--variant", "variants", multiple=True, help="Variant to compare, repeatable.")
@click.option("-c", "--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--seeds", default="0,1,2", callback=parse_ints)
@click.option("--steps", default=None, type=int)
@click.option("--set", "overrides", multiple=True, help="key=value override, repeatable.")
@click.option("-o", "--out", default="runs/ablate", type=click.Path(file_okay=False))
def ablate(grid, variants, config_path, seeds, steps, overrides, out) -> None:
    """Trains and scores every cell of an ablation grid."""
    if (grid is None) == (not variants):
        raise click.UsageError("give either --grid or --variant")

    unknown = sorted(set(variants) - set(VARIANTS))
    if unknown:
        raise click.BadParameter(f"unknown variants {unknown}, choose from {sorted(VARIANTS)}")

    with reported_errors():
        base = load_run_config(config_path, overrides)
    cells = GRIDS[grid] if grid else [AblationCell(v, v) for v in variants]
    frame = run_ablation(base, grid or "custom", cells, seeds, out, steps=steps)

    Path(out).mkdir(parents=True, exist_ok=True)
    frame.to_csv(Path(out) / "ablate.csv", index=False)
    click.echo(frame.to_string(index=False))


if __name__ == "__main__":
    cli()
