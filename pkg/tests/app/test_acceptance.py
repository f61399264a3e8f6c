"""Minutes- to hours-scale checks; set PAVENET_RUN_SLOW=1 to run them."""
import pandas as pd
import pytest

from apps.pavenet.app.schemas.run_config import RunConfig
from apps.pavenet.lib.ablate import GRIDS, run_ablation
from apps.pavenet.lib.bench import run_bench
from apps.pavenet.lib.trainer import Trainer


SEEDS = [0, 1, 2]


def corrupted_hard_split() -> RunConfig:
    """Default model on hard clips whose keyframes are motion blurred."""
    return RunConfig.parse_obj(
        dict(
            steps=5000,
            data=dict(difficulty="hard", corruption="blur", severity=0.7),
            optim=dict(val_every=0),
        )
    )


def median_map(frame: pd.DataFrame, variant: str) -> float:
    return float(frame.loc[frame["variant"] == variant, "map"].median())


@pytest.mark.slow
def test_training_reduces_the_loss(tiny_run_config, tmp_path):
    config = tiny_run_config.copy(update=dict(steps=200))
    metrics = Trainer(config, tmp_path / "run").train().metrics

    assert metrics["total"].iloc[-20:].mean() < 0.8 * metrics["total"].iloc[:20].mean()


@pytest.mark.slow
def test_default_model_learns_the_easy_split(tmp_path):
    # D=64, M=20, T=1, two encoder layers, three pose and three joint decoder layers
    config = RunConfig.parse_obj(dict(steps=5000, optim=dict(val_every=500)))
    assert (config.model.embed_dims, config.model.num_queries, config.model.span) == (64, 20, 1)

    metrics = Trainer(config, tmp_path / "run", progress=False).train().metrics

    assert metrics["val_map"].max() >= 0.85


@pytest.mark.slow
@pytest.mark.parametrize(
    "grid, full, ablated, margin",
    [
        ("table4", "pave", "no-stjd", 0.02),
        ("table7", "T=1", "image-only", 0.02),
        ("table5", "pave", "random-refs", 0.05),
    ],
)
def test_ablated_variant_trails_the_full_model(tmp_path, grid, full, ablated, margin):
    cells = [cell for cell in GRIDS[grid] if cell.name in (full, ablated)]
    assert len(cells) == 2

    frame = run_ablation(corrupted_hard_split(), grid, cells, SEEDS, tmp_path)

    assert median_map(frame, full) >= median_map(frame, ablated) + margin


@pytest.mark.slow
def test_forward_time_against_persons():
    frame = run_bench(RunConfig(), [1, 5, 10, 20], reps=20, warmup=3)
    median = frame.set_index(["pipeline", "persons"])["median_ms"]

    pave = median["pave"]
    assert pave.max() < 1.15 * pave.min()
    assert median["two-stage", 10] >= 3 * median["two-stage", 1]
