from apps.pavenet.lib.ablate import GRIDS, AblationCell, run_ablation
from apps.pavenet.lib.bench import run_bench
from apps.pavenet.lib.evaluator import Evaluator, oracle_predictions, validation_dataset
from apps.pavenet.lib.trainer import Trainer, TrainResult, load_run
from apps.pavenet.lib.utils import configure_torch, load_run_config


__all__ = [
    "AblationCell",
    "Evaluator",
    "GRIDS",
    "TrainResult",
    "Trainer",
    "configure_torch",
    "load_run",
    "load_run_config",
    "oracle_predictions",
    "run_ablation",
    "run_bench",
    "validation_dataset",
]
