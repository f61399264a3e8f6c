from apps.pavenet.app.schemas.results import AblateRow, BenchRow
from apps.pavenet.app.schemas.run_config import (
    DataConfig,
    EvalConfig,
    LossConfig,
    OptimConfig,
    RunConfig,
)


__all__ = [
    "AblateRow",
    "BenchRow",
    "DataConfig",
    "EvalConfig",
    "LossConfig",
    "OptimConfig",
    "RunConfig",
]
