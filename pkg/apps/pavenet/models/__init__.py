from apps.pavenet.models.config import VARIANTS, ModelConfig, apply_variant
from apps.pavenet.models.e2e import PaveNet, PaveNetOutput, PoseRunner, build_model
from apps.pavenet.models.structures import PosePrediction, PoseTarget
from apps.pavenet.models.two_stage import TwoStageReference


__all__ = [
    "VARIANTS",
    "ModelConfig",
    "apply_variant",
    "PaveNet",
    "PaveNetOutput",
    "PoseRunner",
    "build_model",
    "PosePrediction",
    "PoseTarget",
    "TwoStageReference",
]
