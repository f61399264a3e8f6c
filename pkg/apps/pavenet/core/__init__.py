from apps.pavenet.core.checkpoint import (
    FORMAT_VERSION,
    load_checkpoint,
    load_state_dict,
    save_checkpoint,
    save_state_dict,
)
from apps.pavenet.core.errors import (
    AnnotationParseError,
    AnnotationSchemaError,
    CheckpointError,
    ConfigError,
    DimensionError,
    LayoutCapacityError,
    MatchingError,
    PaveNetError,
)
from apps.pavenet.core.tensor import (
    assert_finite,
    backward,
    finite_difference_check,
    layer_norm,
    matmul,
    softmax,
)
