from apps.pavenet.models.encoders.cost import count_attention_cost
from apps.pavenet.models.encoders.encoder import (
    EncoderLayer,
    SpatialEncoder,
    SpatiotemporalEncoder,
)
