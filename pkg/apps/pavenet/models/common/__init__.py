from apps.pavenet.models.common.deform_attn import (
    MultiScaleDeformableAttention,
    bilinear_sample,
    multi_scale_deformable_attn,
)
from apps.pavenet.models.common.embeddings import TokenEmbedding, add_embeddings
from apps.pavenet.models.common.transformer import FFN, MLP, MultiHeadSelfAttention
