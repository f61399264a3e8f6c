from apps.pavenet.models.utils.weights_init import (
    bias_init_with_prob,
    constant_init,
    kaiming_init,
    ring_offsets,
    trunc_normal_,
    xavier_init,
)
