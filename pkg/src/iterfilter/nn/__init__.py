from .tensor import Tensor
from .layers import (EdgeConvParams, MLPParams, decoder_forward, edgeconv_forward,
                     edgeconv_forward_reference, init_edgeconv, init_mlp, mlp_forward)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Tensor", "EdgeConvParams", "MLPParams", "decoder_forward", "edgeconv_forward",
    "edgeconv_forward_reference", "init_edgeconv", "init_mlp", "mlp_forward",
    "Adam", "AdamState", "adam_step",
]
