from .adamw import AdamW
from .checkpoint import load_checkpoint, save_checkpoint
from .encoder import (
    PRESETS,
    EncoderParams,
    MaskedBatch,
    SizePreset,
    forward_hidden,
    forward_mlm,
    init_encoder,
    loss_and_grad,
    mlm_backward,
    mlm_forward,
    mlm_losses,
    pad_batch,
    param_count,
    zeros_like_params,
)
from .gradcheck import grad_check
from .vocab import (
    MASK_ID,
    MASK_TOKEN,
    N_RESERVED,
    PAD_ID,
    PAD_TOKEN,
    UNK_ID,
    UNK_TOKEN,
    Vocab,
    build_vocab,
    load_vocab,
    save_vocab,
    tokenize,
)

__all__ = [
    "AdamW",
    "EncoderParams",
    "MaskedBatch",
    "MASK_ID",
    "MASK_TOKEN",
    "N_RESERVED",
    "PAD_ID",
    "PAD_TOKEN",
    "PRESETS",
    "SizePreset",
    "UNK_ID",
    "UNK_TOKEN",
    "Vocab",
    "build_vocab",
    "forward_hidden",
    "forward_mlm",
    "grad_check",
    "init_encoder",
    "load_checkpoint",
    "load_vocab",
    "loss_and_grad",
    "mlm_backward",
    "mlm_forward",
    "mlm_losses",
    "pad_batch",
    "param_count",
    "save_checkpoint",
    "save_vocab",
    "tokenize",
    "zeros_like_params",
]
