from .params import ModelConfig, init_params, expected_shapes, zero_grads
from .adam import AdamState, adam_step
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "ModelConfig",
    "init_params",
    "expected_shapes",
    "zero_grads",
    "AdamState",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
]
