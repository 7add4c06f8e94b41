"""Model configuration, parameter shapes, and initialization.

Parameters live in a flat name -> float64 array dict so the optimizer,
gradient checker, and checkpoint format all iterate the same namespace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..types import N_CLASSES

ROLE_KEYS = ("v", "a0", "a1")


@dataclass(frozen=True)
class ModelConfig:
    d_tok: int
    d_factor: int
    d_model: int = 128
    n_layers: int = 2
    n_heads: int = 4
    ffn_ratio: int = 4
    n_max: int = 32
    dropout: float = 0.1

    def __post_init__(self):
        for name in ("d_tok", "d_factor", "d_model", "n_layers", "n_heads", "ffn_ratio", "n_max"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_model % self.n_heads:
            raise ConfigError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}"
            )
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout={self.dropout} outside [0, 1)")

    @property
    def d_in(self) -> int:
        return 3 * self.d_tok + self.d_factor

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def d_ffn(self) -> int:
        return self.d_model * self.ffn_ratio


def expected_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "input.w": (cfg.d_in, cfg.d_model),
        "input.b": (cfg.d_model,),
        "pos": (cfg.n_max, cfg.d_model),
    }
    for i in range(cfg.n_layers):
        p = f"layer{i}"
        shapes[f"{p}.ln1.g"] = (cfg.d_model,)
        shapes[f"{p}.ln1.b"] = (cfg.d_model,)
        for name in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{name}"] = (cfg.d_model, cfg.d_model)
        for name in ("bq", "bk", "bv", "bo"):
            shapes[f"{p}.attn.{name}"] = (cfg.d_model,)
        shapes[f"{p}.ln2.g"] = (cfg.d_model,)
        shapes[f"{p}.ln2.b"] = (cfg.d_model,)
        shapes[f"{p}.ffn.w1"] = (cfg.d_model, cfg.d_ffn)
        shapes[f"{p}.ffn.b1"] = (cfg.d_ffn,)
        shapes[f"{p}.ffn.w2"] = (cfg.d_ffn, cfg.d_model)
        shapes[f"{p}.ffn.b2"] = (cfg.d_model,)
    shapes["cls.w"] = (cfg.d_model, N_CLASSES)
    shapes["cls.b"] = (N_CLASSES,)
    for key in ROLE_KEYS:
        shapes[f"role.{key}.w"] = (cfg.d_tok, cfg.d_model)
        shapes[f"role.{key}.b"] = (cfg.d_model,)
    return shapes


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Glorot for the encoder; small-scale heads so initial class logits and
    matching scores sit in the near-uniform softmax regime."""
    params: dict[str, np.ndarray] = {}
    for name, shape in expected_shapes(cfg).items():
        if name == "pos":
            params[name] = rng.normal(0.0, 0.02, size=shape)
        elif name.startswith("cls.w"):
            params[name] = rng.normal(0.0, 0.01 / np.sqrt(cfg.d_model), size=shape)
        elif name.startswith("role.") and name.endswith(".w"):
            params[name] = rng.normal(0.0, 0.01 / np.sqrt(cfg.d_tok), size=shape)
        elif name.endswith(".g"):
            params[name] = np.ones(shape)
        elif len(shape) == 2:
            params[name] = _glorot(rng, shape)
        else:
            params[name] = np.zeros(shape)
    return {name: np.ascontiguousarray(v, dtype=np.float64) for name, v in params.items()}


def zero_grads(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(v) for name, v in params.items()}


def validate_shapes(params: dict[str, np.ndarray], cfg: ModelConfig) -> None:
    shapes = expected_shapes(cfg)
    for name, shape in shapes.items():
        if name not in params:
            raise ConfigError(f"missing parameter tensor {name!r}")
        if params[name].shape != shape:
            raise ConfigError(
                f"parameter {name!r} has shape {params[name].shape}, expected {shape}"
            )
