"""News-driven stock movement pipeline.

Role-pooled news features fused with stock factors, a small transformer
classifier trained with a masked-role matching auxiliary task, quantile-rank
labels, and an event-driven backtest.
"""

from .backtest import (
    EquityCurve,
    StrategyConfig,
    Trade,
    annualized_return,
    benchmark_report,
    max_drawdown,
    sharpe,
    simulate,
)
from .events_io import parse_events, read_events, write_events
from .features import SrlpMatrix, build_event_matrix, mask_matrix, pool_role, sample_mask
from .labeling import derive_labels
from .model import MovementClassifier
from .scaling import FactorScaler, apply_factor_scaler, fit_factor_scaler
from .splits import InDistribution, OutOfDistribution, split_dataset
from .training import TrainConfig, evaluate, load_model, save_model, train
from .types import (
    FACTOR_NAMES,
    FactorVector,
    Label,
    LabelThresholds,
    NewsEvent,
    PriceSeries,
    ReturnHorizon,
    Role,
    SrlFrame,
    TokenizedSentence,
)

__version__ = "0.1.0"

__all__ = [
    "EquityCurve", "StrategyConfig", "Trade", "annualized_return", "benchmark_report",
    "max_drawdown", "sharpe", "simulate", "parse_events", "read_events", "write_events",
    "SrlpMatrix", "build_event_matrix", "mask_matrix", "pool_role", "sample_mask",
    "derive_labels", "MovementClassifier", "FactorScaler", "apply_factor_scaler",
    "fit_factor_scaler", "InDistribution", "OutOfDistribution", "split_dataset",
    "TrainConfig", "evaluate", "load_model", "save_model", "train", "FACTOR_NAMES",
    "FactorVector", "Label", "LabelThresholds", "NewsEvent", "PriceSeries",
    "ReturnHorizon", "Role", "SrlFrame", "TokenizedSentence",
]
