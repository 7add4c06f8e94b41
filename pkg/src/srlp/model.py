"""Estimator-style wrapper over the training loop (fit/predict/predict_proba)."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import ValidationError
from .training import (
    TrainConfig,
    TrainResult,
    evaluate,
    load_model,
    predict_probabilities,
    prepare_events,
    save_model,
    train,
)
from .types import Label, NewsEvent


class MovementClassifier(BaseEstimator):
    """Three-way stock-movement classifier over role-pooled news features.

    fit() consumes labeled NewsEvent lists (factor scaling is fitted on the
    training events only); predict()/predict_proba() require every event to
    carry at least one complete SRL frame.
    """

    def __init__(
        self,
        d_model: int = 128,
        n_layers: int = 2,
        n_heads: int = 4,
        ffn_ratio: int = 4,
        n_max: int = 32,
        dropout: float = 0.1,
        alpha: float = 0.7,
        mask_preset: str = "v_only",
        learning_rate: float = 1e-3,
        lr_decay: float = 1.0,
        batch_size: int = 32,
        epochs: int = 30,
        patience: int = 5,
        weight_decay: float = 0.0,
        seed: int = 0,
        mask_seed: int | None = None,
    ):
        self.d_model = d_model
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.ffn_ratio = ffn_ratio
        self.n_max = n_max
        self.dropout = dropout
        self.alpha = alpha
        self.mask_preset = mask_preset
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.weight_decay = weight_decay
        self.seed = seed
        self.mask_seed = mask_seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            seed=self.seed,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lr_decay=self.lr_decay,
            alpha=self.alpha,
            mask_preset=self.mask_preset,
            patience=self.patience,
            weight_decay=self.weight_decay,
            mask_seed=self.mask_seed,
        )

    def _model_overrides(self) -> dict:
        return dict(
            d_model=self.d_model,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            ffn_ratio=self.ffn_ratio,
            n_max=self.n_max,
            dropout=self.dropout,
        )

    def fit(self, events: list[NewsEvent], validation_events: list[NewsEvent] | None = None):
        result = train(
            events,
            validation_events,
            model_config=self._model_overrides(),
            train_config=self._train_config(),
        )
        self._apply_result(result)
        return self

    def _apply_result(self, result: TrainResult) -> None:
        self.params_ = result.params
        self.model_config_ = result.model_config
        self.scaler_ = result.scaler
        self.log_ = result.log
        self.best_epoch_ = result.best_epoch
        self.classes_ = np.array([label.value for label in Label])

    def predict_proba(self, events: list[NewsEvent]) -> np.ndarray:
        check_is_fitted(self, "params_")
        prepared, skipped = prepare_events(
            events, self.scaler_, self.model_config_.n_max, require_labels=False
        )
        if skipped:
            raise ValidationError(
                f"{len(skipped)} event(s) have no complete SRL frames: "
                f"{[event_id for event_id, _ in skipped[:5]]}"
            )
        return predict_probabilities(prepared, self.params_, self.model_config_)

    def predict(self, events: list[NewsEvent]) -> np.ndarray:
        probs = self.predict_proba(events)
        return self.classes_[probs.argmax(axis=1)]

    def score(self, events: list[NewsEvent], y=None) -> float:
        check_is_fitted(self, "params_")
        return evaluate(self.params_, self.model_config_, self.scaler_, events).accuracy

    def evaluation_report(self, events: list[NewsEvent]):
        check_is_fitted(self, "params_")
        return evaluate(self.params_, self.model_config_, self.scaler_, events)

    def save(self, path) -> None:
        check_is_fitted(self, "params_")
        save_model(
            path,
            TrainResult(
                params=self.params_,
                model_config=self.model_config_,
                scaler=self.scaler_,
                train_config=self._train_config(),
                log=self.log_,
                best_epoch=self.best_epoch_,
                best_val_accuracy=max((e["val_accuracy"] for e in self.log_), default=0.0),
            ),
        )

    @classmethod
    def load(cls, path) -> "MovementClassifier":
        cfg, params, scaler, config = load_model(path)
        settings = dict(config.get("train", {}))
        known = cls().get_params()
        est = cls(**{k: v for k, v in settings.items() if k in known})
        est.set_params(
            d_model=cfg.d_model, n_layers=cfg.n_layers, n_heads=cfg.n_heads,
            ffn_ratio=cfg.ffn_ratio, n_max=cfg.n_max, dropout=cfg.dropout,
        )
        est.params_ = params
        est.model_config_ = cfg
        est.scaler_ = scaler
        est.log_ = []
        est.best_epoch_ = config.get("best_epoch", -1)
        est.classes_ = np.array([label.value for label in Label])
        return est
