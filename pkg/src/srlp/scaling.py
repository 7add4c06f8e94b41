"""Train-statistics factor normalization (z-score with mean imputation)."""

from __future__ import annotations

import warnings
from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ValidationError
from .types import FactorVector, NewsEvent


class FactorScaler(BaseEstimator, TransformerMixin):
    """Per-factor z-score using population statistics from the training split.

    Missing raw values (NaN) are imputed with the train mean before scaling;
    a zero-variance factor scales to 0. Fit only on training events.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValidationError("FactorScaler.fit needs a non-empty (n, d) matrix")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
            mean = np.nanmean(X, axis=0)
            std = np.nanstd(X, axis=0)
        # Columns that are entirely missing in train scale everything to 0.
        all_missing = np.isnan(mean)
        self.mean_ = np.where(all_missing, 0.0, mean)
        self.std_ = np.where(all_missing | np.isnan(std), 0.0, std)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} factors, got {X.shape[-1]}"
            )
        filled = np.where(np.isnan(X), self.mean_, X)
        safe_std = np.where(self.std_ == 0.0, 1.0, self.std_)
        z = (filled - self.mean_) / safe_std
        return np.where(self.std_ == 0.0, 0.0, z)


def fit_factor_scaler(train_events: list[NewsEvent]) -> FactorScaler:
    matrix = np.stack([e.factors.values for e in train_events])
    return FactorScaler().fit(matrix)


def apply_factor_scaler(scaler: FactorScaler, events: list[NewsEvent]) -> list[NewsEvent]:
    """New corpus with scaled factor vectors; inputs untouched."""
    out = []
    for event in events:
        scaled = scaler.transform(event.factors.values[None, :])[0]
        out.append(replace(event, factors=FactorVector(scaled, names=event.factors.names)))
    return out
