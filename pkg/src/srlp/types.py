"""Domain types: news events, SRL frames, factors, thresholds, prices."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from datetime import datetime

import numpy as np

from .errors import ValidationError

# Tushare-style daily factor set used for China A-shares. The vector layout is
# fixed; raw files may carry nulls (stored as NaN until imputation).
FACTOR_NAMES = (
    "dividend_yield",
    "dividend_yield_ttm",
    "total_share",
    "circulated_share",
    "free_float_share",
    "market_cap",
    "pe_ratio",
    "pe_ratio_ttm",
    "pb_ratio",
    "ps_ratio",
    "ps_ratio_ttm",
    "circulated_market_cap",
    "open_price",
    "high_price",
    "low_price",
    "close_price",
    "prev_close_price",
    "price_change",
    "pct_change",
    "volume",
    "amount",
    "turnover_rate",
    "turnover_rate_circulated",
    "volume_ratio",
)

FACTOR_DIM = len(FACTOR_NAMES)


class Label(enum.Enum):
    OUTPERFORMING = "outperforming"
    NEUTRAL = "neutral"
    UNDERPERFORMING = "underperforming"

    @property
    def index(self) -> int:
        return _LABEL_ORDER.index(self)

    @classmethod
    def from_index(cls, i: int) -> "Label":
        return _LABEL_ORDER[i]


_LABEL_ORDER = (Label.OUTPERFORMING, Label.NEUTRAL, Label.UNDERPERFORMING)

N_CLASSES = 3


class Role(enum.Enum):
    V = "v"
    A0 = "a0"
    A1 = "a1"


@dataclass(frozen=True)
class SrlFrame:
    """Token index sets for one predicate-argument frame."""

    v_indices: tuple[int, ...]
    a0_indices: tuple[int, ...]
    a1_indices: tuple[int, ...]

    def indices(self, role: Role) -> tuple[int, ...]:
        return {Role.V: self.v_indices, Role.A0: self.a0_indices, Role.A1: self.a1_indices}[role]

    @property
    def is_complete(self) -> bool:
        return bool(self.v_indices) and bool(self.a0_indices) and bool(self.a1_indices)

    def max_index(self) -> int:
        return max(self.v_indices + self.a0_indices + self.a1_indices, default=-1)


@dataclass
class TokenizedSentence:
    tokens: list[str]
    frames: list[SrlFrame] = field(default_factory=list)
    embeddings: np.ndarray | None = None  # (token_count, d_tok) float64

    def validate(self, where: str = "") -> None:
        n = len(self.tokens)
        for frame in self.frames:
            if not frame.v_indices:
                raise ValidationError(f"{where}: frame with empty V index set")
            if frame.max_index() >= n or min(
                frame.v_indices + frame.a0_indices + frame.a1_indices
            ) < 0:
                raise ValidationError(
                    f"{where}: frame references token index {frame.max_index()} "
                    f"in a {n}-token sentence"
                )
        if self.embeddings is not None and self.embeddings.shape[0] != n:
            raise ValidationError(
                f"{where}: embeddings rows {self.embeddings.shape[0]} != token count {n}"
            )


@dataclass
class FactorVector:
    """Fixed-length stock factor vector; NaN marks a missing raw value."""

    values: np.ndarray
    names: tuple[str, ...] = FACTOR_NAMES

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.names),):
            raise ValidationError(
                f"factor vector has length {self.values.shape}, expected {len(self.names)}"
            )

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)


@dataclass
class NewsEvent:
    event_id: str
    stock_id: str
    published_at: datetime  # timezone-aware, minute precision
    sentences: list[TokenizedSentence]
    factors: FactorVector
    return_rate: float | None = None
    label: Label | None = None

    def validate(self) -> None:
        if self.published_at.tzinfo is None:
            raise ValidationError(f"event {self.event_id}: published_at is not timezone-aware")
        for i, sentence in enumerate(self.sentences):
            sentence.validate(where=f"event {self.event_id}, sentence {i}")

    def complete_frames(self) -> list[tuple[TokenizedSentence, SrlFrame]]:
        """Frames with all three roles present, in document order."""
        out = []
        for sentence in self.sentences:
            for frame in sentence.frames:
                if frame.is_complete:
                    out.append((sentence, frame))
        return out

    def with_return(self, r: float) -> "NewsEvent":
        return replace(self, return_rate=r)

    def with_label(self, label: Label) -> "NewsEvent":
        return replace(self, label=label)


@dataclass(frozen=True)
class LabelThresholds:
    """Rank percentiles (a, b, c, d) carving the return distribution."""

    a: float = 20.0
    b: float = 40.0
    c: float = 60.0
    d: float = 20.0

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not 0 < v <= 100:
                raise ValidationError(f"threshold {name}={v} outside (0, 100]")
        if not (self.a <= self.b < self.c <= 100 - self.d):
            raise ValidationError(
                f"thresholds must satisfy a <= b < c <= 100-d, got "
                f"a={self.a} b={self.b} c={self.c} d={self.d}"
            )


@dataclass
class Bars:
    """One price granularity: parallel arrays, strictly increasing timestamps."""

    timestamps: list[datetime]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)

    def validate(self, where: str = "") -> None:
        for i in range(1, len(self.timestamps)):
            if self.timestamps[i] <= self.timestamps[i - 1]:
                raise ValidationError(f"{where}: timestamps not strictly increasing at row {i}")
        for name in ("open", "high", "low", "close"):
            if len(getattr(self, name)) and np.min(getattr(self, name)) <= 0:
                raise ValidationError(f"{where}: non-positive {name} price")


@dataclass
class PriceSeries:
    stock_id: str
    minute: Bars
    daily: Bars

    def validate(self) -> None:
        self.minute.validate(where=f"{self.stock_id} minute bars")
        self.daily.validate(where=f"{self.stock_id} daily bars")


_HORIZON_RE = re.compile(r"^(next_close|close\+(\d+)|minutes:(\d+))$")


@dataclass(frozen=True)
class ReturnHorizon:
    """Exit rule for the per-event return window.

    kind "next_close": close of the trading day after the entry day.
    kind "close_t_plus": close of the k-th trading day after the entry day.
    kind "minutes": first minute close at/after entry time + m minutes.
    """

    kind: str = "next_close"
    k: int = 1
    m: int = 0

    @classmethod
    def next_close(cls) -> "ReturnHorizon":
        return cls("next_close", k=1)

    @classmethod
    def close_t_plus(cls, k: int) -> "ReturnHorizon":
        if k < 0:
            raise ValidationError("close+k horizon needs k >= 0")
        return cls("close_t_plus", k=k)

    @classmethod
    def minutes(cls, m: int) -> "ReturnHorizon":
        if m <= 0:
            raise ValidationError("minutes horizon needs m > 0")
        return cls("minutes", m=m)

    @classmethod
    def parse(cls, text: str) -> "ReturnHorizon":
        match = _HORIZON_RE.match(text.strip())
        if match is None:
            raise ValidationError(
                f"bad horizon {text!r}; expected next_close, close+K or minutes:M"
            )
        if match.group(2) is not None:
            return cls.close_t_plus(int(match.group(2)))
        if match.group(3) is not None:
            return cls.minutes(int(match.group(3)))
        return cls.next_close()

    def __str__(self) -> str:
        if self.kind == "close_t_plus":
            return f"close+{self.k}"
        if self.kind == "minutes":
            return f"minutes:{self.m}"
        return "next_close"


def sort_events(events: list[NewsEvent]) -> list[NewsEvent]:
    """Canonical corpus order: (published_at, event_id)."""
    return sorted(events, key=lambda e: (e.published_at, e.event_id))
