from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest

from srlp.types import (
    FACTOR_DIM,
    Bars,
    FactorVector,
    NewsEvent,
    PriceSeries,
    SrlFrame,
    TokenizedSentence,
)

CN_TZ = timezone(timedelta(hours=8))


def make_sentence(n_tokens=3, d_tok=4, frames=None, seed=0, embeddings=None):
    if embeddings is None:
        embeddings = np.random.default_rng(seed).normal(size=(n_tokens, d_tok))
    if frames is None:
        frames = [SrlFrame(v_indices=(0,), a0_indices=(1,), a1_indices=(2,))]
    return TokenizedSentence(
        tokens=[f"tok{i}" for i in range(n_tokens)], frames=frames,
        embeddings=np.asarray(embeddings, dtype=np.float64),
    )


def make_event(
    event_id="e1",
    stock_id="S001",
    published="2021-01-04T09:31:00+08:00",
    sentences=None,
    factors=None,
    return_rate=None,
    label=None,
    d_tok=4,
    seed=0,
):
    if sentences is None:
        sentences = [make_sentence(d_tok=d_tok, seed=seed)]
    if factors is None:
        factors = np.zeros(FACTOR_DIM)
    return NewsEvent(
        event_id=event_id,
        stock_id=stock_id,
        published_at=datetime.fromisoformat(published),
        sentences=sentences,
        factors=FactorVector(np.asarray(factors, dtype=np.float64)),
        return_rate=return_rate,
        label=label,
    )


def make_bars(rows):
    """rows: list of (iso_ts, close); open/high/low mirror close."""
    ts = [datetime.fromisoformat(r[0]) for r in rows]
    close = np.array([float(r[1]) for r in rows])
    return Bars(timestamps=ts, open=close.copy(), high=close.copy(),
                low=close.copy(), close=close, volume=np.full(len(rows), 100.0))


def make_prices(stock_id, minute_rows, daily_rows):
    return PriceSeries(stock_id=stock_id, minute=make_bars(minute_rows), daily=make_bars(daily_rows))


@pytest.fixture
def two_day_prices():
    """Two sessions (Mon/Tue 2021-01-04/05) with a couple of minute bars each."""
    return make_prices(
        "S001",
        minute_rows=[
            ("2021-01-04T09:31:00+08:00", 10.0),
            ("2021-01-04T09:32:00+08:00", 10.2),
            ("2021-01-04T14:59:00+08:00", 10.4),
            ("2021-01-05T09:31:00+08:00", 10.6),
            ("2021-01-05T09:32:00+08:00", 10.8),
        ],
        daily_rows=[
            ("2021-01-04T15:00:00+08:00", 10.5),
            ("2021-01-05T15:00:00+08:00", 11.0),
        ],
    )
