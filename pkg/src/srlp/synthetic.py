"""Synthetic corpora and market fixtures for tests, demos, and acceptance runs.

The separable corpus keys the class to an affine function of each frame's
verb feature, so a working encoder can drive training accuracy toward 1.
Agent features are a fixed linear image of the verb features, which makes
the masked-position matching task solvable from context.
"""

from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

import numpy as np

from .types import (
    FACTOR_DIM,
    Bars,
    FactorVector,
    Label,
    NewsEvent,
    PriceSeries,
    SrlFrame,
    TokenizedSentence,
)

CN_TZ = timezone(timedelta(hours=8))


def _class_vector(rng, w, target, margin=0.3, max_tries=200):
    for _ in range(max_tries):
        v = rng.normal(size=w.shape[1])
        z = w @ v
        order = np.argsort(z)
        if order[-1] == target and z[order[-1]] - z[order[-2]] >= margin:
            return v
    raise RuntimeError("rejection sampling failed; loosen the margin")


def make_separable_corpus(
    n_events: int = 2000,
    d_tok: int = 16,
    seed: int = 0,
    min_frames: int = 2,
    max_frames: int = 4,
    start: datetime | None = None,
) -> list[NewsEvent]:
    """Balanced three-class corpus with embeddings attached and labels set."""
    rng = np.random.default_rng(seed)
    w_true = rng.normal(size=(3, d_tok))
    agent_map = rng.normal(size=(d_tok, d_tok)) / np.sqrt(d_tok)
    base = start or datetime(2020, 1, 6, 9, 30, tzinfo=CN_TZ)
    events = []
    for i in range(n_events):
        target = i % 3
        n_frames = int(rng.integers(min_frames, max_frames + 1))
        tokens, frames, rows = [], [], []
        for j in range(n_frames):
            e_v = _class_vector(rng, w_true, target)
            rows.extend([e_v, agent_map @ e_v, rng.normal(size=d_tok)])
            tokens.extend([f"v{j}", f"a{j}", f"p{j}"])
            frames.append(
                SrlFrame(v_indices=(3 * j,), a0_indices=(3 * j + 1,), a1_indices=(3 * j + 2,))
            )
        sentence = TokenizedSentence(
            tokens=tokens, frames=frames, embeddings=np.array(rows, dtype=np.float64)
        )
        events.append(
            NewsEvent(
                event_id=f"evt{i:05d}",
                stock_id=f"S{i % 7:03d}",
                published_at=base + timedelta(minutes=7 * i),
                sentences=[sentence],
                factors=FactorVector(rng.normal(size=FACTOR_DIM)),
                label=Label.from_index(target),
            )
        )
    return events


def _minute_closes(day_open: float, day_close: float, n: int) -> np.ndarray:
    return np.linspace(day_open, day_close, n)


def make_market_fixture(
    n_days: int = 40,
    seed: int = 0,
    risers: tuple[str, ...] = ("R001", "R002"),
    fallers: tuple[str, ...] = ("F001", "F002", "F003", "F004", "F005", "F006", "F007", "F008"),
    riser_drift: float = 0.010,
    faller_drift: float = -0.008,
    start_day: date = date(2021, 1, 4),
) -> tuple[dict[str, PriceSeries], list[date]]:
    """Deterministic minute+daily price fixture: a few steady risers, many
    steady fallers. Weekends are skipped; five minute bars per session."""
    rng = np.random.default_rng(seed)
    days: list[date] = []
    day = start_day
    while len(days) < n_days:
        if day.weekday() < 5:
            days.append(day)
        day += timedelta(days=1)
    series: dict[str, PriceSeries] = {}
    for stock_id in risers + fallers:
        drift = riser_drift if stock_id in risers else faller_drift
        wiggle = 0.002 * rng.standard_normal(n_days)
        closes = 100.0 * np.cumprod(1.0 + drift + wiggle)
        minute_ts, minute_close = [], []
        daily_ts = []
        prev_close = 100.0
        for di, d in enumerate(days):
            opens = prev_close
            closes_d = closes[di]
            mc = _minute_closes(opens, closes_d, 5)
            for mi in range(5):
                minute_ts.append(datetime(d.year, d.month, d.day, 9, 31 + mi, tzinfo=CN_TZ))
                minute_close.append(mc[mi])
            daily_ts.append(datetime(d.year, d.month, d.day, 15, 0, tzinfo=CN_TZ))
            prev_close = closes_d
        minute_close = np.array(minute_close)
        series[stock_id] = PriceSeries(
            stock_id=stock_id,
            minute=Bars(
                timestamps=minute_ts,
                open=minute_close,
                high=minute_close,
                low=minute_close,
                close=minute_close,
                volume=np.full(len(minute_ts), 1000.0),
            ),
            daily=Bars(
                timestamps=daily_ts,
                open=np.concatenate([[100.0], closes[:-1]]),
                high=np.maximum(closes, np.concatenate([[100.0], closes[:-1]])),
                low=np.minimum(closes, np.concatenate([[100.0], closes[:-1]])),
                close=closes,
                volume=np.full(n_days, 5000.0),
            ),
        )
    return series, days


def write_demo_dataset(out_dir, n_days: int = 40, seed: int = 0, d_tok: int = 16) -> dict:
    """Write a runnable demo: events.jsonl, embeddings.bin, prices/, index.csv.

    News embeddings are random (the demo exercises the pipeline, not the
    signal); one event per stock every other session.
    """
    from pathlib import Path

    from .embeddings_io import write_embeddings
    from .events_io import write_events
    from .prices_io import write_bars, write_price_series

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series, days = make_market_fixture(n_days=n_days, seed=seed)
    for s in series.values():
        write_price_series(s, out / "prices")
    index = equal_weight_index(series, name="COMP")
    write_bars(index.daily, out / "index_comp.csv")

    rng = np.random.default_rng(seed + 1)
    events, blocks = [], {}
    for stock_id in sorted(series):
        for day in days[:-1:2]:
            ts = datetime(day.year, day.month, day.day, 9, 32, tzinfo=CN_TZ)
            event_id = f"{stock_id}-{day.isoformat()}"
            n_frames = int(rng.integers(1, 4))
            tokens, frames, rows = [], [], []
            for j in range(n_frames):
                tokens.extend([f"v{j}", f"a{j}", f"p{j}"])
                frames.append(SrlFrame((3 * j,), (3 * j + 1,), (3 * j + 2,)))
                rows.extend(rng.normal(size=(3, d_tok)))
            sentence = TokenizedSentence(tokens=tokens, frames=frames,
                                         embeddings=np.array(rows))
            events.append(
                NewsEvent(
                    event_id=event_id, stock_id=stock_id, published_at=ts,
                    sentences=[sentence],
                    factors=FactorVector(rng.normal(size=FACTOR_DIM)),
                )
            )
            blocks[(event_id, 0)] = sentence.embeddings
    write_events(events, out / "events.jsonl")
    write_embeddings(d_tok, blocks, out / "embeddings.bin")
    return {"events": len(events), "stocks": len(series), "days": len(days)}


def equal_weight_index(series: dict[str, PriceSeries], name: str = "INDEX") -> PriceSeries:
    """Equal-weighted composite of the daily closes, rebased to 100."""
    stocks = sorted(series)
    closes = np.stack([series[s].daily.close / series[s].daily.close[0] for s in stocks])
    level = 100.0 * closes.mean(axis=0)
    template = series[stocks[0]].daily
    return PriceSeries(
        stock_id=name,
        minute=Bars([], np.array([]), np.array([]), np.array([]), np.array([]), np.array([])),
        daily=Bars(
            timestamps=list(template.timestamps),
            open=level,
            high=level,
            low=level,
            close=level,
            volume=np.zeros(len(level)),
        ),
    )


if __name__ == "__main__":
    import argparse
    import json

    parser = argparse.ArgumentParser(description="write a synthetic demo dataset")
    parser.add_argument("--out", required=True)
    parser.add_argument("--days", type=int, default=40)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    print(json.dumps(write_demo_dataset(args.out, n_days=args.days, seed=args.seed)))
