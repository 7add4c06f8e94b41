"""Event-driven trading simulation over prediction signals, plus the three
portfolio metrics (annualized return, maximum drawdown, Sharpe)."""

from __future__ import annotations

import csv
import heapq
import logging
from collections import deque
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .errors import FormatError, NoEntryPrice, NoExitPrice, NotDefined, Ruin, ValidationError
from .returns import exit_price, find_entry_bar
from .types import Bars, Label, PriceSeries, ReturnHorizon

log = logging.getLogger("srlp.backtest")

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class StrategyConfig:
    allow_short: bool = False  # China A-shares default
    horizon: ReturnHorizon = ReturnHorizon.next_close()
    position_fraction: float = 0.1  # fraction of last marked equity per position
    max_positions: int = 10
    cost_bps: float = 10.0  # per side, on traded notional
    confidence_threshold: float = 0.0  # minimum predicted-class probability

    def __post_init__(self):
        if not 0 < self.position_fraction <= 1:
            raise ValidationError(f"position_fraction={self.position_fraction} outside (0, 1]")
        if self.max_positions < 1:
            raise ValidationError("max_positions must be >= 1")
        if self.cost_bps < 0:
            raise ValidationError("cost_bps must be >= 0")
        if not 0 <= self.confidence_threshold <= 1:
            raise ValidationError("confidence_threshold outside [0, 1]")

    @property
    def cost_rate(self) -> float:
        return self.cost_bps / 10_000.0


@dataclass(frozen=True)
class Signal:
    event_id: str
    stock_id: str
    published_at: datetime
    label: Label
    probs: tuple[float, float, float]


@dataclass
class Trade:
    event_id: str
    stock_id: str
    direction: str  # "long" | "short"
    entry_ts: datetime
    entry_price: float
    exit_ts: datetime
    exit_price: float
    quantity: float
    capital: float
    net_return: float  # realized, net of both sides' costs


@dataclass
class EquityCurve:
    dates: list[date]
    equity: np.ndarray
    cash: np.ndarray | None = None
    position_value: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.dates)


@dataclass
class SkippedSignal:
    event_id: str
    reason: str


@dataclass
class _Position:
    signal: Signal
    direction: str
    entry_ts: datetime
    entry_price: float
    exit_ts: datetime
    exit_price: float
    quantity: float
    capital: float
    margin: float  # capital net of entry cost

    def market_value(self, price: float) -> float:
        if self.direction == "long":
            return self.quantity * price
        return self.margin + self.quantity * (self.entry_price - price)


def read_predictions(path: str | Path) -> list[Signal]:
    signals = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = [
            "event_id", "stock_id", "published_at", "pred_label",
            "p_outperform", "p_neutral", "p_underperform",
        ]
        if header != expected:
            raise FormatError(f"bad header {header}", path=str(path), line=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                signals.append(
                    Signal(
                        event_id=row[0],
                        stock_id=row[1],
                        published_at=datetime.fromisoformat(row[2]),
                        label=Label(row[3]),
                        probs=(float(row[4]), float(row[5]), float(row[6])),
                    )
                )
            except (IndexError, ValueError) as exc:
                raise FormatError(str(exc), path=str(path), line=lineno) from None
    return sorted(signals, key=lambda s: (s.published_at, s.event_id))


@dataclass
class _Candidate:
    entry_ts: datetime
    signal: Signal
    direction: str
    entry_price: float
    exit_ts: datetime
    exit_price: float


def _plan_candidates(
    signals: list[Signal],
    prices: dict[str, PriceSeries],
    config: StrategyConfig,
    skips: list[SkippedSignal],
) -> list[_Candidate]:
    candidates = []
    for signal in signals:
        if signal.label is Label.NEUTRAL:
            continue
        direction = "long" if signal.label is Label.OUTPERFORMING else "short"
        if direction == "short" and not config.allow_short:
            skips.append(SkippedSignal(signal.event_id, "short_disabled"))
            continue
        if signal.probs[signal.label.index] < config.confidence_threshold:
            skips.append(SkippedSignal(signal.event_id, "below_confidence"))
            continue
        series = prices.get(signal.stock_id)
        if series is None:
            skips.append(SkippedSignal(signal.event_id, "no_price_data"))
            continue
        try:
            entry_ts, entry_price = find_entry_bar(series, signal.published_at, strictly_after=True)
        except NoEntryPrice:
            skips.append(SkippedSignal(signal.event_id, "no_entry_bar"))
            continue
        try:
            exit_ts, exit_p = exit_price(series, entry_ts, config.horizon)
        except NoExitPrice:
            skips.append(SkippedSignal(signal.event_id, "no_exit_bar"))
            continue
        candidates.append(
            _Candidate(
                entry_ts=entry_ts, signal=signal, direction=direction,
                entry_price=entry_price, exit_ts=exit_ts, exit_price=exit_p,
            )
        )
    candidates.sort(key=lambda c: (c.entry_ts, c.signal.event_id))
    return candidates


def _mark_price(series: PriceSeries, day: date, fallback: float) -> float:
    closes = series.daily.close
    best = fallback
    for i, ts in enumerate(series.daily.timestamps):
        if ts.date() > day:
            break
        best = float(closes[i])
    return best


def simulate(
    signals: list[Signal],
    prices: dict[str, PriceSeries],
    config: StrategyConfig,
    calendar: list[date],
) -> tuple[list[Trade], EquityCurve, list[SkippedSignal]]:
    """Chronological simulation: outperforming signals open longs at the
    first minute close strictly after the news minute, exits follow the
    configured horizon, equity is marked at every calendar day close."""
    if not calendar:
        raise ValidationError("empty trading calendar")
    if sorted(calendar) != list(calendar) or len(set(calendar)) != len(calendar):
        raise ValidationError("calendar must be strictly increasing")

    skips: list[SkippedSignal] = []
    queue = deque(_plan_candidates(signals, prices, config, skips))
    exit_heap: list[tuple[datetime, int, _Position]] = []
    seq = 0
    cost = config.cost_rate
    cash = 1.0
    marked_equity = 1.0
    open_positions: dict[int, _Position] = {}
    trades: list[Trade] = []
    curve_equity, curve_cash, curve_pos = [], [], []

    def settle(position_id: int, position: _Position) -> None:
        nonlocal cash
        del open_positions[position_id]
        if position.direction == "long":
            proceeds = position.quantity * position.exit_price * (1.0 - cost)
        else:
            proceeds = (
                position.margin
                + position.quantity * (position.entry_price - position.exit_price)
                - position.quantity * position.exit_price * cost
            )
        cash += proceeds
        trades.append(
            Trade(
                event_id=position.signal.event_id,
                stock_id=position.signal.stock_id,
                direction=position.direction,
                entry_ts=position.entry_ts,
                entry_price=position.entry_price,
                exit_ts=position.exit_ts,
                exit_price=position.exit_price,
                quantity=position.quantity,
                capital=position.capital,
                net_return=proceeds / position.capital - 1.0,
            )
        )

    def settle_due(until: datetime | None, until_day: date | None) -> None:
        while exit_heap:
            exit_ts, position_id, position = exit_heap[0]
            due = (until is not None and exit_ts <= until) or (
                until_day is not None and exit_ts.date() <= until_day
            )
            if not due:
                break
            heapq.heappop(exit_heap)
            settle(position_id, position)

    def try_open(cand: _Candidate) -> None:
        nonlocal cash, seq
        if len(open_positions) >= config.max_positions:
            skips.append(SkippedSignal(cand.signal.event_id, "max_positions"))
            return
        capital = config.position_fraction * marked_equity
        if capital > cash + 1e-12:
            skips.append(SkippedSignal(cand.signal.event_id, "insufficient_cash"))
            return
        margin = capital * (1.0 - cost)
        quantity = margin / cand.entry_price
        cash -= capital
        position = _Position(
            signal=cand.signal, direction=cand.direction,
            entry_ts=cand.entry_ts, entry_price=cand.entry_price,
            exit_ts=cand.exit_ts, exit_price=cand.exit_price,
            quantity=quantity, capital=capital, margin=margin,
        )
        open_positions[seq] = position
        heapq.heappush(exit_heap, (cand.exit_ts, seq, position))
        seq += 1

    for day in calendar:
        while queue and queue[0].entry_ts.date() <= day:
            cand = queue.popleft()
            settle_due(cand.entry_ts, None)
            try_open(cand)
        settle_due(None, day)
        position_value = sum(
            p.market_value(_mark_price(prices[p.signal.stock_id], day, p.entry_price))
            for p in open_positions.values()
        )
        equity = cash + position_value
        if equity <= 0:
            raise Ruin(f"equity {equity:.6f} at {day.isoformat()}")
        marked_equity = equity
        curve_equity.append(equity)
        curve_cash.append(cash)
        curve_pos.append(position_value)

    for cand in queue:
        skips.append(SkippedSignal(cand.signal.event_id, "outside_calendar"))

    curve = EquityCurve(
        dates=list(calendar),
        equity=np.array(curve_equity),
        cash=np.array(curve_cash),
        position_value=np.array(curve_pos),
    )
    return trades, curve, skips


# ---------------------------------------------------------------------------
# Metrics


def max_drawdown(curve: EquityCurve) -> float:
    if len(curve) == 0:
        raise ValidationError("empty equity curve")
    peaks = np.maximum.accumulate(curve.equity)
    return float(np.min(curve.equity / peaks - 1.0))


def annualized_return(curve: EquityCurve, trading_days_per_year: int = TRADING_DAYS_PER_YEAR) -> float:
    if len(curve) < 2:
        raise ValidationError("annualized return needs at least 2 samples")
    d = len(curve) - 1
    return float(
        (curve.equity[-1] / curve.equity[0]) ** (trading_days_per_year / d) - 1.0
    )


def daily_returns(curve: EquityCurve) -> np.ndarray:
    return curve.equity[1:] / curve.equity[:-1] - 1.0


def sharpe(
    returns: np.ndarray,
    risk_free_daily: float = 0.0,
    trading_days_per_year: int = TRADING_DAYS_PER_YEAR,
) -> float:
    returns = np.asarray(returns, dtype=np.float64)
    if returns.size < 2:
        raise ValidationError("sharpe needs at least 2 daily returns")
    excess = returns - risk_free_daily
    std = float(excess.std(ddof=1))
    if std == 0.0 or np.all(excess == excess[0]):
        raise NotDefined("sharpe undefined for zero-variance returns")
    return float(excess.mean() / std * np.sqrt(trading_days_per_year))


def curve_from_daily_closes(bars: Bars, dates: list[date], series_name: str) -> EquityCurve:
    """Rebased close curve over exactly `dates`; every date must be present."""
    closes_by_date = {ts.date(): float(c) for ts, c in zip(bars.timestamps, bars.close)}
    missing = [d for d in dates if d not in closes_by_date]
    if missing:
        raise ValidationError(
            f"series {series_name} lacks {len(missing)} date(s) in the comparison range, "
            f"first missing {missing[0].isoformat()}"
        )
    closes = np.array([closes_by_date[d] for d in dates])
    return EquityCurve(dates=list(dates), equity=closes / closes[0])


@dataclass
class BenchmarkRow:
    series: str
    annualized_return: float
    max_drawdown: float
    sharpe: float | None  # None when undefined (zero variance)


def benchmark_report(
    strategy_curve: EquityCurve, index_bars: dict[str, Bars]
) -> list[BenchmarkRow]:
    """Strategy vs index metrics over the strategy curve's exact date range."""
    rows = []
    curves = [("strategy", strategy_curve)]
    for name in sorted(index_bars):
        curves.append((name, curve_from_daily_closes(index_bars[name], strategy_curve.dates, name)))
    for name, curve in curves:
        try:
            ratio = sharpe(daily_returns(curve))
        except NotDefined:
            ratio = None
        rows.append(
            BenchmarkRow(
                series=name,
                annualized_return=annualized_return(curve),
                max_drawdown=max_drawdown(curve),
                sharpe=ratio,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Artifact writers


def write_report_csv(rows: list[BenchmarkRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "annualized_return", "max_drawdown", "sharpe"])
        for row in rows:
            writer.writerow(
                [
                    row.series,
                    repr(row.annualized_return),
                    repr(row.max_drawdown),
                    "" if row.sharpe is None else repr(row.sharpe),
                ]
            )


def write_report_jsonl(rows: list[BenchmarkRow], path: str | Path) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(
                json.dumps(
                    {
                        "series": row.series,
                        "annualized_return": row.annualized_return,
                        "max_drawdown": row.max_drawdown,
                        "sharpe": row.sharpe,
                    },
                    separators=(",", ":"),
                )
            )
            fh.write("\n")


def write_equity_csv(curve: EquityCurve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "equity"])
        for d, e in zip(curve.dates, curve.equity):
            writer.writerow([d.isoformat(), repr(float(e))])


def read_equity_csv(path: str | Path) -> EquityCurve:
    dates, equity = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["date", "equity"]:
            raise FormatError(f"bad header {header}", path=str(path), line=1)
        for row in reader:
            dates.append(date.fromisoformat(row[0]))
            equity.append(float(row[1]))
    return EquityCurve(dates=dates, equity=np.array(equity))


def write_trades_csv(trades: list[Trade], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "event_id", "stock_id", "direction", "entry_ts", "entry_price",
                "exit_ts", "exit_price", "quantity", "capital", "net_return",
            ]
        )
        for t in trades:
            writer.writerow(
                [
                    t.event_id, t.stock_id, t.direction,
                    t.entry_ts.isoformat(), repr(t.entry_price),
                    t.exit_ts.isoformat(), repr(t.exit_price),
                    repr(t.quantity), repr(t.capital), repr(t.net_return),
                ]
            )


def write_skips_csv(skips: list[SkippedSignal], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "reason"])
        for skip in skips:
            writer.writerow([skip.event_id, skip.reason])
