"""Per-event return computation over minute/daily price bars."""

from __future__ import annotations

import bisect
from datetime import date, datetime, timedelta

from .errors import NoEntryPrice, NoExitPrice
from .types import Bars, NewsEvent, PriceSeries, ReturnHorizon


def _daily_dates(daily: Bars) -> list[date]:
    return [ts.date() for ts in daily.timestamps]


def _next_trading_day(prices: PriceSeries, after: date) -> date | None:
    """First session date after `after`, from daily bars (minute bars as fallback)."""
    dates = _daily_dates(prices.daily) or [ts.date() for ts in prices.minute.timestamps]
    i = bisect.bisect_right(dates, after)
    return dates[i] if i < len(dates) else None


def find_entry_bar(
    prices: PriceSeries, when: datetime, strictly_after: bool = False
) -> tuple[datetime, float]:
    """First minute close at/after (or strictly after) `when`, restricted to
    the publication day or the next trading day."""
    ts = prices.minute.timestamps
    i = bisect.bisect_right(ts, when) if strictly_after else bisect.bisect_left(ts, when)
    if i >= len(ts):
        raise NoEntryPrice(f"{prices.stock_id}: no minute bar at/after {when.isoformat()}")
    entry_ts = ts[i]
    if entry_ts.date() != when.date():
        allowed = _next_trading_day(prices, when.date())
        if allowed is None or entry_ts.date() != allowed:
            raise NoEntryPrice(
                f"{prices.stock_id}: first bar after {when.isoformat()} falls on "
                f"{entry_ts.date()}, beyond the next trading day"
            )
    return entry_ts, float(prices.minute.close[i])


def exit_price(
    prices: PriceSeries, entry_ts: datetime, horizon: ReturnHorizon
) -> tuple[datetime, float]:
    """Exit timestamp and price for a position entered at `entry_ts`."""
    if horizon.kind == "minutes":
        target = entry_ts + timedelta(minutes=horizon.m)
        ts = prices.minute.timestamps
        i = bisect.bisect_left(ts, target)
        if i >= len(ts):
            raise NoExitPrice(f"{prices.stock_id}: no minute bar at/after {target.isoformat()}")
        return ts[i], float(prices.minute.close[i])

    dates = _daily_dates(prices.daily)
    entry_day = entry_ts.date()
    k = 1 if horizon.kind == "next_close" else horizon.k
    if k == 0:
        try:
            j = dates.index(entry_day)
        except ValueError:
            raise NoExitPrice(f"{prices.stock_id}: no daily bar on entry day {entry_day}") from None
    else:
        j = bisect.bisect_right(dates, entry_day) + k - 1
        if j >= len(dates):
            raise NoExitPrice(
                f"{prices.stock_id}: daily bars end before {k} trading day(s) after {entry_day}"
            )
    return prices.daily.timestamps[j], float(prices.daily.close[j])


def compute_return(event: NewsEvent, prices: PriceSeries, horizon: ReturnHorizon) -> float:
    """Fractional price move from the first minute close at/after publication
    to the horizon exit."""
    entry_ts, p_entry = find_entry_bar(prices, event.published_at, strictly_after=False)
    _, p_exit = exit_price(prices, entry_ts, horizon)
    return (p_exit - p_entry) / p_entry
