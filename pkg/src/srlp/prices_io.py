"""Per-stock OHLCV CSV files, one file per granularity.

Directory layout: <dir>/minute/<stock_id>.csv and <dir>/daily/<stock_id>.csv,
columns timestamp,open,high,low,close,volume with ISO-8601 offset timestamps.
"""

from __future__ import annotations

import csv
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .types import Bars, PriceSeries

COLUMNS = ["timestamp", "open", "high", "low", "close", "volume"]


def read_bars(path: str | Path) -> Bars:
    timestamps: list[datetime] = []
    cols: dict[str, list[float]] = {name: [] for name in COLUMNS[1:]}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != COLUMNS:
            raise FormatError(f"bad header {header}, expected {COLUMNS}", path=str(path), line=1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(COLUMNS):
                raise FormatError(f"expected {len(COLUMNS)} fields, got {len(row)}", path=str(path), line=lineno)
            try:
                ts = datetime.fromisoformat(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise FormatError(str(exc), path=str(path), line=lineno) from None
            if ts.tzinfo is None:
                raise FormatError("timestamp lacks a UTC offset", path=str(path), line=lineno)
            timestamps.append(ts)
            for name, value in zip(COLUMNS[1:], values):
                cols[name].append(value)
    return Bars(
        timestamps=timestamps,
        open=np.array(cols["open"]),
        high=np.array(cols["high"]),
        low=np.array(cols["low"]),
        close=np.array(cols["close"]),
        volume=np.array(cols["volume"]),
    )


def write_bars(bars: Bars, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for i, ts in enumerate(bars.timestamps):
            writer.writerow(
                [
                    ts.isoformat(),
                    repr(float(bars.open[i])),
                    repr(float(bars.high[i])),
                    repr(float(bars.low[i])),
                    repr(float(bars.close[i])),
                    repr(float(bars.volume[i])),
                ]
            )


def read_price_dir(root: str | Path) -> dict[str, PriceSeries]:
    """Load every stock with at least one granularity present."""
    root = Path(root)
    minute_dir, daily_dir = root / "minute", root / "daily"
    stock_ids = sorted(
        {p.stem for d in (minute_dir, daily_dir) if d.is_dir() for p in d.glob("*.csv")}
    )
    if not stock_ids:
        raise ValidationError(f"no price CSVs under {root}")
    out: dict[str, PriceSeries] = {}
    empty = Bars([], np.array([]), np.array([]), np.array([]), np.array([]), np.array([]))
    for stock_id in stock_ids:
        minute_path = minute_dir / f"{stock_id}.csv"
        daily_path = daily_dir / f"{stock_id}.csv"
        series = PriceSeries(
            stock_id=stock_id,
            minute=read_bars(minute_path) if minute_path.exists() else empty,
            daily=read_bars(daily_path) if daily_path.exists() else empty,
        )
        series.validate()
        out[stock_id] = series
    return out


def write_price_series(series: PriceSeries, root: str | Path) -> None:
    root = Path(root)
    if len(series.minute):
        write_bars(series.minute, root / "minute" / f"{series.stock_id}.csv")
    if len(series.daily):
        write_bars(series.daily, root / "daily" / f"{series.stock_id}.csv")
