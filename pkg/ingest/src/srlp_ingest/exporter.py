"""Writers for the movement pipeline's three input formats.

These duplicate the consumer's external contracts on purpose: the toolkit
talks to the pipeline only through files. Events are UTF-8 JSONL with a
fixed key order and compact separators; embeddings are the "SRLPEMB1"
binary; prices are per-stock OHLCV CSVs split by granularity.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .records import IngestError
from .tagger import TaggedSentence

EMBEDDINGS_MAGIC = b"SRLPEMB1"
_U32 = struct.Struct("<I")

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

PRICE_COLUMNS = ["timestamp", "open", "high", "low", "close", "volume"]


@dataclass
class ExportEvent:
    event_id: str
    stock_id: str
    published_at: datetime  # minute precision
    sentences: list[TaggedSentence]
    embeddings: list[np.ndarray]  # one (token_count, d_tok) matrix per sentence
    factors: list[float]  # 24 entries, NaN for missing

    def validate(self, d_tok: int) -> None:
        if len(self.sentences) != len(self.embeddings):
            raise IngestError(f"event {self.event_id}: sentence/embedding count mismatch")
        if len(self.factors) != len(FACTOR_NAMES):
            raise IngestError(
                f"event {self.event_id}: {len(self.factors)} factors, "
                f"expected {len(FACTOR_NAMES)}"
            )
        if self.published_at.tzinfo is None:
            raise IngestError(f"event {self.event_id}: naive timestamp")
        if self.published_at.second or self.published_at.microsecond:
            raise IngestError(f"event {self.event_id}: timestamp not minute-precise")
        for i, (sentence, matrix) in enumerate(zip(self.sentences, self.embeddings)):
            if matrix.shape != (len(sentence.tokens), d_tok):
                raise IngestError(
                    f"event {self.event_id} sentence {i}: embedding shape {matrix.shape} "
                    f"vs {len(sentence.tokens)} tokens x d_tok {d_tok}"
                )
            for frame in sentence.frames:
                indices = frame.v + frame.a0 + frame.a1
                if indices and max(indices) >= len(sentence.tokens):
                    raise IngestError(
                        f"event {self.event_id} sentence {i}: frame index out of range"
                    )


def _event_line(event: ExportEvent) -> str:
    obj = {
        "event_id": event.event_id,
        "stock_id": event.stock_id,
        "published_at": event.published_at.isoformat(),
        "sentences": [
            {
                "tokens": list(s.tokens),
                "frames": [
                    {"v": list(f.v), "a0": list(f.a0), "a1": list(f.a1)} for f in s.frames
                ],
            }
            for s in event.sentences
        ],
        "factors": [None if math.isnan(v) else float(v) for v in event.factors],
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _events_bytes(events: list[ExportEvent]) -> bytes:
    ordered = sorted(events, key=lambda e: (e.published_at, e.event_id))
    return "".join(_event_line(e) + "\n" for e in ordered).encode("utf-8")


def _embeddings_bytes(events: list[ExportEvent], d_tok: int) -> bytes:
    blocks: dict[tuple[str, int], np.ndarray] = {}
    for event in events:
        for i, matrix in enumerate(event.embeddings):
            blocks[(event.event_id, i)] = matrix
    out = bytearray()
    out += EMBEDDINGS_MAGIC
    out += _U32.pack(d_tok)
    for (event_id, sent_idx), matrix in sorted(blocks.items()):
        raw = event_id.encode("utf-8")
        out += _U32.pack(len(raw))
        out += raw
        out += _U32.pack(sent_idx)
        out += _U32.pack(matrix.shape[0])
        out += np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    return bytes(out)


@dataclass
class PriceTable:
    stock_id: str
    granularity: str  # "minute" | "daily"
    rows: list[tuple[datetime, float, float, float, float, float]]

    def validate(self) -> None:
        if self.granularity not in ("minute", "daily"):
            raise IngestError(f"bad granularity {self.granularity!r}")
        for i, row in enumerate(self.rows):
            if i and row[0] <= self.rows[i - 1][0]:
                raise IngestError(
                    f"{self.stock_id}/{self.granularity}: timestamps not increasing at row {i}"
                )
            if min(row[1:5]) <= 0:
                raise IngestError(f"{self.stock_id}/{self.granularity}: non-positive price")


def _price_csv_bytes(table: PriceTable) -> bytes:
    lines = [",".join(PRICE_COLUMNS)]
    for ts, o, h, l, c, v in table.rows:
        lines.append(
            ",".join([ts.isoformat(), repr(float(o)), repr(float(h)),
                      repr(float(l)), repr(float(c)), repr(float(v))])
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_raw_price_dir(path: str | Path) -> list[PriceTable]:
    root = Path(path)
    tables = []
    for granularity in ("minute", "daily"):
        folder = root / granularity
        if not folder.is_dir():
            continue
        for file in sorted(folder.glob("*.csv")):
            with open(file, encoding="utf-8", newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header != PRICE_COLUMNS:
                    raise IngestError(f"{file}: bad header {header}")
                rows = []
                for lineno, row in enumerate(reader, start=2):
                    try:
                        rows.append((datetime.fromisoformat(row[0]), *map(float, row[1:6])))
                    except (ValueError, IndexError) as exc:
                        raise IngestError(f"{file} line {lineno}: {exc}") from None
            table = PriceTable(stock_id=file.stem, granularity=granularity, rows=rows)
            table.validate()
            tables.append(table)
    if not tables:
        raise IngestError(f"no price CSVs under {root}")
    return tables


def read_factors_csv(path: str | Path) -> dict[str, list[float]]:
    """stock_id -> 24 factor values; empty cells become NaN."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["stock_id", *FACTOR_NAMES]
        if header != expected:
            raise IngestError(f"{path}: bad factors header (expected stock_id + the "
                              f"{len(FACTOR_NAMES)} canonical factor names)")
        out: dict[str, list[float]] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise IngestError(f"{path} line {lineno}: expected {len(expected)} fields")
            out[row[0]] = [math.nan if cell == "" else float(cell) for cell in row[1:]]
    return out


def export(
    events: list[ExportEvent],
    prices: list[PriceTable],
    out_dir: str | Path,
    d_tok: int,
) -> dict[str, str]:
    """Write events.jsonl, embeddings.bin, and prices/ under out_dir.

    Everything is validated and serialized in memory first; nothing touches
    disk if any piece fails."""
    for event in events:
        event.validate(d_tok)
    ids = [e.event_id for e in events]
    if len(ids) != len(set(ids)):
        raise IngestError("duplicate event ids in export set")
    stock_times = [(e.stock_id, e.published_at) for e in events]
    if len(stock_times) != len(set(stock_times)):
        raise IngestError("two events share a stock and minute; timestamps must be unique")
    for table in prices:
        table.validate()

    payload: dict[Path, bytes] = {}
    out_root = Path(out_dir)
    payload[out_root / "events.jsonl"] = _events_bytes(events)
    payload[out_root / "embeddings.bin"] = _embeddings_bytes(events, d_tok)
    for table in prices:
        payload[out_root / "prices" / table.granularity / f"{table.stock_id}.csv"] = (
            _price_csv_bytes(table)
        )

    for path, data in payload.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    return {str(path): f"{len(data)} bytes" for path, data in payload.items()}
