"""Raw news records and the news-directory reader."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

log = logging.getLogger("srlp_ingest.records")


class IngestError(Exception):
    pass


@dataclass(frozen=True)
class RawNewsRecord:
    source_id: str
    stock_id: str
    published_at: datetime  # timezone-aware
    title: str
    body: str

    def __post_init__(self):
        if not self.body.strip():
            raise IngestError(f"record {self.source_id}: empty body")
        if self.published_at.tzinfo is None:
            raise IngestError(f"record {self.source_id}: timestamp lacks a UTC offset")


def parse_record(obj: dict, where: str) -> RawNewsRecord:
    try:
        return RawNewsRecord(
            source_id=str(obj["source_id"]),
            stock_id=str(obj["stock_id"]),
            published_at=datetime.fromisoformat(obj["published_at"]),
            title=str(obj.get("title", "")),
            body=str(obj["body"]),
        )
    except KeyError as exc:
        raise IngestError(f"{where}: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise IngestError(f"{where}: {exc}") from None


def read_news_dir(path: str | Path) -> list[RawNewsRecord]:
    """Read every *.jsonl file under `path`; records sorted by (time, id)."""
    root = Path(path)
    files = sorted(root.glob("*.jsonl"))
    if not files:
        raise IngestError(f"no .jsonl news files under {root}")
    records: list[RawNewsRecord] = []
    seen: set[str] = set()
    for file in files:
        with open(file, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IngestError(f"{file} line {lineno}: {exc.msg}") from None
                record = parse_record(obj, f"{file} line {lineno}")
                if record.source_id in seen:
                    raise IngestError(f"{file} line {lineno}: duplicate source_id "
                                      f"{record.source_id!r}")
                seen.add(record.source_id)
                records.append(record)
    records.sort(key=lambda r: (r.published_at, r.source_id))
    return records
