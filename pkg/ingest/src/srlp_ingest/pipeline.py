"""End-to-end ingest: news -> tagged sentences -> embeddings -> export."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

from .embedder import embed_tokens, make_backend
from .exporter import ExportEvent, export, read_factors_csv, read_raw_price_dir
from .records import IngestError, read_news_dir
from .tagger import make_tagger, tag_srl

log = logging.getLogger("srlp_ingest.pipeline")


def ingest_run(
    news_dir: str | Path,
    model_id: str,
    factors_path: str | Path,
    prices_dir: str | Path,
    out_dir: str | Path,
    tagger_kind: str = "rule",
) -> dict:
    """Convert raw inputs into the pipeline's three files.

    Per-record failures (tagger, alignment, missing factors, timestamp
    collisions) skip that record with a logged reason; format-level
    violations abort before anything is written."""
    records = read_news_dir(news_dir)
    factors = read_factors_csv(factors_path)
    prices = read_raw_price_dir(prices_dir)
    tagger = make_tagger(tagger_kind)
    backend = make_backend(model_id)

    events: list[ExportEvent] = []
    skipped: list[tuple[str, str]] = []
    seen_stock_minutes: set[tuple[str, str]] = set()
    for record in records:
        text = f"{record.title}. {record.body}" if record.title else record.body
        try:
            sentences = tag_srl(text, tagger)
        except IngestError as exc:
            skipped.append((record.source_id, f"tagger: {exc}"))
            log.warning("skipping %s: tagger failed (%s)", record.source_id, exc)
            continue
        if not sentences:
            skipped.append((record.source_id, "no tokenizable sentences"))
            continue
        try:
            matrices = embed_tokens(sentences, backend)
        except IngestError as exc:
            skipped.append((record.source_id, f"embedding: {exc}"))
            log.warning("skipping %s: embedding failed (%s)", record.source_id, exc)
            continue
        if record.stock_id not in factors:
            skipped.append((record.source_id, "no factor row for stock"))
            continue
        published = record.published_at.replace(second=0, microsecond=0)
        minute_key = (record.stock_id, published.isoformat())
        if minute_key in seen_stock_minutes:
            skipped.append((record.source_id, "stock/minute collision"))
            continue
        seen_stock_minutes.add(minute_key)
        events.append(
            ExportEvent(
                event_id=record.source_id,
                stock_id=record.stock_id,
                published_at=published,
                sentences=sentences,
                embeddings=matrices,
                factors=factors[record.stock_id],
            )
        )

    written = export(events, prices, out_dir, d_tok=backend.d_tok)

    skipped_path = Path(out_dir) / "skipped_records.csv"
    with open(skipped_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source_id", "reason"])
        writer.writerows(skipped)

    return {
        "events": len(events),
        "skipped": len(skipped),
        "d_tok": backend.d_tok,
        "files": written,
    }
