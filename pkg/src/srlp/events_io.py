"""Line-delimited JSON events file: parsing, validation, canonical writer."""

from __future__ import annotations

import json
import math
from datetime import datetime
from pathlib import Path

import numpy as np

from .embeddings_io import read_embeddings
from .errors import FormatError, ValidationError
from .types import (
    FACTOR_DIM,
    FactorVector,
    Label,
    NewsEvent,
    SrlFrame,
    TokenizedSentence,
    sort_events,
)


def _parse_indices(raw, where: str) -> tuple[int, ...]:
    if not isinstance(raw, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in raw):
        raise FormatError(f"{where}: role indices must be an array of integers")
    return tuple(raw)


def _parse_event(obj: dict, where: str) -> NewsEvent:
    try:
        event_id = obj["event_id"]
        stock_id = obj["stock_id"]
        published_raw = obj["published_at"]
        sentences_raw = obj["sentences"]
        factors_raw = obj["factors"]
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None
    if not isinstance(event_id, str) or not event_id:
        raise FormatError(f"{where}: event_id must be a non-empty string")
    try:
        published_at = datetime.fromisoformat(published_raw)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: bad published_at {published_raw!r}") from None
    if published_at.tzinfo is None:
        raise FormatError(f"{where}: published_at lacks a UTC offset")

    sentences = []
    for s in sentences_raw:
        frames = [
            SrlFrame(
                v_indices=_parse_indices(f.get("v", []), where),
                a0_indices=_parse_indices(f.get("a0", []), where),
                a1_indices=_parse_indices(f.get("a1", []), where),
            )
            for f in s.get("frames", [])
        ]
        tokens = s["tokens"]
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise FormatError(f"{where}: sentence tokens must be an array of strings")
        sentences.append(TokenizedSentence(tokens=tokens, frames=frames))

    if not isinstance(factors_raw, list) or len(factors_raw) != FACTOR_DIM:
        raise FormatError(f"{where}: factors must be an array of {FACTOR_DIM} numbers or nulls")
    values = np.array(
        [math.nan if v is None else float(v) for v in factors_raw], dtype=np.float64
    )

    label = None
    if obj.get("label") is not None:
        try:
            label = Label(obj["label"])
        except ValueError:
            raise FormatError(f"{where}: unknown label {obj['label']!r}") from None

    event = NewsEvent(
        event_id=event_id,
        stock_id=stock_id,
        published_at=published_at,
        sentences=sentences,
        factors=FactorVector(values),
        return_rate=None if obj.get("return_rate") is None else float(obj["return_rate"]),
        label=label,
    )
    try:
        event.validate()
    except ValidationError as exc:
        raise FormatError(f"{where}: {exc}") from None
    return event


def read_events(path: str | Path) -> list[NewsEvent]:
    """Read an events JSONL file; embeddings stay unattached."""
    events = []
    seen_ids: set[str] = set()
    seen_stock_times: set[tuple[str, datetime]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"malformed JSON: {exc.msg}", path=str(path), line=lineno) from None
            if not isinstance(obj, dict):
                raise FormatError("record is not a JSON object", path=str(path), line=lineno)
            event = _parse_event(obj, where)
            if event.event_id in seen_ids:
                raise FormatError(f"{where}: duplicate event_id {event.event_id!r}")
            seen_ids.add(event.event_id)
            key = (event.stock_id, event.published_at)
            if key in seen_stock_times:
                raise FormatError(
                    f"{where}: event {event.event_id} repeats published_at for stock "
                    f"{event.stock_id} (per-stock timestamps must be strictly increasing)"
                )
            seen_stock_times.add(key)
            events.append(event)
    return sort_events(events)


def attach_embeddings(
    events: list[NewsEvent], embeddings_path: str | Path, allow_extra: bool = False
) -> int:
    """Attach per-sentence embedding matrices in place; returns d_tok.

    With allow_extra the file may cover a superset of the events (the usual
    case when feeding one corpus-wide file to a split); otherwise a block
    referencing an unknown event is a dangling-reference error.
    """
    d_tok, blocks = read_embeddings(embeddings_path)
    by_id = {e.event_id: e for e in events}
    for event_id, sent_idx in blocks:
        if event_id not in by_id:
            if allow_extra:
                continue
            raise FormatError(
                f"{embeddings_path}: embedding references unknown event {event_id!r}"
            )
        if sent_idx >= len(by_id[event_id].sentences):
            raise FormatError(
                f"{embeddings_path}: event {event_id} has no sentence {sent_idx}"
            )
    for event in events:
        for i, sentence in enumerate(event.sentences):
            key = (event.event_id, i)
            if key not in blocks:
                raise FormatError(
                    f"{embeddings_path}: missing embeddings for event {event.event_id} "
                    f"sentence {i}"
                )
            matrix = blocks[key]
            if matrix.shape[0] != len(sentence.tokens):
                raise FormatError(
                    f"{embeddings_path}: event {event.event_id} sentence {i} has "
                    f"{matrix.shape[0]} embedding rows for {len(sentence.tokens)} tokens"
                )
            sentence.embeddings = matrix
    return d_tok


def parse_events(
    events_path: str | Path, embeddings_path: str | Path, allow_extra: bool = False
) -> list[NewsEvent]:
    """Load events and embeddings together, in canonical order."""
    events = read_events(events_path)
    attach_embeddings(events, embeddings_path, allow_extra=allow_extra)
    return events


def _json_factor(v: float):
    return None if math.isnan(v) else float(v)


def event_to_obj(event: NewsEvent) -> dict:
    obj = {
        "event_id": event.event_id,
        "stock_id": event.stock_id,
        "published_at": event.published_at.isoformat(),
        "sentences": [
            {
                "tokens": list(s.tokens),
                "frames": [
                    {"v": list(f.v_indices), "a0": list(f.a0_indices), "a1": list(f.a1_indices)}
                    for f in s.frames
                ],
            }
            for s in event.sentences
        ],
        "factors": [_json_factor(v) for v in event.factors.values],
    }
    if event.return_rate is not None:
        obj["return_rate"] = float(event.return_rate)
    if event.label is not None:
        obj["label"] = event.label.value
    return obj


def write_events(events: list[NewsEvent], path: str | Path) -> None:
    """Canonical writer: fixed key order, compact separators, sorted corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for event in sort_events(events):
            fh.write(json.dumps(event_to_obj(event), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
