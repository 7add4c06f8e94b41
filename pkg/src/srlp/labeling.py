"""Quantile-rank label derivation from per-event returns."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .types import Label, LabelThresholds, NewsEvent, sort_events


@dataclass(frozen=True)
class ExclusionRecord:
    event_id: str
    reason: str
    detail: str = ""


def derive_labels(
    events: list[NewsEvent], thresholds: LabelThresholds = LabelThresholds()
) -> tuple[list[NewsEvent], list[ExclusionRecord]]:
    """Rank events by return descending and slice into the three classes.

    Rank index i in 0..n-1 maps to percentile p = 100*i/n; p < a is
    outperforming, b <= p < c neutral, p >= 100-d underperforming. The
    bands [a, b) and [c, 100-d) are dropped to keep only strong signals.
    Ties break by event_id ascending.
    """
    if not events:
        raise ValidationError("cannot derive labels from an empty corpus")
    for event in events:
        if event.return_rate is None:
            raise ValidationError(f"event {event.event_id} has no return_rate")

    ranked = sorted(events, key=lambda e: (-e.return_rate, e.event_id))
    n = len(ranked)
    labeled: list[NewsEvent] = []
    excluded: list[ExclusionRecord] = []
    for i, event in enumerate(ranked):
        p = 100.0 * i / n
        if p < thresholds.a:
            labeled.append(event.with_label(Label.OUTPERFORMING))
        elif p < thresholds.b:
            excluded.append(ExclusionRecord(event.event_id, "rank_band_a_b", f"percentile={p:g}"))
        elif p < thresholds.c:
            labeled.append(event.with_label(Label.NEUTRAL))
        elif p < 100.0 - thresholds.d:
            excluded.append(ExclusionRecord(event.event_id, "rank_band_c_d", f"percentile={p:g}"))
        else:
            labeled.append(event.with_label(Label.UNDERPERFORMING))
    return sort_events(labeled), excluded
