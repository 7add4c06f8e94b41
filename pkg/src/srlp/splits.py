"""Dataset splitting: seeded in-distribution 80/10/10 or date-cutoff OOD."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import ValidationError
from .types import NewsEvent, sort_events


@dataclass(frozen=True)
class InDistribution:
    seed: int = 0


@dataclass(frozen=True)
class OutOfDistribution:
    cutoff: datetime  # train strictly before, ood_test at/after


def split_dataset(
    events: list[NewsEvent], scheme: InDistribution | OutOfDistribution
) -> dict[str, list[NewsEvent]]:
    ordered = sort_events(events)
    if isinstance(scheme, InDistribution):
        n = len(ordered)
        perm = np.random.default_rng(scheme.seed).permutation(n)
        n_train = int(0.8 * n)
        n_val = int(0.9 * n) - n_train
        parts = {
            "train": [ordered[i] for i in perm[:n_train]],
            "validation": [ordered[i] for i in perm[n_train : n_train + n_val]],
            "test": [ordered[i] for i in perm[n_train + n_val :]],
        }
    elif isinstance(scheme, OutOfDistribution):
        if scheme.cutoff.tzinfo is None:
            raise ValidationError("OOD cutoff must be timezone-aware")
        parts = {
            "train": [e for e in ordered if e.published_at < scheme.cutoff],
            "ood_test": [e for e in ordered if e.published_at >= scheme.cutoff],
        }
    else:
        raise ValidationError(f"unknown split scheme {scheme!r}")

    for name, part in parts.items():
        if not part:
            raise ValidationError(f"split produced an empty {name} partition")
    return {name: sort_events(part) for name, part in parts.items()}
