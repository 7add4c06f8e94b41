"""Role-pooled event features: the per-frame column matrix and its masked variant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .types import NewsEvent, Role, TokenizedSentence

N_MAX_DEFAULT = 32

# Column layout: [e_v; e_a0; e_a1; factors].
_ROLE_ORDER = (Role.V, Role.A0, Role.A1)

MASK_PRESETS: dict[str, dict[Role, float]] = {
    "v_only": {Role.V: 1.0},
    "a0_a1": {Role.A0: 0.5, Role.A1: 0.5},
    "uniform": {Role.V: 1 / 3, Role.A0: 1 / 3, Role.A1: 1 / 3},
}


@dataclass(frozen=True)
class MaskInfo:
    t: int
    role: Role


@dataclass
class SrlpMatrix:
    """Per-event feature matrix; one column per complete frame."""

    data: np.ndarray  # (3*d_tok + d_factor, n_frames) float64
    d_tok: int
    d_factor: int
    mask: MaskInfo | None = None

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    def role_slice(self, role: Role) -> slice:
        i = _ROLE_ORDER.index(role)
        return slice(i * self.d_tok, (i + 1) * self.d_tok)

    def role_block(self, role: Role) -> np.ndarray:
        """(n_frames, d_tok) pooled features of one role, frame order."""
        return self.data[self.role_slice(role), :].T.copy()

    def factor_block(self) -> np.ndarray:
        return self.data[3 * self.d_tok :, :].T.copy()


def pool_role(sentence: TokenizedSentence, indices: tuple[int, ...]) -> np.ndarray:
    """Arithmetic mean of the embedding rows at the given token indices."""
    if not indices:
        raise ValidationError("cannot pool an empty index set")
    if sentence.embeddings is None:
        raise ValidationError("sentence has no embeddings attached")
    rows = np.unique(np.asarray(indices, dtype=np.intp))  # set semantics, stable order
    if rows[0] < 0 or rows[-1] >= sentence.embeddings.shape[0]:
        raise ValidationError(f"pool indices {indices} out of range")
    return sentence.embeddings[rows].mean(axis=0)


def build_event_matrix(
    event: NewsEvent, scaled_factors: np.ndarray, n_max: int = N_MAX_DEFAULT
) -> SrlpMatrix:
    """Stack [e_v; e_a0; e_a1; F] columns for every complete frame in
    document order, truncated to n_max. The factor segment repeats per column."""
    frames = event.complete_frames()
    if not frames:
        raise ValidationError(f"event {event.event_id} has no complete SRL frames")
    frames = frames[:n_max]
    scaled_factors = np.asarray(scaled_factors, dtype=np.float64)
    columns = []
    for sentence, frame in frames:
        parts = [pool_role(sentence, frame.indices(role)) for role in _ROLE_ORDER]
        columns.append(np.concatenate(parts + [scaled_factors]))
    data = np.stack(columns, axis=1)
    d_tok = frames[0][0].embeddings.shape[1]
    return SrlpMatrix(data=data, d_tok=d_tok, d_factor=scaled_factors.shape[0])


def mask_matrix(matrix: SrlpMatrix, t: int, role: Role) -> SrlpMatrix:
    """Copy with the chosen role segment of column t zeroed; factors untouched."""
    if matrix.mask is not None:
        raise ValidationError("matrix is already masked")
    if not 0 <= t < matrix.n_frames:
        raise ValidationError(f"mask index {t} out of range for {matrix.n_frames} frames")
    data = matrix.data.copy()
    data[matrix.role_slice(role), t] = 0.0
    return SrlpMatrix(
        data=data, d_tok=matrix.d_tok, d_factor=matrix.d_factor, mask=MaskInfo(t=t, role=role)
    )


def sample_mask(
    rng: np.random.Generator, n_frames: int, preset: str = "v_only"
) -> tuple[int, Role]:
    """Uniform frame index plus a role drawn from the preset distribution."""
    if n_frames < 1:
        raise ValidationError("cannot sample a mask for an empty matrix")
    if preset not in MASK_PRESETS:
        raise ValidationError(f"unknown mask preset {preset!r}; have {sorted(MASK_PRESETS)}")
    t = int(rng.integers(n_frames))
    dist = MASK_PRESETS[preset]
    roles = [r for r in _ROLE_ORDER if r in dist]
    probs = np.array([dist[r] for r in roles])
    role = roles[int(rng.choice(len(roles), p=probs / probs.sum()))]
    return t, role
