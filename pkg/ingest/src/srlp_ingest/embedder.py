"""Token embedding backends with sub-token mean pooling.

Every backend yields, per SRL token, the vectors of its sub-tokens; the
pooled row is their arithmetic mean, keeping the one-embedding-per-token
contract the downstream pooling math assumes.
"""

from __future__ import annotations

import hashlib
import logging
import re

import numpy as np

from .records import IngestError
from .tagger import TaggedSentence

log = logging.getLogger("srlp_ingest.embedder")

_HASHED_ID = re.compile(r"^hashed-(\d+)$")


class HashedBackend:
    """Deterministic offline embedder: each sub-token's vector is seeded by a
    stable content hash, so identical text embeds identically across runs
    and machines. Long tokens split into 4-character pieces to exercise the
    pooling path."""

    def __init__(self, d_tok: int = 16, piece_len: int = 4):
        if d_tok <= 0:
            raise IngestError("d_tok must be positive")
        self.d_tok = d_tok
        self.piece_len = piece_len

    def _vector(self, piece: str) -> np.ndarray:
        digest = hashlib.blake2b(piece.encode("utf-8"), digest_size=8).digest()
        seed = int.from_bytes(digest, "little")
        return np.random.default_rng(seed).normal(size=self.d_tok)

    def subtoken_vectors(self, tokens: list[str]) -> list[np.ndarray]:
        out = []
        for token in tokens:
            pieces = [token[i : i + self.piece_len] for i in range(0, len(token), self.piece_len)]
            out.append(np.stack([self._vector(p) for p in pieces]))
        return out


class TransformersBackend:
    """Pretrained-LM embedder (eval mode); needs transformers+torch and a
    locally cached model."""

    def __init__(self, model_id: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError:
            raise IngestError(
                "transformers/torch not installed; use a hashed-D model id for "
                "offline embedding"
            ) from None
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModel.from_pretrained(model_id).eval()
        self.d_tok = int(self.model.config.hidden_size)

    def subtoken_vectors(self, tokens: list[str]) -> list[np.ndarray]:
        encoded = self.tokenizer(tokens, is_split_into_words=True, return_tensors="pt")
        with self._torch.no_grad():
            hidden = self.model(**encoded).last_hidden_state[0].double().numpy()
        groups: dict[int, list[np.ndarray]] = {}
        for position, word_id in enumerate(encoded.word_ids(0)):
            if word_id is not None:
                groups.setdefault(word_id, []).append(hidden[position])
        missing = [i for i in range(len(tokens)) if i not in groups]
        if missing:
            raise IngestError(f"tokenizer alignment lost tokens at {missing}")
        return [np.stack(groups[i]) for i in range(len(tokens))]


def make_backend(model_id: str):
    match = _HASHED_ID.match(model_id)
    if match:
        return HashedBackend(d_tok=int(match.group(1)))
    return TransformersBackend(model_id)


def embed_tokens(sentences: list[TaggedSentence], backend) -> list[np.ndarray]:
    """One (token_count, d_tok) float64 matrix per sentence; each row is the
    mean of that token's sub-token vectors."""
    matrices = []
    for sentence in sentences:
        vectors = backend.subtoken_vectors(sentence.tokens)
        if len(vectors) != len(sentence.tokens):
            raise IngestError(
                f"backend returned {len(vectors)} groups for {len(sentence.tokens)} tokens"
            )
        rows = [np.asarray(group, dtype=np.float64).mean(axis=0) for group in vectors]
        matrix = np.stack(rows) if rows else np.zeros((0, backend.d_tok))
        if matrix.shape[1] != backend.d_tok:
            raise IngestError(
                f"backend width {matrix.shape[1]} != advertised d_tok {backend.d_tok}"
            )
        matrices.append(matrix)
    return matrices
