"""Binary token-embedding file.

Layout: magic "SRLPEMB1", little-endian u32 d_tok, then one record per
sentence: u32 id length, UTF-8 event id, u32 sentence index, u32 token
count, token_count * d_tok little-endian f32 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SRLPEMB1"
_U32 = struct.Struct("<I")


def write_embeddings(
    d_tok: int, blocks: dict[tuple[str, int], np.ndarray], path: str | Path
) -> None:
    """Write sentence embedding matrices keyed by (event_id, sentence_index)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U32.pack(d_tok))
        for (event_id, sent_idx), matrix in sorted(blocks.items()):
            matrix = np.asarray(matrix)
            if matrix.ndim != 2 or matrix.shape[1] != d_tok:
                raise FormatError(
                    f"embedding block {event_id}/{sent_idx} has shape {matrix.shape}, "
                    f"expected (*, {d_tok})"
                )
            raw = event_id.encode("utf-8")
            fh.write(_U32.pack(len(raw)))
            fh.write(raw)
            fh.write(_U32.pack(sent_idx))
            fh.write(_U32.pack(matrix.shape[0]))
            fh.write(matrix.astype("<f4").tobytes())


def read_embeddings(path: str | Path) -> tuple[int, dict[tuple[str, int], np.ndarray]]:
    """Read the file back as float64 matrices keyed by (event_id, sentence_index)."""
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError("bad magic, not an embeddings file", path=str(path), offset=0)
    pos = len(MAGIC)

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated while reading {what}", path=str(path), offset=pos)
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    def take_u32(what: str) -> int:
        return _U32.unpack(take(4, what))[0]

    d_tok = take_u32("d_tok")
    if d_tok == 0:
        raise FormatError("d_tok must be positive", path=str(path), offset=len(MAGIC))
    blocks: dict[tuple[str, int], np.ndarray] = {}
    while pos < len(data):
        id_len = take_u32("id length")
        try:
            event_id = take(id_len, "event id").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("event id is not valid UTF-8", path=str(path), offset=pos) from None
        sent_idx = take_u32("sentence index")
        token_count = take_u32("token count")
        values = np.frombuffer(
            take(4 * token_count * d_tok, f"values of {event_id}/{sent_idx}"), dtype="<f4"
        )
        key = (event_id, sent_idx)
        if key in blocks:
            raise FormatError(
                f"duplicate embedding block for {event_id}/{sent_idx}", path=str(path), offset=pos
            )
        blocks[key] = values.reshape(token_count, d_tok).astype(np.float64)
    return d_tok, blocks
