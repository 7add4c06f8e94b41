"""Ingest toolkit: raw news + market data in, movement-pipeline files out."""

from .records import RawNewsRecord, read_news_dir
from .tagger import RuleTagger, TaggedSentence, TagFrame
from .embedder import HashedBackend, embed_tokens
from .exporter import export
from .pipeline import ingest_run

__version__ = "0.1.0"

__all__ = [
    "RawNewsRecord", "read_news_dir", "RuleTagger", "TaggedSentence", "TagFrame",
    "HashedBackend", "embed_tokens", "export", "ingest_run",
]
