"""Predicate-argument tagging backends.

The rule tagger is a deterministic lexicon heuristic good enough to drive
the feature pipeline offline: one frame per predicate token, proto-agent =
the token span before it, proto-patient = the span after it. An LTP-backed
tagger can be plugged in where the model weights are available locally.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .records import IngestError

log = logging.getLogger("srlp_ingest.tagger")

_SENTENCE_SPLIT = re.compile(r"[.!?;。！？；]+")
_TOKEN = re.compile(r"\w+", re.UNICODE)

_VERB_STEMS = (
    "acquire", "announce", "approve", "boost", "buy", "complete", "cut", "deliver",
    "expand", "expect", "fall", "gain", "issue", "launch", "lose", "pay", "plan",
    "post", "raise", "reduce", "report", "repurchase", "rise", "sell", "sign",
    "slash", "suspend", "warn", "win",
)


def _inflect(stem: str) -> set[str]:
    forms = {stem, stem + "s", stem + "ed", stem + "es", stem + "d", stem + "ing"}
    if stem.endswith("e"):
        forms.add(stem[:-1] + "ing")
    return forms


VERB_LEXICON = frozenset(form for stem in _VERB_STEMS for form in _inflect(stem))


@dataclass(frozen=True)
class TagFrame:
    v: tuple[int, ...]
    a0: tuple[int, ...]
    a1: tuple[int, ...]

    @property
    def is_complete(self) -> bool:
        return bool(self.v) and bool(self.a0) and bool(self.a1)


@dataclass
class TaggedSentence:
    tokens: list[str]
    frames: list[TagFrame] = field(default_factory=list)


class RuleTagger:
    """Lexicon predicate spotting with span arguments; no external models."""

    def __init__(self, lexicon: frozenset[str] = VERB_LEXICON):
        self.lexicon = lexicon

    def tag(self, text: str) -> list[TaggedSentence]:
        sentences = []
        for chunk in _SENTENCE_SPLIT.split(text):
            tokens = _TOKEN.findall(chunk)
            if not tokens:
                continue
            verb_positions = [i for i, t in enumerate(tokens) if t.lower() in self.lexicon]
            frames = []
            for j, v in enumerate(verb_positions):
                prev_end = verb_positions[j - 1] + 1 if j > 0 else 0
                next_start = verb_positions[j + 1] if j + 1 < len(verb_positions) else len(tokens)
                frames.append(
                    TagFrame(
                        v=(v,),
                        a0=tuple(range(prev_end, v)),
                        a1=tuple(range(v + 1, next_start)),
                    )
                )
            sentences.append(TaggedSentence(tokens=tokens, frames=frames))
        return sentences


class LtpTagger:
    """Language Technology Platform wrapper; needs the ltp package and a
    locally cached model."""

    def __init__(self, model_path: str | None = None):
        try:
            from ltp import LTP  # type: ignore[import-not-found]
        except ImportError:
            raise IngestError(
                "ltp is not installed; use the rule tagger or install the "
                "'ltp' package with a local model"
            ) from None
        self._ltp = LTP(model_path) if model_path else LTP()

    def tag(self, text: str) -> list[TaggedSentence]:
        sentences = []
        for chunk in _SENTENCE_SPLIT.split(text):
            if not chunk.strip():
                continue
            result = self._ltp.pipeline([chunk], tasks=["cws", "srl"])
            tokens = result.cws[0]
            frames = []
            for item in result.srl[0]:
                spans = {"A0": (), "A1": ()}
                v_span: tuple[int, ...] = (item["index"],) if "index" in item else ()
                for role, start, end in item.get("arguments", []):
                    if role in spans:
                        spans[role] = tuple(range(start, end + 1))
                frames.append(TagFrame(v=v_span, a0=spans["A0"], a1=spans["A1"]))
            sentences.append(TaggedSentence(tokens=list(tokens), frames=frames))
        return sentences


def make_tagger(kind: str) -> RuleTagger | LtpTagger:
    if kind == "rule":
        return RuleTagger()
    if kind == "ltp":
        return LtpTagger()
    raise IngestError(f"unknown tagger {kind!r}; expected rule or ltp")


def tag_srl(text: str, tagger=None) -> list[TaggedSentence]:
    """Sentence-split, tokenize, and mark predicate-argument frames.

    Frames keep whatever the tagger produced, complete or not; dropping
    incomplete ones is the downstream consumer's call.
    """
    tagger = tagger or RuleTagger()
    sentences = tagger.tag(text)
    for s in sentences:
        n = len(s.tokens)
        for frame in s.frames:
            indices = frame.v + frame.a0 + frame.a1
            if indices and (min(indices) < 0 or max(indices) >= n):
                raise IngestError(f"tagger produced out-of-range indices for {s.tokens!r}")
    return sentences
