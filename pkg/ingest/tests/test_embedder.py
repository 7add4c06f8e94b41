import numpy as np
import pytest

from srlp_ingest.embedder import HashedBackend, embed_tokens, make_backend
from srlp_ingest.records import IngestError
from srlp_ingest.tagger import TaggedSentence, tag_srl


class StubBackend:
    """Known per-sub-token vectors, for checking the pooling arithmetic."""

    def __init__(self, groups):
        self.groups = groups
        self.d_tok = groups[0].shape[1]

    def subtoken_vectors(self, tokens):
        return list(self.groups)


def test_single_token_sentence_shape():
    backend = HashedBackend(d_tok=12)
    matrices = embed_tokens([TaggedSentence(tokens=["hello"])], backend)
    assert matrices[0].shape == (1, 12)


def test_identical_sentences_embed_identically():
    backend = HashedBackend(d_tok=8)
    sentences = tag_srl("The company repurchases shares.")
    a = embed_tokens(sentences, backend)
    b = embed_tokens(tag_srl("The company repurchases shares."), HashedBackend(d_tok=8))
    np.testing.assert_array_equal(a[0], b[0])


def test_subtoken_mean_pooling_matches_external_recomputation():
    rng = np.random.default_rng(1)
    groups = [rng.normal(size=(3, 6)), rng.normal(size=(1, 6)), rng.normal(size=(2, 6))]
    backend = StubBackend(groups)
    sentence = TaggedSentence(tokens=["multi", "x", "word"])
    matrix = embed_tokens([sentence], backend)[0]
    for i, group in enumerate(groups):
        recomputed = sum(group[j] for j in range(group.shape[0])) / group.shape[0]
        np.testing.assert_allclose(matrix[i], recomputed, atol=1e-6)


def test_long_tokens_pool_their_pieces():
    backend = HashedBackend(d_tok=8, piece_len=4)
    token = "repurchases"  # 11 chars -> 3 pieces
    pieces = [token[i : i + 4] for i in range(0, len(token), 4)]
    expected = np.stack([backend._vector(p) for p in pieces]).mean(axis=0)
    matrix = embed_tokens([TaggedSentence(tokens=[token])], backend)[0]
    np.testing.assert_allclose(matrix[0], expected, atol=1e-12)


def test_make_backend_parses_hashed_ids():
    assert make_backend("hashed-24").d_tok == 24
    with pytest.raises(IngestError):
        HashedBackend(d_tok=0)


def test_group_count_mismatch_rejected():
    class Broken:
        d_tok = 4

        def subtoken_vectors(self, tokens):
            return [np.zeros((1, 4))]  # always one group

    with pytest.raises(IngestError):
        embed_tokens([TaggedSentence(tokens=["a", "b"])], Broken())
