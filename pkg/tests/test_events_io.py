import numpy as np
import pytest

from srlp.embeddings_io import read_embeddings, write_embeddings
from srlp.errors import FormatError
from srlp.events_io import parse_events, read_events, write_events

from conftest import make_event, make_sentence


def _write_corpus(tmp_path, events, blocks, d_tok=4):
    events_path = tmp_path / "events.jsonl"
    emb_path = tmp_path / "emb.bin"
    write_events(events, events_path)
    write_embeddings(d_tok, blocks, emb_path)
    return events_path, emb_path


def test_empty_events_file(tmp_path):
    events_path = tmp_path / "events.jsonl"
    events_path.write_text("")
    emb_path = tmp_path / "emb.bin"
    write_embeddings(4, {}, emb_path)
    assert parse_events(events_path, emb_path) == []


def test_single_event_round_trip(tmp_path):
    emb = np.arange(12, dtype=np.float64).reshape(3, 4)
    event = make_event(sentences=[make_sentence(n_tokens=3, d_tok=4, embeddings=emb)])
    events_path, emb_path = _write_corpus(tmp_path, [event], {("e1", 0): emb})
    corpus = parse_events(events_path, emb_path)
    assert len(corpus) == 1
    assert corpus[0].sentences[0].embeddings.shape == (3, 4)
    np.testing.assert_allclose(corpus[0].sentences[0].embeddings, emb)


def test_frame_index_out_of_range_names_event(tmp_path):
    from srlp.types import SrlFrame

    bad_frame = SrlFrame(v_indices=(7,), a0_indices=(0,), a1_indices=(1,))
    event = make_event(
        event_id="bad-ev",
        sentences=[make_sentence(n_tokens=5, frames=[bad_frame])],
    )
    events_path = tmp_path / "events.jsonl"
    write_events([event], events_path)
    with pytest.raises(FormatError, match="bad-ev"):
        read_events(events_path)


def test_malformed_json_names_line(tmp_path):
    events_path = tmp_path / "events.jsonl"
    events_path.write_text('{"event_id": "a"}\n{broken\n')
    with pytest.raises(FormatError, match="line 1"):
        read_events(events_path)  # first line is missing fields
    events_path.write_text("{broken}\n")
    with pytest.raises(FormatError, match="line 1"):
        read_events(events_path)


def test_embedding_dimension_mismatch_names_event(tmp_path):
    emb = np.zeros((2, 4))  # sentence has 3 tokens
    event = make_event(event_id="mismatch")
    events_path, emb_path = _write_corpus(tmp_path, [event], {("mismatch", 0): emb})
    with pytest.raises(FormatError, match="mismatch"):
        parse_events(events_path, emb_path)


def test_dangling_embedding_reference(tmp_path):
    event = make_event(event_id="known")
    events_path, emb_path = _write_corpus(
        tmp_path, [event], {("known", 0): np.zeros((3, 4)), ("ghost", 0): np.zeros((1, 4))}
    )
    with pytest.raises(FormatError, match="ghost"):
        parse_events(events_path, emb_path)


def test_missing_embedding_block(tmp_path):
    event = make_event(event_id="lonely")
    events_path, emb_path = _write_corpus(tmp_path, [event], {})
    with pytest.raises(FormatError, match="lonely"):
        parse_events(events_path, emb_path)


def test_duplicate_event_id_rejected(tmp_path):
    events_path = tmp_path / "events.jsonl"
    a = make_event(event_id="dup", published="2021-01-04T09:31:00+08:00")
    b = make_event(event_id="dup", stock_id="S002", published="2021-01-04T09:32:00+08:00")
    import json

    from srlp.events_io import event_to_obj

    events_path.write_text(
        "\n".join(json.dumps(event_to_obj(e)) for e in (a, b)) + "\n"
    )
    with pytest.raises(FormatError, match="duplicate"):
        read_events(events_path)


def test_corpus_ordered_by_time_then_id(tmp_path):
    events = [
        make_event(event_id="b", published="2021-01-04T10:00:00+08:00"),
        make_event(event_id="a", stock_id="S002", published="2021-01-04T10:00:00+08:00"),
        make_event(event_id="c", stock_id="S003", published="2021-01-04T09:00:00+08:00"),
    ]
    events_path = tmp_path / "events.jsonl"
    write_events(events, events_path)
    assert [e.event_id for e in read_events(events_path)] == ["c", "a", "b"]


def test_write_parse_write_is_byte_identical(tmp_path):
    events = [
        make_event(event_id="e1", return_rate=0.031, factors=np.arange(24.0)),
        make_event(
            event_id="e2", stock_id="S009", published="2021-02-01T14:59:00+08:00",
            factors=[float("nan") if i == 3 else float(i) for i in range(24)],
        ),
    ]
    p1 = tmp_path / "one.jsonl"
    p2 = tmp_path / "two.jsonl"
    write_events(events, p1)
    write_events(read_events(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_embeddings_binary_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    blocks = {
        ("ev1", 0): rng.normal(size=(3, 6)).astype(np.float32).astype(np.float64),
        ("ev1", 1): rng.normal(size=(1, 6)).astype(np.float32).astype(np.float64),
        ("ev2", 0): rng.normal(size=(4, 6)).astype(np.float32).astype(np.float64),
    }
    path = tmp_path / "emb.bin"
    write_embeddings(6, blocks, path)
    d_tok, loaded = read_embeddings(path)
    assert d_tok == 6
    assert set(loaded) == set(blocks)
    for key in blocks:
        np.testing.assert_array_equal(loaded[key], blocks[key])
    # writer(reader(x)) is byte-identical
    path2 = tmp_path / "emb2.bin"
    write_embeddings(d_tok, loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_embeddings_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC")
    with pytest.raises(FormatError, match="magic"):
        read_embeddings(path)
    good = tmp_path / "good.bin"
    write_embeddings(4, {("e", 0): np.zeros((2, 4))}, good)
    truncated = good.read_bytes()[:-5]
    bad = tmp_path / "trunc.bin"
    bad.write_bytes(truncated)
    with pytest.raises(FormatError, match="truncated"):
        read_embeddings(bad)
