import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srlp.errors import ValidationError
from srlp.features import (
    N_MAX_DEFAULT,
    build_event_matrix,
    mask_matrix,
    pool_role,
    sample_mask,
)
from srlp.types import Role, SrlFrame

from conftest import make_event, make_sentence


def test_pool_single_index_is_identity():
    s = make_sentence(n_tokens=4, d_tok=3, seed=1)
    np.testing.assert_array_equal(pool_role(s, (2,)), s.embeddings[2])


def test_pool_mean_of_two_rows():
    emb = np.array([[1.0, 3.0], [3.0, 1.0]])
    s = make_sentence(n_tokens=2, d_tok=2, embeddings=emb)
    np.testing.assert_array_equal(pool_role(s, (0, 1)), [2.0, 2.0])


def test_pool_matches_naive_sum_oracle():
    rng = np.random.default_rng(9)
    s = make_sentence(n_tokens=5, d_tok=8, embeddings=rng.normal(size=(5, 8)))
    indices = (0, 2, 4)
    naive = sum(s.embeddings[i] for i in indices) / len(indices)
    np.testing.assert_allclose(pool_role(s, indices), naive, atol=1e-12)


def test_pool_permutation_invariant_and_linear():
    rng = np.random.default_rng(2)
    emb = rng.normal(size=(6, 4))
    s = make_sentence(n_tokens=6, d_tok=4, embeddings=emb)
    np.testing.assert_array_equal(pool_role(s, (1, 3, 5)), pool_role(s, (5, 1, 3)))
    s2 = make_sentence(n_tokens=6, d_tok=4, embeddings=2.5 * emb)
    np.testing.assert_allclose(pool_role(s2, (1, 3)), 2.5 * pool_role(s, (1, 3)))


def test_pool_empty_indices_rejected():
    with pytest.raises(ValidationError):
        pool_role(make_sentence(), ())


def test_single_frame_column_layout():
    emb = np.arange(6, dtype=np.float64).reshape(3, 2)
    s = make_sentence(n_tokens=3, d_tok=2, embeddings=emb)
    event = make_event(sentences=[s])
    factors = np.arange(24, dtype=np.float64) + 100
    m = build_event_matrix(event, factors)
    assert m.data.shape == (3 * 2 + 24, 1)
    np.testing.assert_array_equal(m.data[:2, 0], emb[0])  # V
    np.testing.assert_array_equal(m.data[2:4, 0], emb[1])  # A0
    np.testing.assert_array_equal(m.data[4:6, 0], emb[2])  # A1
    np.testing.assert_array_equal(m.data[6:, 0], factors)


def test_columns_in_document_order():
    rng = np.random.default_rng(4)
    s1 = make_sentence(
        n_tokens=6, d_tok=2, embeddings=rng.normal(size=(6, 2)),
        frames=[
            SrlFrame((0,), (1,), (2,)),
            SrlFrame((3,), (4,), (5,)),
        ],
    )
    s2 = make_sentence(n_tokens=3, d_tok=2, embeddings=rng.normal(size=(3, 2)))
    event = make_event(sentences=[s1, s2])
    m = build_event_matrix(event, np.zeros(4))
    assert m.n_frames == 3
    np.testing.assert_array_equal(m.data[:2, 0], s1.embeddings[0])
    np.testing.assert_array_equal(m.data[:2, 1], s1.embeddings[3])
    np.testing.assert_array_equal(m.data[:2, 2], s2.embeddings[0])
    # factor rows identical across columns
    assert np.all(m.data[6:, :] == m.data[6:, :1])


def test_truncation_to_n_max():
    frames = [SrlFrame((3 * j,), (3 * j + 1,), (3 * j + 2,)) for j in range(40)]
    s = make_sentence(
        n_tokens=120, d_tok=2, frames=frames,
        embeddings=np.arange(240, dtype=np.float64).reshape(120, 2),
    )
    event = make_event(sentences=[s])
    m = build_event_matrix(event, np.zeros(4), n_max=N_MAX_DEFAULT)
    assert m.n_frames == 32
    np.testing.assert_array_equal(m.data[:2, 31], s.embeddings[93])  # 32nd frame kept


def test_incomplete_frames_dropped_and_empty_event_rejected():
    s = make_sentence(
        n_tokens=3, d_tok=2,
        frames=[SrlFrame((0,), (), (2,))],  # missing A0
        embeddings=np.zeros((3, 2)),
    )
    event = make_event(sentences=[s])
    assert event.complete_frames() == []
    with pytest.raises(ValidationError):
        build_event_matrix(event, np.zeros(4))


def test_mask_zeroes_exactly_one_role_segment():
    rng = np.random.default_rng(7)
    s = make_sentence(
        n_tokens=6, d_tok=3, embeddings=rng.normal(size=(6, 3)),
        frames=[SrlFrame((0,), (1,), (2,)), SrlFrame((3,), (4,), (5,))],
    )
    event = make_event(sentences=[s], d_tok=3)
    m = build_event_matrix(event, rng.normal(size=24))
    masked = mask_matrix(m, t=1, role=Role.A1)
    assert masked.mask.t == 1 and masked.mask.role is Role.A1
    diff = masked.data != m.data
    changed = np.argwhere(diff)
    assert {tuple(c) for c in changed} == {(r, 1) for r in range(2 * 3, 3 * 3)}
    assert np.all(masked.data[2 * 3 : 3 * 3, 1] == 0.0)
    # input untouched, exactly d_tok entries changed
    assert diff.sum() == 3


def test_mask_v_changes_leading_segment():
    rng = np.random.default_rng(8)
    s = make_sentence(n_tokens=3, d_tok=2, embeddings=rng.normal(size=(3, 2)))
    event = make_event(sentences=[s], d_tok=2)
    m = build_event_matrix(event, rng.normal(size=24))
    masked = mask_matrix(m, 0, Role.V)
    assert np.all(masked.data[:2, 0] == 0.0)
    np.testing.assert_array_equal(masked.data[2:, 0], m.data[2:, 0])


def test_double_mask_and_bad_index_rejected():
    s = make_sentence(n_tokens=3, d_tok=2, embeddings=np.ones((3, 2)))
    event = make_event(sentences=[s], d_tok=2)
    m = build_event_matrix(event, np.zeros(24))
    masked = mask_matrix(m, 0, Role.V)
    with pytest.raises(ValidationError):
        mask_matrix(masked, 0, Role.A0)
    with pytest.raises(ValidationError):
        mask_matrix(m, 1, Role.V)


def test_sample_mask_singleton_and_determinism():
    rng = np.random.default_rng(0)
    assert sample_mask(rng, 1)[0] == 0
    a = [sample_mask(np.random.default_rng(5), 7, "uniform") for _ in range(20)]
    b = [sample_mask(np.random.default_rng(5), 7, "uniform") for _ in range(20)]
    assert a == b
    with pytest.raises(ValidationError):
        sample_mask(rng, 0)
    with pytest.raises(ValidationError):
        sample_mask(rng, 3, "nonsense")


def test_sample_mask_frequencies():
    rng = np.random.default_rng(123)
    counts_t = np.zeros(4)
    counts_role = {Role.V: 0, Role.A0: 0, Role.A1: 0}
    n = 100_000
    for _ in range(n):
        t, role = sample_mask(rng, 4, "uniform")
        counts_t[t] += 1
        counts_role[role] += 1
    np.testing.assert_allclose(counts_t / n, 0.25, atol=0.006)
    for role, count in counts_role.items():
        assert abs(count / n - 1 / 3) < 0.006
    # default preset concentrates on V
    rng = np.random.default_rng(1)
    roles = {sample_mask(rng, 4)[1] for _ in range(200)}
    assert roles == {Role.V}
    rng = np.random.default_rng(2)
    roles = {sample_mask(rng, 4, "a0_a1")[1] for _ in range(200)}
    assert roles == {Role.A0, Role.A1}


@settings(max_examples=40, deadline=None)
@given(
    n_tokens=st.integers(min_value=3, max_value=10),
    d_tok=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_pool_role_mean_property(n_tokens, d_tok, seed):
    rng = np.random.default_rng(seed)
    emb = rng.normal(size=(n_tokens, d_tok))
    s = make_sentence(n_tokens=n_tokens, d_tok=d_tok, embeddings=emb)
    indices = tuple(sorted(rng.choice(n_tokens, size=rng.integers(1, n_tokens + 1), replace=False)))
    np.testing.assert_allclose(pool_role(s, indices), emb[list(indices)].mean(axis=0), atol=1e-12)
