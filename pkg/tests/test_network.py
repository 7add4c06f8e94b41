import json
from pathlib import Path

import numpy as np
import pytest

from srlp.errors import ConfigError, ValidationError
from srlp.features import SrlpMatrix, mask_matrix
from srlp.nn import network as net
from srlp.nn.params import ModelConfig, expected_shapes, init_params
from srlp.types import Role

DATA = Path(__file__).parent / "data"

SMALL = ModelConfig(d_tok=4, d_factor=3, d_model=8, n_layers=1, n_heads=2,
                    ffn_ratio=4, n_max=4, dropout=0.0)


def small_matrix(n_frames=3, seed=77, cfg=SMALL):
    data = np.random.default_rng(seed).normal(size=(cfg.d_in, n_frames))
    return SrlpMatrix(data=data, d_tok=cfg.d_tok, d_factor=cfg.d_factor)


def zero_params(cfg=SMALL):
    return {name: np.zeros(shape) for name, shape in expected_shapes(cfg).items()}


def test_zero_params_logits_equal_classifier_bias():
    params = zero_params()
    params["cls.b"] = np.array([0.1, 0.2, 0.3])
    for seed in (1, 2, 3):
        out = net.forward_classify(small_matrix(seed=seed), params, SMALL)
        np.testing.assert_allclose(out.logits, [0.1, 0.2, 0.3], atol=1e-15)


def test_mean_pool_invariance_under_column_duplication():
    params = init_params(SMALL, np.random.default_rng(5))
    params["pos"][:] = 0.0  # make positions indistinguishable
    single = small_matrix(n_frames=1, seed=9)
    doubled = SrlpMatrix(
        data=np.repeat(single.data, 2, axis=1), d_tok=SMALL.d_tok, d_factor=SMALL.d_factor
    )
    a = net.forward_classify(single, params, SMALL).logits
    b = net.forward_classify(doubled, params, SMALL).logits
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_forward_matches_golden_file():
    golden = json.loads((DATA / "golden_forward.json").read_text())
    cfg = ModelConfig(**golden["config"])
    params = init_params(cfg, np.random.default_rng(golden["param_seed"]))
    data = np.random.default_rng(golden["matrix_seed"]).normal(
        size=(cfg.d_in, golden["n_frames"])
    )
    matrix = SrlpMatrix(data=data, d_tok=cfg.d_tok, d_factor=cfg.d_factor)
    out = net.forward_classify(matrix, params, cfg)
    np.testing.assert_allclose(out.logits, golden["logits"], atol=1e-6)
    masked = mask_matrix(matrix, golden["mask"]["t"], Role(golden["mask"]["role"]))
    ssl = net.forward_ssl(masked, matrix.role_block(Role.V), params, cfg)
    np.testing.assert_allclose(ssl.p_ssl, golden["p_ssl"], atol=1e-6)


def test_softmax_properties():
    rng = np.random.default_rng(0)
    x = rng.normal(scale=50, size=(4, 7))  # stress stability
    p = net.softmax(x)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-9)
    assert np.all(p > 0)


def test_ssl_singleton_probability_one():
    params = init_params(SMALL, np.random.default_rng(1))
    matrix = small_matrix(n_frames=1)
    masked = mask_matrix(matrix, 0, Role.V)
    out = net.forward_ssl(masked, matrix.role_block(Role.V), params, SMALL)
    np.testing.assert_allclose(out.p_ssl, [1.0])
    assert net.loss_total(np.zeros(3), 0, out.p_ssl, 0, alpha=0.0) == 0.0


def test_equal_keys_give_uniform_p_ssl():
    params = init_params(SMALL, np.random.default_rng(1))
    params["role.v.w"][:] = 0.0  # every key orthogonal to every query
    params["role.v.b"][:] = 0.0
    matrix = small_matrix(n_frames=4, cfg=ModelConfig(
        d_tok=4, d_factor=3, d_model=8, n_layers=1, n_heads=2, ffn_ratio=4, n_max=4, dropout=0.0))
    masked = mask_matrix(matrix, 2, Role.V)
    out = net.forward_ssl(masked, matrix.role_block(Role.V), params, SMALL)
    np.testing.assert_allclose(out.p_ssl, 0.25, atol=1e-12)


def test_loss_total_analytic_cases():
    logits = np.array([0.0, 0.0, 0.0])
    # alpha = 1: exactly the class loss, p_ssl ignored
    assert net.loss_total(logits, 1, None, None, alpha=1.0) == pytest.approx(np.log(3))
    # alpha = 0, uniform over 4 candidates
    p4 = np.full(4, 0.25)
    assert net.loss_total(logits, 0, p4, 2, alpha=0.0) == pytest.approx(np.log(4))
    # mixed case
    p2 = np.full(2, 0.5)
    expected = 0.7 * np.log(3) + 0.3 * np.log(2)
    assert net.loss_total(logits, 1, p2, 0, alpha=0.7) == pytest.approx(expected, abs=1e-12)


def test_loss_total_validates_inputs():
    logits = np.zeros(3)
    with pytest.raises(ValidationError):
        net.loss_total(logits, 0, None, None, alpha=1.5)
    with pytest.raises(ValidationError):
        net.loss_total(logits, 5, None, None, alpha=1.0)
    with pytest.raises(ValidationError):
        net.loss_total(logits, 0, None, None, alpha=0.5)  # ssl inputs required
    with pytest.raises(ValidationError):
        net.loss_total(logits, 0, np.full(2, 0.5), 3, alpha=0.5)  # t out of range


def test_forward_guards():
    params = init_params(SMALL, np.random.default_rng(1))
    matrix = small_matrix(n_frames=2)
    masked = mask_matrix(matrix, 0, Role.V)
    with pytest.raises(ValidationError):
        net.forward_classify(masked, params, SMALL)  # masked input
    with pytest.raises(ValidationError):
        net.forward_ssl(matrix, matrix.role_block(Role.V), params, SMALL)  # mask unset
    with pytest.raises(ValidationError):
        net.forward_ssl(masked, matrix.role_block(Role.V)[:1], params, SMALL)  # count != N
    wrong_cfg = ModelConfig(d_tok=5, d_factor=3, d_model=8, n_layers=1, n_heads=2, n_max=4)
    with pytest.raises(ConfigError):
        net.forward_classify(matrix, params, wrong_cfg)


def test_weight_sharing_between_passes():
    cfg = SMALL
    params = init_params(cfg, np.random.default_rng(3))
    matrix = small_matrix(n_frames=3)
    masked = mask_matrix(matrix, 1, Role.V)
    cands = matrix.role_block(Role.V)
    logits_before = net.forward_classify(matrix, params, cfg).logits
    ssl_before = net.forward_ssl(masked, cands, params, cfg).p_ssl

    bumped = {k: v.copy() for k, v in params.items()}
    bumped["layer0.ffn.w1"][0, 0] += 0.5  # encoder weight: affects both passes
    assert not np.allclose(net.forward_classify(matrix, bumped, cfg).logits, logits_before)
    assert not np.allclose(net.forward_ssl(masked, cands, bumped, cfg).p_ssl, ssl_before)

    bumped = {k: v.copy() for k, v in params.items()}
    bumped["role.v.w"] += 0.05  # role encoder: SSL only
    np.testing.assert_array_equal(
        net.forward_classify(matrix, bumped, cfg).logits, logits_before
    )
    assert not np.allclose(net.forward_ssl(masked, cands, bumped, cfg).p_ssl, ssl_before)


def test_permutation_equivariance_with_zeroed_positions():
    cfg = SMALL
    params = init_params(cfg, np.random.default_rng(8))
    params["pos"][:] = 0.0
    matrix = small_matrix(n_frames=4, cfg=cfg)
    perm = [2, 0, 3, 1]
    permuted = SrlpMatrix(
        data=matrix.data[:, perm], d_tok=cfg.d_tok, d_factor=cfg.d_factor
    )
    h, _ = net.encode_forward(matrix.data.T[None], params, cfg)
    h_perm, _ = net.encode_forward(permuted.data.T[None], params, cfg)
    np.testing.assert_allclose(h_perm[0], h[0][perm], atol=1e-9)
    a = net.forward_classify(matrix, params, cfg).logits
    b = net.forward_classify(permuted, params, cfg).logits
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_batch_matches_single_event_processing():
    # events in a bucket share N but must not interact through attention
    from srlp.nn.network import batch_step

    params = init_params(SMALL, np.random.default_rng(6))
    matrices = [small_matrix(n_frames=3, seed=s) for s in (1, 2, 3)]
    x = np.stack([m.data.T for m in matrices])
    labels = np.array([0, 1, 2])
    masked = [mask_matrix(m, t, Role.V) for m, t in zip(matrices, (0, 2, 1))]
    result = batch_step(
        x, labels, params, SMALL, alpha=0.7,
        x_masked=np.stack([m.data.T for m in masked]),
        t_idx=np.array([0, 2, 1]),
        roles=[Role.V, Role.V, Role.V],
        candidates=np.stack([m.role_block(Role.V) for m in matrices]),
    )
    for i, (matrix, masked_matrix) in enumerate(zip(matrices, masked)):
        single_logits = net.forward_classify(matrix, params, SMALL).logits
        np.testing.assert_allclose(result.class_probs[i], net.softmax(single_logits),
                                   atol=1e-12)
        single_ssl = net.forward_ssl(masked_matrix, matrix.role_block(Role.V), params, SMALL)
        np.testing.assert_allclose(result.ssl_probs[i], single_ssl.p_ssl, atol=1e-12)


def test_batch_gradients_are_sum_of_single_event_gradients():
    from srlp.nn.network import batch_step
    from srlp.nn.params import zero_grads

    params = init_params(SMALL, np.random.default_rng(6))
    matrices = [small_matrix(n_frames=2, seed=s) for s in (4, 5)]
    masked = [mask_matrix(m, 1, Role.A0) for m in matrices]
    labels = [2, 0]
    grads_batch = zero_grads(params)
    batch_step(
        np.stack([m.data.T for m in matrices]), np.array(labels), params, SMALL, 0.6,
        x_masked=np.stack([m.data.T for m in masked]),
        t_idx=np.array([1, 1]), roles=[Role.A0, Role.A0],
        candidates=np.stack([m.role_block(Role.A0) for m in matrices]),
        grads=grads_batch,
    )
    expected = zero_grads(params)
    for matrix, masked_matrix, label in zip(matrices, masked, labels):
        c = net.forward_classify(matrix, params, SMALL)
        s = net.forward_ssl(masked_matrix, matrix.role_block(Role.A0), params, SMALL)
        single = net.backward(c, s, label, 0.6, params, SMALL)
        for name in expected:
            expected[name] += single[name]
    for name in expected:
        np.testing.assert_allclose(grads_batch[name], expected[name], atol=1e-10,
                                   err_msg=name)


def test_backward_alpha_one_role_grads_zero():
    params = init_params(SMALL, np.random.default_rng(4))
    matrix = small_matrix(n_frames=3)
    masked = mask_matrix(matrix, 0, Role.V)
    c = net.forward_classify(matrix, params, SMALL)
    s = net.forward_ssl(masked, matrix.role_block(Role.V), params, SMALL)
    grads = net.backward(c, s, 1, alpha=1.0, params=params, cfg=SMALL)
    for key in ("v", "a0", "a1"):
        assert np.all(grads[f"role.{key}.w"] == 0.0)
        assert np.all(grads[f"role.{key}.b"] == 0.0)
    assert np.any(grads["cls.w"] != 0.0)


def test_backward_constant_loss_gives_zero_grads():
    # alpha=0 with N=1: the ssl loss is identically 0, so every grad vanishes
    params = init_params(SMALL, np.random.default_rng(4))
    matrix = small_matrix(n_frames=1)
    masked = mask_matrix(matrix, 0, Role.V)
    c = net.forward_classify(matrix, params, SMALL)
    s = net.forward_ssl(masked, matrix.role_block(Role.V), params, SMALL)
    grads = net.backward(c, s, 0, alpha=0.0, params=params, cfg=SMALL)
    for name, g in grads.items():
        np.testing.assert_allclose(g, 0.0, atol=1e-15, err_msg=name)


def test_backward_missing_cache_rejected():
    params = init_params(SMALL, np.random.default_rng(4))
    matrix = small_matrix(n_frames=2)
    c = net.forward_classify(matrix, params, SMALL)
    with pytest.raises(ValidationError):
        net.backward(c, None, 0, alpha=0.5, params=params, cfg=SMALL)
    with pytest.raises(ValidationError):
        net.backward(None, None, 0, alpha=1.0, params=params, cfg=SMALL)
