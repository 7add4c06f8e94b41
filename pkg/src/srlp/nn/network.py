"""Transformer encoder, classification and matching heads, exact gradients.

Everything is float64 numpy. The forward pass keeps the per-layer
intermediates needed for a hand-derived reverse pass; gradients land in a
flat dict mirroring the parameter namespace. Batched tensors have shape
(B, N, *) where every event in the group shares a frame count N; a single
event is the B=1 case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ValidationError
from ..features import SrlpMatrix
from ..types import N_CLASSES, Role
from .params import ModelConfig, zero_grads

_LN_EPS = 1e-6
_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715

ROLE_TO_KEY = {Role.V: "v", Role.A0: "a0", Role.A1: "a1"}


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def logsumexp(x: np.ndarray, axis: int = -1) -> np.ndarray:
    m = x.max(axis=axis)
    return m + np.log(np.exp(x - np.expand_dims(m, axis)).sum(axis=axis))


def _layernorm_forward(x, gain, bias):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mean) * inv_std
    return gain * xhat + bias, (xhat, inv_std)


def _layernorm_backward(dy, cache, gain, grads, g_name, b_name):
    xhat, inv_std = cache
    grads[g_name] += (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    grads[b_name] += dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gain
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    return inv_std * (dxhat - m1 - xhat * m2)


def _gelu_forward(u):
    inner = _GELU_C * (u + _GELU_A * u**3)
    th = np.tanh(inner)
    return 0.5 * u * (1.0 + th), (u, th)


def _gelu_backward(dy, cache):
    u, th = cache
    d_inner = _GELU_C * (1.0 + 3.0 * _GELU_A * u**2)
    return dy * (0.5 * (1.0 + th) + 0.5 * u * (1.0 - th**2) * d_inner)


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def _split_heads(x, cfg: ModelConfig):
    b, n, _ = x.shape
    return x.reshape(b, n, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)


def _merge_heads(x, cfg: ModelConfig):
    b, _, n, _ = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, cfg.d_model)


def _attention_forward(a_in, params, prefix, cfg):
    q = a_in @ params[f"{prefix}.attn.wq"] + params[f"{prefix}.attn.bq"]
    k = a_in @ params[f"{prefix}.attn.wk"] + params[f"{prefix}.attn.bk"]
    v = a_in @ params[f"{prefix}.attn.wv"] + params[f"{prefix}.attn.bv"]
    qh, kh, vh = (_split_heads(t, cfg) for t in (q, k, v))
    scores = qh @ kh.swapaxes(-2, -1) / np.sqrt(cfg.d_head)
    probs = softmax(scores)
    o_cat = _merge_heads(probs @ vh, cfg)
    out = o_cat @ params[f"{prefix}.attn.wo"] + params[f"{prefix}.attn.bo"]
    return out, (a_in, qh, kh, vh, probs, o_cat)


def _attention_backward(dout, cache, params, prefix, cfg, grads):
    a_in, qh, kh, vh, probs, o_cat = cache
    grads[f"{prefix}.attn.wo"] += _flat(o_cat).T @ _flat(dout)
    grads[f"{prefix}.attn.bo"] += dout.sum(axis=(0, 1))
    doh = _split_heads(dout @ params[f"{prefix}.attn.wo"].T, cfg)
    dprobs = doh @ vh.swapaxes(-2, -1)
    dvh = probs.swapaxes(-2, -1) @ doh
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dscores /= np.sqrt(cfg.d_head)
    dq = _merge_heads(dscores @ kh, cfg)
    dk = _merge_heads(dscores.swapaxes(-2, -1) @ qh, cfg)
    dv = _merge_heads(dvh, cfg)
    da_in = np.zeros_like(a_in)
    for name, grad in (("wq", dq), ("wk", dk), ("wv", dv)):
        grads[f"{prefix}.attn.{name}"] += _flat(a_in).T @ _flat(grad)
        grads[f"{prefix}.attn.b{name[1]}"] += grad.sum(axis=(0, 1))
        da_in += grad @ params[f"{prefix}.attn.{name}"].T
    return da_in


def _dropout_mask(shape, cfg: ModelConfig, rng: np.random.Generator | None):
    if rng is None or cfg.dropout == 0.0:
        return None
    keep = 1.0 - cfg.dropout
    return (rng.random(shape) < keep).astype(np.float64) / keep


def encode_forward(x, params, cfg: ModelConfig, dropout_rng=None):
    """Project columns, add positions, run the pre-norm encoder stack."""
    _, n, d_in = x.shape
    if d_in != cfg.d_in:
        raise ConfigError(f"input width {d_in} != configured {cfg.d_in}")
    if n > cfg.n_max:
        raise ConfigError(f"{n} frames exceed n_max={cfg.n_max}")
    h = x @ params["input.w"] + params["input.b"] + params["pos"][:n]
    layers = []
    for i in range(cfg.n_layers):
        p = f"layer{i}"
        a_in, ln1_cache = _layernorm_forward(h, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"])
        attn_out, attn_cache = _attention_forward(a_in, params, p, cfg)
        attn_mask = _dropout_mask(attn_out.shape, cfg, dropout_rng)
        if attn_mask is not None:
            attn_out = attn_out * attn_mask
        h = h + attn_out
        f_in, ln2_cache = _layernorm_forward(h, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"])
        u = f_in @ params[f"{p}.ffn.w1"] + params[f"{p}.ffn.b1"]
        g, gelu_cache = _gelu_forward(u)
        y = g @ params[f"{p}.ffn.w2"] + params[f"{p}.ffn.b2"]
        ffn_mask = _dropout_mask(y.shape, cfg, dropout_rng)
        if ffn_mask is not None:
            y = y * ffn_mask
        h = h + y
        layers.append(
            dict(
                ln1=ln1_cache, attn=attn_cache, attn_mask=attn_mask,
                ln2=ln2_cache, f_in=f_in, gelu=gelu_cache, g=g, ffn_mask=ffn_mask,
            )
        )
    return h, dict(x=x, layers=layers, n=n)


def encode_backward(dh, cache, params, cfg: ModelConfig, grads):
    for i in reversed(range(cfg.n_layers)):
        p = f"layer{i}"
        c = cache["layers"][i]
        dy = dh if c["ffn_mask"] is None else dh * c["ffn_mask"]
        grads[f"{p}.ffn.w2"] += _flat(c["g"]).T @ _flat(dy)
        grads[f"{p}.ffn.b2"] += dy.sum(axis=(0, 1))
        du = _gelu_backward(dy @ params[f"{p}.ffn.w2"].T, c["gelu"])
        grads[f"{p}.ffn.w1"] += _flat(c["f_in"]).T @ _flat(du)
        grads[f"{p}.ffn.b1"] += du.sum(axis=(0, 1))
        df_in = du @ params[f"{p}.ffn.w1"].T
        dh = dh + _layernorm_backward(
            df_in, c["ln2"], params[f"{p}.ln2.g"], grads, f"{p}.ln2.g", f"{p}.ln2.b"
        )
        dattn = dh if c["attn_mask"] is None else dh * c["attn_mask"]
        da_in = _attention_backward(dattn, c["attn"], params, p, cfg, grads)
        dh = dh + _layernorm_backward(
            da_in, c["ln1"], params[f"{p}.ln1.g"], grads, f"{p}.ln1.g", f"{p}.ln1.b"
        )
    grads["pos"][: cache["n"]] += dh.sum(axis=0)
    grads["input.w"] += _flat(cache["x"]).T @ _flat(dh)
    grads["input.b"] += dh.sum(axis=(0, 1))


def _classify_head(h, params):
    pooled = h.mean(axis=1)
    return pooled @ params["cls.w"] + params["cls.b"], pooled


def _role_keys(roles) -> list[str]:
    return [ROLE_TO_KEY[r] for r in roles]


def _ssl_keys(candidates, roles, params):
    """Encode candidate role features: K[b, j] = f_role(cand[b, j])."""
    b, n, _ = candidates.shape
    keys = np.empty((b, n, params["role.v.w"].shape[1]))
    for key in sorted(set(_role_keys(roles))):
        idx = [i for i, r in enumerate(_role_keys(roles)) if r == key]
        keys[idx] = candidates[idx] @ params[f"role.{key}.w"] + params[f"role.{key}.b"]
    return keys


# ---------------------------------------------------------------------------
# Single-event operations


@dataclass
class ClassifyOutput:
    logits: np.ndarray  # (3,)
    cache: dict | None = None


@dataclass
class SslOutput:
    p_ssl: np.ndarray  # (N,)
    scores: np.ndarray
    cache: dict | None = None


def _check_matrix(matrix: SrlpMatrix, cfg: ModelConfig) -> None:
    if matrix.d_tok != cfg.d_tok or matrix.d_factor != cfg.d_factor:
        raise ConfigError(
            f"matrix dims (d_tok={matrix.d_tok}, d_factor={matrix.d_factor}) do not match "
            f"config (d_tok={cfg.d_tok}, d_factor={cfg.d_factor})"
        )
    if matrix.n_frames < 1:
        raise ValidationError("matrix has no frames")


def forward_classify(matrix: SrlpMatrix, params, cfg: ModelConfig) -> ClassifyOutput:
    """Class logits for an unmasked event matrix (dropout off)."""
    if matrix.mask is not None:
        raise ValidationError("forward_classify expects an unmasked matrix")
    _check_matrix(matrix, cfg)
    x = matrix.data.T[None, :, :]
    h, cache = encode_forward(x, params, cfg)
    logits, pooled = _classify_head(h, params)
    cache.update(pooled=pooled, logits=logits)
    return ClassifyOutput(logits=logits[0], cache=cache)


def forward_ssl(
    masked: SrlpMatrix, candidates: np.ndarray, params, cfg: ModelConfig
) -> SslOutput:
    """Match the encoder output at the masked position against role-encoded
    candidates (the original, unmasked features of every frame)."""
    if masked.mask is None:
        raise ValidationError("forward_ssl expects a masked matrix")
    _check_matrix(masked, cfg)
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.shape != (masked.n_frames, cfg.d_tok):
        raise ValidationError(
            f"expected {masked.n_frames} candidate vectors of length {cfg.d_tok}, "
            f"got {candidates.shape}"
        )
    x = masked.data.T[None, :, :]
    h, cache = encode_forward(x, params, cfg)
    t = masked.mask.t
    keys = _ssl_keys(candidates[None, :, :], [masked.mask.role], params)
    q = h[:, t, :]
    scores = keys[0] @ q[0]
    cache.update(q=q, keys=keys, candidates=candidates[None, :, :], t=t, role=masked.mask.role)
    return SslOutput(p_ssl=softmax(scores), scores=scores, cache=cache)


def loss_total(
    class_logits: np.ndarray,
    label_index: int,
    p_ssl: np.ndarray | None,
    t: int | None,
    alpha: float,
) -> float:
    """alpha * CE(class) + (1 - alpha) * CE(mask position), natural log."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha={alpha} outside [0, 1]")
    if label_index not in (0, 1, 2):
        raise ValidationError(f"label index {label_index} outside {{0, 1, 2}}")
    loss_cls = float(logsumexp(class_logits) - class_logits[label_index])
    if alpha == 1.0:
        return alpha * loss_cls
    if p_ssl is None or t is None:
        raise ValidationError("alpha < 1 requires p_ssl and t")
    if not 0 <= t < len(p_ssl):
        raise ValidationError(f"mask index {t} outside 0..{len(p_ssl) - 1}")
    loss_ssl = float(-np.log(p_ssl[t]))
    return alpha * loss_cls + (1.0 - alpha) * loss_ssl


def backward(
    classify: ClassifyOutput | None,
    ssl: SslOutput | None,
    label_index: int,
    alpha: float,
    params,
    cfg: ModelConfig,
) -> dict[str, np.ndarray]:
    """Exact gradient of loss_total for one event; both passes share the
    encoder weights, so their contributions accumulate."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha={alpha} outside [0, 1]")
    grads = zero_grads(params)
    if alpha > 0.0:
        if classify is None or classify.cache is None:
            raise ValidationError("classification cache missing")
        cache = classify.cache
        dlogits = alpha * (softmax(cache["logits"]) - _onehot(label_index, N_CLASSES))
        _classify_backward(dlogits, cache, params, cfg, grads)
    if alpha < 1.0:
        if ssl is None or ssl.cache is None:
            raise ValidationError("ssl cache missing")
        cache = ssl.cache
        dscores = (1.0 - alpha) * (ssl.p_ssl - _onehot(cache["t"], len(ssl.p_ssl)))
        _ssl_backward(dscores[None, :], cache, np.array([cache["t"]]), [cache["role"]],
                      cache["candidates"], params, cfg, grads)
    return grads


def _onehot(i: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[i] = 1.0
    return v


def _classify_backward(dlogits, cache, params, cfg, grads):
    dlogits = np.atleast_2d(dlogits)
    pooled = cache["pooled"]
    grads["cls.w"] += pooled.T @ dlogits
    grads["cls.b"] += dlogits.sum(axis=0)
    dpooled = dlogits @ params["cls.w"].T
    n = cache["n"]
    dh = np.repeat(dpooled[:, None, :], n, axis=1) / n
    encode_backward(dh, cache, params, cfg, grads)


def _ssl_backward(dscores, cache, t_idx, roles, candidates, params, cfg, grads):
    """dscores: (B, N); scores[b, j] = q[b] . K[b, j]."""
    keys, q = cache["keys"], cache["q"]
    dq = np.einsum("bn,bnd->bd", dscores, keys)
    dkeys = dscores[:, :, None] * q[:, None, :]
    role_keys = _role_keys(roles)
    for key in sorted(set(role_keys)):
        idx = [i for i, r in enumerate(role_keys) if r == key]
        grads[f"role.{key}.w"] += _flat(candidates[idx]).T @ _flat(dkeys[idx])
        grads[f"role.{key}.b"] += dkeys[idx].sum(axis=(0, 1))
    b, n = dscores.shape
    dh = np.zeros((b, n, cfg.d_model))
    dh[np.arange(b), t_idx] = dq
    encode_backward(dh, cache, params, cfg, grads)


# ---------------------------------------------------------------------------
# Batched operations (equal frame count within the group)


@dataclass
class BatchResult:
    loss_cls_sum: float
    loss_ssl_sum: float | None
    class_probs: np.ndarray  # (B, 3)
    ssl_probs: np.ndarray | None  # (B, N)

    def loss_sum(self, alpha: float) -> float:
        ssl = self.loss_ssl_sum if self.loss_ssl_sum is not None else 0.0
        return alpha * self.loss_cls_sum + (1.0 - alpha) * ssl


def batch_step(
    x: np.ndarray,
    labels: np.ndarray | None,
    params,
    cfg: ModelConfig,
    alpha: float,
    x_masked: np.ndarray | None = None,
    t_idx: np.ndarray | None = None,
    roles: list[Role] | None = None,
    candidates: np.ndarray | None = None,
    dropout_rng: np.random.Generator | None = None,
    grads: dict[str, np.ndarray] | None = None,
) -> BatchResult:
    """Forward (and optionally backward) over one equal-N group.

    Loss and gradient contributions are per-event sums; the caller divides
    by the gradient-accumulation group size. SSL inputs may be omitted when
    alpha == 1, in which case that branch never runs.
    """
    b = x.shape[0]
    h, cls_cache = encode_forward(x, params, cfg, dropout_rng)
    logits, pooled = _classify_head(h, params)
    cls_cache.update(pooled=pooled, logits=logits)
    class_probs = softmax(logits)
    loss_cls_sum = None
    if labels is not None:
        loss_cls_sum = float((logsumexp(logits) - logits[np.arange(b), labels]).sum())

    loss_ssl_sum = None
    ssl_probs = None
    run_ssl = alpha < 1.0 and x_masked is not None
    if run_ssl:
        h_ssl, ssl_cache = encode_forward(x_masked, params, cfg, dropout_rng)
        q = h_ssl[np.arange(b), t_idx]
        keys = _ssl_keys(candidates, roles, params)
        scores = np.einsum("bd,bnd->bn", q, keys)
        ssl_probs = softmax(scores)
        loss_ssl_sum = float((logsumexp(scores) - scores[np.arange(b), t_idx]).sum())
        ssl_cache.update(q=q, keys=keys)

    if grads is not None:
        if labels is None:
            raise ValidationError("gradients need labels")
        if alpha > 0.0:
            dlogits = alpha * class_probs.copy()
            dlogits[np.arange(b), labels] -= alpha
            _classify_backward(dlogits, cls_cache, params, cfg, grads)
        if run_ssl:
            dscores = (1.0 - alpha) * ssl_probs.copy()
            dscores[np.arange(b), t_idx] -= 1.0 - alpha
            _ssl_backward(dscores, ssl_cache, t_idx, roles, candidates, params, cfg, grads)

    return BatchResult(
        loss_cls_sum=loss_cls_sum if loss_cls_sum is not None else 0.0,
        loss_ssl_sum=loss_ssl_sum,
        class_probs=class_probs,
        ssl_probs=ssl_probs,
    )
