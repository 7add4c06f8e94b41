"""Batched training loop, evaluation, prediction, and model checkpoints."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigError, TrainingDiverged, ValidationError
from .features import MASK_PRESETS, SrlpMatrix, build_event_matrix, mask_matrix, sample_mask
from .metrics import EvalReport, confusion_matrix, report_from_confusion
from .nn.adam import AdamState, adam_step
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.network import batch_step
from .nn.params import ModelConfig, init_params, validate_shapes, zero_grads
from .scaling import FactorScaler, apply_factor_scaler, fit_factor_scaler
from .types import Label, NewsEvent

log = logging.getLogger("srlp.training")


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    lr_decay: float = 1.0  # multiplicative per-epoch schedule
    alpha: float = 0.7
    mask_preset: str = "v_only"
    patience: int = 5
    weight_decay: float = 0.0
    mask_seed: int | None = None  # defaults to a stream derived from seed

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.patience <= 0:
            raise ConfigError("epochs, batch_size and patience must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha={self.alpha} outside [0, 1]")
        if self.mask_preset not in MASK_PRESETS:
            raise ConfigError(f"unknown mask preset {self.mask_preset!r}")
        if self.learning_rate < 0 or self.lr_decay <= 0 or self.weight_decay < 0:
            raise ConfigError("bad learning-rate or weight-decay setting")


@dataclass
class PreparedEvent:
    event: NewsEvent
    matrix: SrlpMatrix
    label_index: int | None


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    model_config: ModelConfig
    scaler: FactorScaler
    train_config: TrainConfig
    log: list[dict]
    best_epoch: int
    best_val_accuracy: float


def prepare_events(
    events: list[NewsEvent],
    scaler: FactorScaler,
    n_max: int,
    require_labels: bool,
) -> tuple[list[PreparedEvent], list[tuple[str, str]]]:
    """Build one feature matrix per event; events without a complete frame
    are skipped and reported."""
    scaled = apply_factor_scaler(scaler, events)
    prepared: list[PreparedEvent] = []
    skipped: list[tuple[str, str]] = []
    for event, scaled_event in zip(events, scaled):
        if require_labels and event.label is None:
            raise ValidationError(f"event {event.event_id} is unlabeled")
        frames = event.complete_frames()
        if not frames:
            skipped.append((event.event_id, "no complete SRL frames"))
            continue
        matrix = build_event_matrix(event, scaled_event.factors.values, n_max=n_max)
        prepared.append(
            PreparedEvent(
                event=event,
                matrix=matrix,
                label_index=event.label.index if event.label is not None else None,
            )
        )
    if skipped:
        log.warning("skipped %d event(s) with no complete SRL frames", len(skipped))
    return prepared, skipped


def _embedding_width(events: list[NewsEvent]) -> int:
    widths = {
        s.embeddings.shape[1]
        for e in events
        for s in e.sentences
        if s.embeddings is not None
    }
    if len(widths) != 1:
        raise ValidationError(f"expected one token-embedding width, found {sorted(widths)}")
    return widths.pop()


def _bucket_by_frames(group: list[PreparedEvent]) -> list[list[PreparedEvent]]:
    buckets: dict[int, list[PreparedEvent]] = {}
    for item in group:
        buckets.setdefault(item.matrix.n_frames, []).append(item)
    return [buckets[n] for n in sorted(buckets)]


def _stack_inputs(bucket: list[PreparedEvent]) -> np.ndarray:
    return np.stack([item.matrix.data.T for item in bucket])


def _accuracy(prepared: list[PreparedEvent], params, cfg: ModelConfig) -> float:
    """Dropout-free classification accuracy."""
    probs = predict_probabilities(prepared, params, cfg)
    labels = np.array([p.label_index for p in prepared])
    return float((probs.argmax(axis=1) == labels).mean())


def predict_probabilities(
    prepared: list[PreparedEvent], params, cfg: ModelConfig
) -> np.ndarray:
    """(n, 3) class probabilities, dropout off, frame-count bucketed."""
    out = np.empty((len(prepared), 3))
    buckets: dict[int, list[int]] = {}
    for i, item in enumerate(prepared):
        buckets.setdefault(item.matrix.n_frames, []).append(i)
    for n in sorted(buckets):
        idx = buckets[n]
        x = np.stack([prepared[i].matrix.data.T for i in idx])
        out[idx] = batch_step(x, None, params, cfg, alpha=1.0).class_probs
    return out


def train(
    train_events: list[NewsEvent],
    validation_events: list[NewsEvent] | None,
    model_config: dict | ModelConfig | None = None,
    train_config: TrainConfig = TrainConfig(),
    step_callback=None,
) -> TrainResult:
    """Train on labeled events, early-stopping on validation accuracy.

    `model_config` may omit d_tok/d_factor; they are inferred from the data.
    Deterministic given (inputs, configs, seed).
    """
    if not train_events:
        raise ValidationError("empty train split")
    d_tok = _embedding_width(train_events)
    d_factor = len(train_events[0].factors.values)
    if isinstance(model_config, ModelConfig):
        cfg = model_config
    else:
        overrides = dict(model_config or {})
        overrides.setdefault("d_tok", d_tok)
        overrides.setdefault("d_factor", d_factor)
        cfg = ModelConfig(**overrides)
    if cfg.d_tok != d_tok or cfg.d_factor != d_factor:
        raise ConfigError(
            f"model config (d_tok={cfg.d_tok}, d_factor={cfg.d_factor}) does not match "
            f"data (d_tok={d_tok}, d_factor={d_factor})"
        )
    scaler = fit_factor_scaler(train_events)
    prepared_train, _ = prepare_events(train_events, scaler, cfg.n_max, require_labels=True)
    if not prepared_train:
        raise ValidationError("no trainable events (all lacked complete frames)")

    prepared_val = None
    if validation_events:
        prepared_val, _ = prepare_events(validation_events, scaler, cfg.n_max, require_labels=True)
        if not prepared_val:
            raise ValidationError("empty validation split after frame filtering")

    tc = train_config
    seeds = np.random.SeedSequence(tc.seed).spawn(3)
    param_rng = np.random.default_rng(seeds[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2]) if cfg.dropout > 0 else None
    mask_seed = tc.mask_seed if tc.mask_seed is not None else tc.seed + 0x5EED
    mask_rng = np.random.default_rng(mask_seed)

    params = init_params(cfg, param_rng)
    state = AdamState()
    history: list[dict] = []
    best = dict(epoch=-1, accuracy=-1.0, params=None)
    epochs_since_best = 0
    use_ssl = tc.alpha < 1.0

    for epoch in range(tc.epochs):
        lr = tc.learning_rate * tc.lr_decay**epoch
        order = shuffle_rng.permutation(len(prepared_train))
        sum_cls = sum_ssl = 0.0
        n_seen = 0
        for start in range(0, len(order), tc.batch_size):
            group = [prepared_train[i] for i in order[start : start + tc.batch_size]]
            grads = zero_grads(params)
            group_cls = group_ssl = 0.0
            for bucket in _bucket_by_frames(group):
                x = _stack_inputs(bucket)
                labels = np.array([item.label_index for item in bucket])
                kwargs: dict = {}
                if use_ssl:
                    masked, t_idx, roles, cands = [], [], [], []
                    for item in bucket:
                        t, role = sample_mask(mask_rng, item.matrix.n_frames, tc.mask_preset)
                        masked_matrix = mask_matrix(item.matrix, t, role)
                        masked.append(masked_matrix.data.T)
                        t_idx.append(t)
                        roles.append(role)
                        cands.append(item.matrix.role_block(role))
                    kwargs = dict(
                        x_masked=np.stack(masked),
                        t_idx=np.array(t_idx),
                        roles=roles,
                        candidates=np.stack(cands),
                    )
                result = batch_step(
                    x, labels, params, cfg, tc.alpha,
                    dropout_rng=dropout_rng, grads=grads, **kwargs,
                )
                group_cls += result.loss_cls_sum
                group_ssl += result.loss_ssl_sum or 0.0
            b = len(group)
            for g in grads.values():
                g /= b
            loss_cls = group_cls / b
            loss_ssl = group_ssl / b if use_ssl else None
            loss = tc.alpha * loss_cls + (1.0 - tc.alpha) * (loss_ssl or 0.0)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {start // tc.batch_size}: "
                    f"cls={loss_cls}, ssl={loss_ssl}"
                )
            if step_callback is not None:
                step_callback(
                    dict(epoch=epoch, loss=loss, loss_cls=loss_cls, loss_ssl=loss_ssl, n=b)
                )
            adam_step(params, grads, state, lr=lr, weight_decay=tc.weight_decay)
            sum_cls += group_cls
            sum_ssl += group_ssl
            n_seen += b

        train_acc = _accuracy(prepared_train, params, cfg)
        val_acc = train_acc
        if prepared_val is not None:
            val_acc = _accuracy(prepared_val, params, cfg)
        epoch_cls = sum_cls / n_seen
        epoch_ssl = sum_ssl / n_seen if use_ssl else None
        entry = dict(
            epoch=epoch,
            train_loss=tc.alpha * epoch_cls + (1.0 - tc.alpha) * (epoch_ssl or 0.0),
            loss_cls=epoch_cls,
            loss_ssl=epoch_ssl,
            train_accuracy=train_acc,
            val_accuracy=val_acc,
            lr=lr,
        )
        history.append(entry)
        log.info(
            "epoch %d loss=%.4f cls=%.4f ssl=%s train_acc=%.3f val_acc=%.3f",
            epoch, entry["train_loss"], epoch_cls,
            "-" if epoch_ssl is None else f"{epoch_ssl:.4f}", train_acc, val_acc,
        )
        if val_acc > best["accuracy"]:
            best = dict(epoch=epoch, accuracy=val_acc,
                        params={k: v.copy() for k, v in params.items()})
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= tc.patience:
                log.info("early stop at epoch %d (best epoch %d)", epoch, best["epoch"])
                break

    return TrainResult(
        params=best["params"],
        model_config=cfg,
        scaler=scaler,
        train_config=tc,
        log=history,
        best_epoch=best["epoch"],
        best_val_accuracy=best["accuracy"],
    )


def evaluate(
    params, cfg: ModelConfig, scaler: FactorScaler, events: list[NewsEvent]
) -> EvalReport:
    """Argmax-of-logits evaluation with macro and micro averages."""
    if not events:
        raise ValidationError("cannot evaluate an empty split")
    prepared, skipped = prepare_events(events, scaler, cfg.n_max, require_labels=True)
    if not prepared:
        raise ValidationError("no evaluable events (all lacked complete frames)")
    probs = predict_probabilities(prepared, params, cfg)
    y_true = [p.label_index for p in prepared]
    y_pred = probs.argmax(axis=1).tolist()
    return report_from_confusion(confusion_matrix(y_true, y_pred), n_skipped=len(skipped))


PREDICTIONS_HEADER = [
    "event_id", "stock_id", "published_at", "pred_label",
    "p_outperform", "p_neutral", "p_underperform",
]


def predict_rows(
    params, cfg: ModelConfig, scaler: FactorScaler, events: list[NewsEvent]
) -> tuple[list[list[str]], list[tuple[str, str]]]:
    """Per-event prediction rows plus (event_id, reason) skips."""
    prepared, skipped = prepare_events(events, scaler, cfg.n_max, require_labels=False)
    rows = []
    if prepared:
        probs = predict_probabilities(prepared, params, cfg)
        for item, p in zip(prepared, probs):
            event = item.event
            rows.append(
                [
                    event.event_id,
                    event.stock_id,
                    event.published_at.isoformat(),
                    Label.from_index(int(p.argmax())).value,
                    repr(float(p[0])),
                    repr(float(p[1])),
                    repr(float(p[2])),
                ]
            )
    return rows, skipped


def write_predictions(rows: list[list[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        writer.writerows(rows)


def save_model(path: str | Path, result: TrainResult) -> None:
    config = {
        "format_version": 1,
        "model": asdict(result.model_config),
        "train": asdict(result.train_config),
        "best_epoch": result.best_epoch,
    }
    tensors = dict(result.params)
    tensors["scaler.mean"] = result.scaler.mean_
    tensors["scaler.std"] = result.scaler.std_
    save_checkpoint(path, config, tensors)


def load_model(path: str | Path) -> tuple[ModelConfig, dict[str, np.ndarray], FactorScaler, dict]:
    config, tensors = load_checkpoint(path)
    try:
        cfg = ModelConfig(**config["model"])
    except (KeyError, TypeError, ConfigError) as exc:
        raise CheckpointError(f"{path}: bad config block: {exc}") from None
    scaler = FactorScaler()
    try:
        scaler.mean_ = tensors.pop("scaler.mean")
        scaler.std_ = tensors.pop("scaler.std")
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing tensor {exc.args[0]!r}") from None
    scaler.n_features_in_ = scaler.mean_.shape[0]
    if scaler.mean_.shape != (cfg.d_factor,) or scaler.std_.shape != (cfg.d_factor,):
        raise CheckpointError(f"{path}: scaler tensors do not match d_factor={cfg.d_factor}")
    try:
        validate_shapes(tensors, cfg)
    except ConfigError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return cfg, tensors, scaler, config
