"""Command-line pipeline: validate, label, split, train, eval, predict,
backtest, report. Global flags: --config, --seed, --out; SRLP_LOG controls
verbosity."""

from __future__ import annotations

import csv
import functools
import json
import logging
import os
import sys
from dataclasses import asdict
from datetime import datetime, timedelta, timezone
from pathlib import Path

import click
import numpy as np

from . import backtest as bt
from .charts import render_performance_svg
from .config import load_config_file, resolve
from .errors import NoEntryPrice, NoExitPrice, SrlpError
from .events_io import attach_embeddings, parse_events, read_events, write_events
from .labeling import ExclusionRecord, derive_labels
from .manifest import ManifestWriter
from .prices_io import read_bars, read_price_dir
from .returns import compute_return
from .splits import InDistribution, OutOfDistribution, split_dataset
from .training import (
    TrainConfig,
    evaluate,
    load_model,
    predict_rows,
    save_model,
    train,
    write_predictions,
)
from .types import LabelThresholds, ReturnHorizon

log = logging.getLogger("srlp.cli")

MODEL_DEFAULTS = dict(
    d_model=128, n_layers=2, n_heads=4, ffn_ratio=4, n_max=32, dropout=0.1
)
TRAIN_DEFAULTS = dict(
    seed=0, epochs=30, batch_size=32, learning_rate=1e-3, lr_decay=1.0, alpha=0.7,
    mask_preset="v_only", patience=5, weight_decay=0.0, mask_seed=None,
)
LABEL_DEFAULTS = dict(a=20.0, b=40.0, c=60.0, d=20.0, horizon="next_close")
SPLIT_DEFAULTS = dict(scheme="in_dist", seed=0, cutoff=None)
STRATEGY_DEFAULTS = dict(
    allow_short=False, horizon="next_close", position_fraction=0.1,
    max_positions=10, cost_bps=10.0, confidence_threshold=0.0,
)


def _setup_logging() -> None:
    level = os.environ.get("SRLP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def handle_errors(fn):
    """Domain failures exit 1 with a machine-readable record on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SrlpError as exc:
            record = {"error": type(exc).__name__, "message": str(exc)}
            click.echo(json.dumps(record), err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file; flags override it.")
@click.option("--seed", type=int, default=None, help="Seed override for seeded commands.")
@click.option("--out", "out_dir", type=click.Path(), default="srlp_out",
              help="Output directory for artifacts and manifests.")
@click.pass_context
def main(ctx, config_path, seed, out_dir):
    _setup_logging()
    ctx.ensure_object(dict)
    try:
        ctx.obj["config"] = load_config_file(config_path)
    except SrlpError as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
        sys.exit(1)
    ctx.obj["seed"] = seed
    ctx.obj["out"] = Path(out_dir)


def _out(ctx) -> Path:
    out: Path = ctx.obj["out"]
    out.mkdir(parents=True, exist_ok=True)
    return out


@main.command()
@click.option("--events", "events_path", type=click.Path(exists=True), required=True)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), default=None)
@click.option("--prices", "prices_dir", type=click.Path(exists=True), default=None)
@click.pass_context
@handle_errors
def validate(ctx, events_path, embeddings_path, prices_dir):
    """Check input files against the expected formats and invariants."""
    out = _out(ctx)
    manifest = ManifestWriter("validate", out, config={}, seed=ctx.obj["seed"])
    manifest.add_input(events_path)
    events = read_events(events_path)
    counts = {"events": len(events)}
    if embeddings_path:
        manifest.add_input(embeddings_path)
        counts["d_tok"] = attach_embeddings(events, embeddings_path)
    if prices_dir:
        manifest.add_input_dir(prices_dir)
        counts["price_series"] = len(read_price_dir(prices_dir))
    manifest.write()
    click.echo(json.dumps({"ok": True, **counts}))


def _write_exclusions(records: list[ExclusionRecord], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "reason", "detail"])
        for record in records:
            writer.writerow([record.event_id, record.reason, record.detail])


@main.command()
@click.option("--events", "events_path", type=click.Path(exists=True), required=True)
@click.option("--prices", "prices_dir", type=click.Path(exists=True), required=True)
@click.option("--horizon", default=None, help="next_close, close+K, or minutes:M")
@click.option("--a", type=float, default=None)
@click.option("--b", type=float, default=None)
@click.option("--c", type=float, default=None)
@click.option("--d", type=float, default=None)
@click.pass_context
@handle_errors
def label(ctx, events_path, prices_dir, horizon, a, b, c, d):
    """Compute event returns and derive quantile-rank labels."""
    cfg = resolve(ctx.obj["config"].get("label", {}),
                  dict(a=a, b=b, c=c, d=d, horizon=horizon), LABEL_DEFAULTS)
    thresholds = LabelThresholds(a=cfg["a"], b=cfg["b"], c=cfg["c"], d=cfg["d"])
    horizon_rule = ReturnHorizon.parse(cfg["horizon"])
    out = _out(ctx)
    manifest = ManifestWriter("label", out, config=cfg, seed=ctx.obj["seed"])
    manifest.add_input(events_path)
    manifest.add_input_dir(prices_dir)

    events = read_events(events_path)
    prices = read_price_dir(prices_dir)
    with_returns, exclusions = [], []
    for event in events:
        series = prices.get(event.stock_id)
        if series is None:
            exclusions.append(ExclusionRecord(event.event_id, "no_price_data", event.stock_id))
            continue
        try:
            with_returns.append(event.with_return(compute_return(event, series, horizon_rule)))
        except (NoEntryPrice, NoExitPrice) as exc:
            exclusions.append(ExclusionRecord(event.event_id, type(exc).__name__, str(exc)))
    labeled, rank_excluded = derive_labels(with_returns, thresholds)
    exclusions.extend(rank_excluded)

    labeled_path = out / "labeled.jsonl"
    exclusions_path = out / "exclusions.csv"
    write_events(labeled, labeled_path)
    _write_exclusions(exclusions, exclusions_path)
    manifest.add_artifact(labeled_path)
    manifest.add_artifact(exclusions_path)
    manifest.write()
    click.echo(json.dumps({"labeled": len(labeled), "excluded": len(exclusions)}))


def _parse_cutoff(text: str) -> datetime:
    """Naive or date-only cutoffs are taken as A-shares local time (+08:00)."""
    cutoff = datetime.fromisoformat(text)
    if cutoff.tzinfo is None:
        cutoff = cutoff.replace(tzinfo=timezone(timedelta(hours=8)))
    return cutoff


@main.command()
@click.option("--events", "events_path", type=click.Path(exists=True), required=True)
@click.option("--scheme", type=click.Choice(["in_dist", "ood"]), default=None)
@click.option("--cutoff", default=None,
              help="OOD boundary, ISO date or datetime (naive values read as +08:00)")
@click.pass_context
@handle_errors
def split(ctx, events_path, scheme, cutoff):
    """Split a labeled corpus into train/validation/test or train/ood_test."""
    cfg = resolve(ctx.obj["config"].get("split", {}),
                  dict(scheme=scheme, cutoff=cutoff, seed=ctx.obj["seed"]), SPLIT_DEFAULTS)
    out = _out(ctx)
    manifest = ManifestWriter("split", out, config=cfg, seed=cfg["seed"])
    manifest.add_input(events_path)
    events = read_events(events_path)
    if cfg["scheme"] == "in_dist":
        parts = split_dataset(events, InDistribution(seed=cfg["seed"]))
    else:
        if not cfg["cutoff"]:
            raise click.UsageError("--cutoff is required for the ood scheme")
        parts = split_dataset(events, OutOfDistribution(cutoff=_parse_cutoff(cfg["cutoff"])))
    sizes = {}
    for name, part in parts.items():
        path = out / f"{name}.jsonl"
        write_events(part, path)
        manifest.add_artifact(path)
        sizes[name] = len(part)
    manifest.write()
    click.echo(json.dumps(sizes))


def _load_train_config(ctx) -> tuple[dict, TrainConfig]:
    model_cfg = resolve(ctx.obj["config"].get("model", {}), {}, MODEL_DEFAULTS)
    train_cfg = resolve(ctx.obj["config"].get("train", {}),
                        dict(seed=ctx.obj["seed"]), TRAIN_DEFAULTS)
    return model_cfg, TrainConfig(**train_cfg)


@main.command(name="train")
@click.option("--train", "train_path", type=click.Path(exists=True), required=True)
@click.option("--validation", "val_path", type=click.Path(exists=True), default=None)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), required=True)
@click.pass_context
@handle_errors
def train_cmd(ctx, train_path, val_path, embeddings_path):
    """Train the movement classifier; keeps the best-validation checkpoint."""
    model_cfg, train_cfg = _load_train_config(ctx)
    out = _out(ctx)
    manifest = ManifestWriter(
        "train", out, config={"model": model_cfg, "train": asdict(train_cfg)},
        seed=train_cfg.seed,
    )
    manifest.add_input(train_path)
    manifest.add_input(embeddings_path)
    train_events = read_events(train_path)
    attach_embeddings(train_events, embeddings_path, allow_extra=True)
    val_events = None
    if val_path:
        manifest.add_input(val_path)
        val_events = read_events(val_path)
        attach_embeddings(val_events, embeddings_path, allow_extra=True)

    result = train(train_events, val_events, model_config=model_cfg, train_config=train_cfg)

    ckpt_path = out / "model.ckpt"
    log_path = out / "train_log.jsonl"
    save_model(ckpt_path, result)
    with open(log_path, "w", encoding="utf-8") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    manifest.add_artifact(ckpt_path)
    manifest.add_artifact(log_path)
    manifest.write()
    click.echo(json.dumps({
        "best_epoch": result.best_epoch,
        "best_val_accuracy": result.best_val_accuracy,
        "epochs_run": len(result.log),
    }))


@main.command(name="eval")
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--events", "events_path", type=click.Path(exists=True), required=True)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), required=True)
@click.pass_context
@handle_errors
def eval_cmd(ctx, ckpt_path, events_path, embeddings_path):
    """Evaluate a checkpoint on a labeled split."""
    out = _out(ctx)
    manifest = ManifestWriter("eval", out, config={}, seed=ctx.obj["seed"])
    for p in (ckpt_path, events_path, embeddings_path):
        manifest.add_input(p)
    cfg, params, scaler, _ = load_model(ckpt_path)
    events = parse_events(events_path, embeddings_path, allow_extra=True)
    report = evaluate(params, cfg, scaler, events)
    report_path = out / "eval_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    manifest.add_artifact(report_path)
    manifest.write()
    click.echo(json.dumps({"accuracy": report.accuracy, "macro_f1": report.macro_f1}))


@main.command()
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--events", "events_path", type=click.Path(exists=True), required=True)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), required=True)
@click.option("--dump-features", "dump_dir", type=click.Path(), default=None,
              help="Also write each event's feature matrix as CSV into this directory.")
@click.pass_context
@handle_errors
def predict(ctx, ckpt_path, events_path, embeddings_path, dump_dir):
    """Write per-event class probabilities for downstream trading."""
    out = _out(ctx)
    manifest = ManifestWriter("predict", out, config={}, seed=ctx.obj["seed"])
    for p in (ckpt_path, events_path, embeddings_path):
        manifest.add_input(p)
    cfg, params, scaler, _ = load_model(ckpt_path)
    events = parse_events(events_path, embeddings_path, allow_extra=True)
    if dump_dir is not None:
        from .training import prepare_events

        dump_root = Path(dump_dir)
        dump_root.mkdir(parents=True, exist_ok=True)
        prepared, _ = prepare_events(events, scaler, cfg.n_max, require_labels=False)
        for item in prepared:
            np.savetxt(dump_root / f"{item.event.event_id}.csv",
                       item.matrix.data, delimiter=",")
        manifest.add_artifact(dump_root)
    rows, skipped = predict_rows(params, cfg, scaler, events)
    predictions_path = out / "predictions.csv"
    skipped_path = out / "skipped_events.csv"
    write_predictions(rows, predictions_path)
    with open(skipped_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "reason"])
        writer.writerows(skipped)
    manifest.add_artifact(predictions_path)
    manifest.add_artifact(skipped_path)
    manifest.write()
    click.echo(json.dumps({"predicted": len(rows), "skipped": len(skipped)}))


def _parse_index_option(values: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for item in values:
        name, _, path = item.partition("=")
        if not name or not path:
            raise click.UsageError(f"--index expects NAME=PATH, got {item!r}")
        out[name] = path
    return out


@main.command(name="backtest")
@click.option("--predictions", "predictions_path", type=click.Path(exists=True), required=True)
@click.option("--prices", "prices_dir", type=click.Path(exists=True), required=True)
@click.option("--index", "index_specs", multiple=True, help="NAME=daily.csv, repeatable")
@click.option("--allow-short/--no-allow-short", default=None)
@click.option("--horizon", default=None)
@click.option("--position-fraction", type=float, default=None)
@click.option("--max-positions", type=int, default=None)
@click.option("--cost-bps", type=float, default=None)
@click.option("--confidence-threshold", type=float, default=None)
@click.option("--start-date", default=None)
@click.option("--end-date", default=None)
@click.pass_context
@handle_errors
def backtest_cmd(ctx, predictions_path, prices_dir, index_specs, allow_short, horizon,
                 position_fraction, max_positions, cost_bps, confidence_threshold,
                 start_date, end_date):
    """Simulate the trading strategy over prediction signals."""
    flags = dict(
        allow_short=allow_short, horizon=horizon, position_fraction=position_fraction,
        max_positions=max_positions, cost_bps=cost_bps,
        confidence_threshold=confidence_threshold,
    )
    cfg = resolve(ctx.obj["config"].get("strategy", {}), flags, STRATEGY_DEFAULTS)
    strategy = bt.StrategyConfig(
        allow_short=cfg["allow_short"],
        horizon=ReturnHorizon.parse(cfg["horizon"]),
        position_fraction=cfg["position_fraction"],
        max_positions=cfg["max_positions"],
        cost_bps=cfg["cost_bps"],
        confidence_threshold=cfg["confidence_threshold"],
    )
    out = _out(ctx)
    manifest = ManifestWriter("backtest", out, config=cfg, seed=ctx.obj["seed"])
    manifest.add_input(predictions_path)
    manifest.add_input_dir(prices_dir)

    signals = bt.read_predictions(predictions_path)
    prices = read_price_dir(prices_dir)
    calendar = sorted({ts.date() for s in prices.values() for ts in s.daily.timestamps})
    if start_date:
        lo = datetime.fromisoformat(start_date).date()
        calendar = [d for d in calendar if d >= lo]
    if end_date:
        hi = datetime.fromisoformat(end_date).date()
        calendar = [d for d in calendar if d <= hi]

    trades, curve, skips = bt.simulate(signals, prices, strategy, calendar)

    index_bars = {}
    for name, path in _parse_index_option(index_specs).items():
        manifest.add_input(path)
        index_bars[name] = read_bars(path)
    rows = bt.benchmark_report(curve, index_bars)

    artifacts = {
        "trades.csv": lambda p: bt.write_trades_csv(trades, p),
        "equity.csv": lambda p: bt.write_equity_csv(curve, p),
        "report.csv": lambda p: bt.write_report_csv(rows, p),
        "report.jsonl": lambda p: bt.write_report_jsonl(rows, p),
        "skipped_signals.csv": lambda p: bt.write_skips_csv(skips, p),
    }
    for name, writer in artifacts.items():
        path = out / name
        writer(path)
        manifest.add_artifact(path)

    curves_path = out / "curves.csv"
    with open(curves_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        names = sorted(index_bars)
        writer.writerow(["date", "strategy", *names])
        index_curves = {
            name: bt.curve_from_daily_closes(index_bars[name], curve.dates, name)
            for name in names
        }
        for i, d in enumerate(curve.dates):
            writer.writerow(
                [d.isoformat(), repr(float(curve.equity[i]))]
                + [repr(float(index_curves[n].equity[i])) for n in names]
            )
    manifest.add_artifact(curves_path)
    manifest.write()
    click.echo(json.dumps({
        "trades": len(trades), "skipped": len(skips),
        "final_equity": float(curve.equity[-1]) if len(curve) else 1.0,
    }))


@main.command()
@click.option("--backtest", "backtest_dir", type=click.Path(exists=True), required=True)
@click.pass_context
@handle_errors
def report(ctx, backtest_dir):
    """Render the metric table and the return/drawdown SVG from backtest artifacts."""
    backtest_dir = Path(backtest_dir)
    out = _out(ctx)
    manifest = ManifestWriter("report", out, config={}, seed=ctx.obj["seed"])
    report_path = backtest_dir / "report.csv"
    curves_path = backtest_dir / "curves.csv"
    for path in (report_path, curves_path):
        if not path.exists():
            raise SrlpError(f"missing backtest artifact {path}")
        manifest.add_input(path)

    with open(report_path, encoding="utf-8", newline="") as fh:
        metric_rows = list(csv.reader(fh))
    with open(curves_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = list(reader)
    names = header[1:]
    dates = [datetime.fromisoformat(row[0]).date() for row in data]
    curves = {
        name: np.array([float(row[1 + j]) for row in data])
        for j, name in enumerate(names)
    }

    svg_path = out / "equity_drawdown.svg"
    svg_path.write_text(render_performance_svg(dates, curves), encoding="utf-8")

    lines = ["| " + " | ".join(metric_rows[0]) + " |",
             "|" + "---|" * len(metric_rows[0])]
    for row in metric_rows[1:]:
        lines.append("| " + " | ".join(row) + " |")
    summary_path = out / "summary.md"
    summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest.add_artifact(svg_path)
    manifest.add_artifact(summary_path)
    manifest.write()
    click.echo(json.dumps({"summary": str(summary_path), "chart": str(svg_path)}))


if __name__ == "__main__":
    main()
