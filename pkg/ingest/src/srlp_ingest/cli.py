"""`ingest` command: raw news + market data in, pipeline input files out."""

from __future__ import annotations

import json
import logging
import os
import sys

import click

from .pipeline import ingest_run
from .records import IngestError


@click.command()
@click.option("--news", "news_dir", type=click.Path(exists=True), required=True,
              help="Directory of *.jsonl raw news records.")
@click.option("--model", "model_id", required=True,
              help="Embedding model id; hashed-D runs offline (e.g. hashed-16).")
@click.option("--factors", "factors_path", type=click.Path(exists=True), required=True,
              help="CSV of per-stock factor values.")
@click.option("--prices", "prices_dir", type=click.Path(exists=True), required=True,
              help="Directory with minute/ and daily/ OHLCV CSVs.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--tagger", "tagger_kind", type=click.Choice(["rule", "ltp"]), default="rule")
def main(news_dir, model_id, factors_path, prices_dir, out_dir, tagger_kind):
    level = os.environ.get("SRLP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    try:
        summary = ingest_run(news_dir, model_id, factors_path, prices_dir, out_dir,
                             tagger_kind=tagger_kind)
    except IngestError as exc:
        click.echo(json.dumps({"error": "IngestError", "message": str(exc)}), err=True)
        sys.exit(1)
    click.echo(json.dumps(summary))


if __name__ == "__main__":
    main()
