import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from srlp_ingest.exporter import FACTOR_NAMES

CN_TZ = timezone(timedelta(hours=8))

NEWS = [
    {
        "source_id": "n0001",
        "stock_id": "600000",
        "published_at": "2021-01-04T09:32:00+08:00",
        "title": "Buyback notice",
        "body": "The company repurchases treasury shares. Management expects stronger demand.",
    },
    {
        "source_id": "n0002",
        "stock_id": "600001",
        "published_at": "2021-01-04T10:15:00+08:00",
        "title": "",
        "body": "The board approved a special dividend. Auditors signed the annual accounts.",
    },
    {
        "source_id": "n0003",
        "stock_id": "600000",
        "published_at": "2021-01-05T09:40:00+08:00",
        "title": "Guidance",
        "body": "The supplier cut its full year forecast.",
    },
    {
        "source_id": "n0004",
        "stock_id": "600002",
        "published_at": "2021-01-05T11:02:00+08:00",
        "title": "No factors for this one",
        "body": "The operator launches a new route.",
    },
]


def _write_prices(root, stock_ids, days=4):
    base = 10.0
    for granularity, times in (("minute", ["09:31", "09:32", "09:33"]), ("daily", ["15:00"])):
        folder = root / granularity
        folder.mkdir(parents=True, exist_ok=True)
        for k, stock_id in enumerate(stock_ids):
            lines = ["timestamp,open,high,low,close,volume"]
            day = datetime(2021, 1, 4, tzinfo=CN_TZ)
            for d in range(days):
                while day.weekday() >= 5:
                    day += timedelta(days=1)
                for hhmm in times:
                    close = base + k + 0.01 * d
                    ts = day.strftime(f"%Y-%m-%dT{hhmm}:00+08:00")
                    lines.append(f"{ts},{close},{close},{close},{close},1000.0")
                day += timedelta(days=1)
            (folder / f"{stock_id}.csv").write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="session")
def raw_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("raw")
    news_dir = root / "news"
    news_dir.mkdir()
    with open(news_dir / "batch1.jsonl", "w", encoding="utf-8") as fh:
        for obj in NEWS:
            fh.write(json.dumps(obj) + "\n")

    rng = np.random.default_rng(0)
    lines = ["stock_id," + ",".join(FACTOR_NAMES)]
    for stock_id in ("600000", "600001"):  # 600002 intentionally missing
        values = [f"{v:.4f}" for v in rng.normal(size=len(FACTOR_NAMES))]
        values[3] = ""  # one missing cell -> null
        lines.append(stock_id + "," + ",".join(values))
    factors_path = root / "factors.csv"
    factors_path.write_text("\n".join(lines) + "\n")

    prices_dir = root / "prices"
    _write_prices(prices_dir, ["600000", "600001"])
    return dict(root=root, news=news_dir, factors=factors_path, prices=prices_dir)
