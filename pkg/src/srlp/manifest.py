"""Run manifests: what ran, with which inputs/config, producing which artifacts."""

from __future__ import annotations

import hashlib
import json
import time
from datetime import datetime, timezone
from pathlib import Path


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ManifestWriter:
    """Collects inputs/artifacts during a command and writes the manifest
    beside the outputs at the end."""

    def __init__(self, command: str, out_dir: str | Path, config: dict, seed: int | None = None):
        self.command = command
        self.out_dir = Path(out_dir)
        self.config = config
        self.seed = seed
        self.inputs: dict[str, str] = {}
        self.artifacts: list[str] = []
        self._t0 = time.monotonic()
        self._started = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_input_dir(self, root: str | Path, pattern: str = "**/*.csv") -> None:
        for path in sorted(Path(root).glob(pattern)):
            self.add_input(path)

    def add_artifact(self, path: str | Path) -> None:
        self.artifacts.append(str(path))

    def write(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{self.command}.manifest.json"
        payload = {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
            "artifacts": self.artifacts,
            "started_at": self._started,
            "duration_s": round(time.monotonic() - self._t0, 3),
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def verify_manifest(path: str | Path) -> list[str]:
    """Re-hash the recorded inputs; returns the paths whose digests changed."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    stale = []
    for input_path, digest in payload.get("inputs", {}).items():
        if not Path(input_path).exists() or sha256_file(input_path) != digest:
            stale.append(input_path)
    return stale
