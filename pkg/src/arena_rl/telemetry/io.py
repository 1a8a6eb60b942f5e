"""Atomic file output, metrics CSV and run manifest."""

from __future__ import annotations

import csv
import io as _io
import json
import os
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from arena_rl import __version__


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file and ``os.replace`` so readers never see partial data."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_csv_text(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def write_metrics_csv(path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    atomic_write_text(path, metrics_csv_text(rows, columns))


def code_version() -> str:
    """``git describe`` output when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class RunManifest:
    run_id: str
    seed: int
    config: dict
    code_version: str
    started_at: str
    finished_at: str = ""
    artifacts: dict = field(default_factory=dict)

    def missing_artifacts(self, root) -> list[str]:
        root = Path(root)
        return [p for p in self.artifacts.values() if not (root / p).exists()]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))
