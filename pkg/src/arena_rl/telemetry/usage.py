"""Action-usage windows over a training metrics CSV."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from arena_rl.obs_action import ACTION_NAMES

DEFAULT_THRESHOLD = 0.005
DEFAULT_WINDOWS = 5


class MetricsFormatError(ValueError):
    pass


@dataclass
class UsageWindow:
    first_row: int  # 1-based data row numbers, inclusive
    last_row: int
    first_step: int
    last_step: int
    counts: np.ndarray

    @property
    def shares(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else np.zeros_like(self.counts, dtype=float)


@dataclass
class UsageReport:
    windows: list[UsageWindow]
    threshold: float
    flagged: list[str]

    def table(self) -> str:
        head = ["window", "rows", "steps"] + ACTION_NAMES
        lines = ["\t".join(head)]
        for i, w in enumerate(self.windows):
            cells = [str(i), f"{w.first_row}-{w.last_row}", f"{w.first_step}-{w.last_step}"]
            cells += [f"{s:.4f}" for s in w.shares]
            lines.append("\t".join(cells))
        lines.append("candidate_underpowered\t" + (",".join(self.flagged) if self.flagged else "-"))
        return "\n".join(lines)


def read_usage_rows(path) -> tuple[list[int], np.ndarray]:
    cols = [f"action_{n}" for n in ACTION_NAMES]
    try:
        fh = open(Path(path), newline="")
    except OSError as exc:
        raise MetricsFormatError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ["step"] + cols if c not in (reader.fieldnames or [])]
        if missing:
            raise MetricsFormatError(f"row 1: missing columns {','.join(missing)}")
        steps, counts = [], []
        for n, row in enumerate(reader, start=2):
            try:
                steps.append(int(row["step"]))
                vals = [float(row[c]) for c in cols]
            except (TypeError, ValueError):
                raise MetricsFormatError(f"row {n}: non-numeric usage value") from None
            if any(v < 0 or not np.isfinite(v) for v in vals):
                raise MetricsFormatError(f"row {n}: usage counts must be finite and non-negative")
            counts.append(vals)
    return steps, np.asarray(counts, dtype=float).reshape(-1, len(cols))


def window_bounds(n_rows: int, n_windows: int) -> list[tuple[int, int]]:
    """Contiguous half-open row ranges covering ``range(n_rows)`` exactly once."""
    if n_rows == 0:
        return []
    n_windows = max(1, min(n_windows, n_rows))
    edges = np.linspace(0, n_rows, n_windows + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def action_usage(path, windows: int = DEFAULT_WINDOWS, threshold: float = DEFAULT_THRESHOLD) -> UsageReport:
    steps, counts = read_usage_rows(path)
    out = []
    for a, b in window_bounds(len(steps), windows):
        out.append(UsageWindow(a + 1, b, steps[a], steps[b - 1], counts[a:b].sum(axis=0)))
    flagged = []
    if out:
        shares = out[-1].shares
        flagged = [name for name, s in zip(ACTION_NAMES, shares) if s < threshold]
    return UsageReport(out, threshold, flagged)
