"""Report and replicate-dump I/O.

Reports are written as JSON with full float precision (``repr``), so every
number read back compares equal to the one that was computed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable


def dumps_report(data: Any, *, indent: int = 2) -> str:
    """Serialize ``data`` deterministically; NaN/inf are rejected rather than emitted."""
    return json.dumps(data, indent=indent, ensure_ascii=False, allow_nan=False) + "\n"


def save_json(path: str | Path, data: Any, *, indent: int = 2) -> None:
    """Write ``data`` as a report-formatted JSON file; parent directories are created."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps_report(data, indent=indent), encoding="utf-8")


def write_values(path: str | Path, values: Iterable[float | None]) -> int:
    """Write one replicate value per line (``nan`` for failed replicates). Returns the line count."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with p.open("w", encoding="utf-8") as f:
        for v in values:
            f.write("nan\n" if v is None else f"{float(v)!r}\n")
            count += 1
    return count
