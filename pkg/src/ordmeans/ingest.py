"""CSV ingestion: long ``level,value`` tables, summary ``level,n,mean,var`` tables and per-cell records."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InvalidInput
from .models import GroupedSample, SufficientStats, summarize

logger = logging.getLogger(__name__)

LONG_COLUMNS = ("level", "value")
SUMMARY_COLUMNS = ("level", "n", "mean", "var")
CELL_COLUMNS = ("cell", "count", "value")

# header is line 1, first data row is line 2
_FIRST_DATA_LINE = 2


class InputFormat(str, Enum):
    LONG = "long"
    SUMMARY = "summary"


@dataclass(frozen=True)
class InputTable:
    """Parsed input: sufficient statistics always, raw groups only for long format."""

    format: InputFormat
    stats: SufficientStats
    sample: GroupedSample | None = None
    source: str = ""

    @property
    def has_raw(self) -> bool:
        return self.sample is not None

    def to_dict(self) -> dict:
        return {"source": self.source, "format": self.format.value, "k": self.stats.k, "N": self.stats.N}


def _read_csv(path: str | Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False, comment="#")
    except FileNotFoundError as e:
        raise InvalidInput(f"input file not found: {path}") from e
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise InvalidInput(f"cannot parse {path} as CSV: {e}") from e
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    return frame


def _numeric(frame: pd.DataFrame, columns: tuple[str, ...], path: str | Path) -> pd.DataFrame:
    """Convert ``columns`` to float; every row with a missing or non-finite cell is reported."""
    out = pd.DataFrame({c: pd.to_numeric(frame[c].str.strip(), errors="coerce") for c in columns})
    bad = ~np.isfinite(out.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        lines = (np.flatnonzero(bad) + _FIRST_DATA_LINE).tolist()
        raise InvalidInput(f"{path}: malformed or non-numeric rows at line(s) {_format_lines(lines)}")
    return out


def _format_lines(lines: list[int], limit: int = 20) -> str:
    shown = ", ".join(str(x) for x in lines[:limit])
    return shown if len(lines) <= limit else f"{shown} (+{len(lines) - limit} more)"


def _require_integral(values: pd.Series, name: str, minimum: int, path: str | Path) -> pd.Series:
    bad = (values != np.round(values)) | (values < minimum)
    if bad.any():
        lines = (np.flatnonzero(bad.to_numpy()) + _FIRST_DATA_LINE).tolist()
        raise InvalidInput(f"{path}: column {name} needs integers >= {minimum} at line(s) {_format_lines(lines)}")
    return values.astype(np.int64)


def _parse_long(frame: pd.DataFrame, path: str | Path) -> InputTable:
    data = _numeric(frame, LONG_COLUMNS, path)
    sample = GroupedSample.from_pairs(data["level"].to_numpy(), data["value"].to_numpy())
    return InputTable(InputFormat.LONG, summarize(sample), sample, str(path))


def _parse_summary(frame: pd.DataFrame, path: str | Path) -> InputTable:
    data = _numeric(frame, SUMMARY_COLUMNS, path)
    n = _require_integral(data["n"], "n", 1, path)
    negative = data["var"] < 0
    if negative.any():
        lines = (np.flatnonzero(negative.to_numpy()) + _FIRST_DATA_LINE).tolist()
        raise InvalidInput(f"{path}: negative variance at line(s) {_format_lines(lines)}")
    dup = data["level"].duplicated(keep=False)
    if dup.any():
        lines = (np.flatnonzero(dup.to_numpy()) + _FIRST_DATA_LINE).tolist()
        raise InvalidInput(f"{path}: duplicate summary levels at line(s) {_format_lines(lines)}")
    order = np.argsort(data["level"].to_numpy(), kind="stable")
    stats = SufficientStats(
        n=n.to_numpy()[order],
        mean=data["mean"].to_numpy()[order],
        var=data["var"].to_numpy()[order],
        levels=tuple(data["level"].to_numpy()[order].tolist()),
    )
    return InputTable(InputFormat.SUMMARY, stats, None, str(path))


def read_table(path: str | Path) -> InputTable:
    """Read a long or summary CSV, detecting the format from its header."""
    frame = _read_csv(path)
    columns = set(frame.columns)
    if frame.empty and columns in (set(LONG_COLUMNS), set(SUMMARY_COLUMNS)):
        raise InvalidInput(f"{path}: no data rows")
    if columns == set(LONG_COLUMNS):
        table = _parse_long(frame, path)
    elif columns == set(SUMMARY_COLUMNS):
        table = _parse_summary(frame, path)
    else:
        raise InvalidInput(
            f"{path}: unrecognized header {list(frame.columns)}; expected "
            f"{','.join(LONG_COLUMNS)} or {','.join(SUMMARY_COLUMNS)}"
        )
    logger.info("Read %s table %s: k=%d, N=%d", table.format.value, path, table.stats.k, table.stats.N)
    return table


def read_cells(path: str | Path) -> pd.DataFrame:
    """Read ``cell,count,value`` records; counts must be non-negative integers."""
    frame = _read_csv(path)
    missing = [c for c in CELL_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidInput(f"{path}: missing column(s) {', '.join(missing)}; expected {','.join(CELL_COLUMNS)}")
    if frame.empty:
        raise InvalidInput(f"{path}: no data rows")
    data = _numeric(frame, ("count", "value"), path)
    count = _require_integral(data["count"], "count", 0, path)
    return pd.DataFrame({"cell": frame["cell"].str.strip(), "count": count, "value": data["value"]})


def group_cells(cells: pd.DataFrame, cap: int | None = None) -> pd.DataFrame:
    """Long-format ``level,value`` frame sorted by level; counts above ``cap`` become ``cap``."""
    if cap is not None and cap < 0:
        raise InvalidInput(f"cap must be non-negative, got {cap}")
    level = cells["count"].astype(np.int64)
    if cap is not None:
        capped = int((level > cap).sum())
        if capped:
            logger.info("Merged %d cell(s) with count above %d into the top level", capped, cap)
        level = level.clip(upper=cap)
    frame = pd.DataFrame({"level": level.to_numpy(), "value": cells["value"].to_numpy(dtype=float)})
    return frame.sort_values("level", kind="mergesort").reset_index(drop=True)


def write_long(frame: pd.DataFrame, path: str | Path | None = None) -> str:
    """Render the long-format frame as CSV; also written to ``path`` when given."""
    text = frame.to_csv(index=False, lineterminator="\n")
    if path is not None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    return text
