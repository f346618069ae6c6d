"""CSV/JSON emission of result rows with a fixed column order."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence, TextIO


@dataclass(frozen=True)
class ResultRow:
    env: str
    tracker: str
    noise: str
    epsilon: float
    seed: int
    frames: int
    test_return_mean: float
    test_return_se: float
    wall_ms: int

    def key(self):
        return (self.env, self.tracker, self.noise, self.epsilon, self.seed)


@dataclass(frozen=True)
class BeliefDiagnosticRow:
    env: str
    tracker: str
    seed: int
    episodes: int
    histories: int
    tv_mean: float
    tv_se: float

    def key(self):
        return (self.env, self.tracker, self.seed)


@dataclass(frozen=True)
class CurveRow:
    env: str
    tracker: str
    noise: str
    epsilon: float
    seed: int
    frame: int
    test_return_mean: float
    test_return_se: float


@dataclass(frozen=True)
class OracleRow:
    env: str
    noise: str
    epsilon: float
    oracle: str
    value: float
    states: int
    iterations: int
    residual: float


ROW_TYPES = (ResultRow, BeliefDiagnosticRow, CurveRow, OracleRow)


def columns(row_type) -> list[str]:
    return [f.name for f in fields(row_type)]


def _cell(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_rows(rows: Sequence, stream: TextIO, fmt: str = "csv", row_type=None) -> None:
    row_type = row_type or (type(rows[0]) if rows else ResultRow)
    cols = columns(row_type)
    if fmt == "json":
        json.dump([asdict(r) for r in rows], stream, indent=1)
        stream.write("\n")
    elif fmt == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in cols])
    else:
        raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows: Sequence, path: str | Path | None, fmt: str = "csv", row_type=None) -> str:
    """Write rows to ``path`` (UTF-8, LF). Returns the text; ``path=None`` only renders."""
    buf = io.StringIO()
    write_rows(rows, buf, fmt, row_type)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def parse_results(text: str, row_type=ResultRow, fmt: str = "csv") -> list:
    types = {f.name: f.type for f in fields(row_type)}
    conv = {"str": str, "int": int, "float": float}
    if fmt == "json":
        records = json.loads(text)
    else:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != columns(row_type):
            raise ValueError(f"unexpected header {reader.fieldnames}")
        records = list(reader)
    return [row_type(**{k: conv[types[k]](v) for k, v in rec.items()}) for rec in records]


def read_results(path: str | Path, row_type=ResultRow, fmt: str = "csv") -> list:
    return parse_results(Path(path).read_text(encoding="utf-8"), row_type, fmt)
