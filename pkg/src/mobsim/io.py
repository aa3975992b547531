"""Flow-record CSV files, JSON reports and CSV trial tables.

Flow files carry the header ``ox,oy,dx,dy,flow`` with 1-based integer
coordinates; grid dimensions travel separately.  Undefined metrics are written
as the literal string ``undefined``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidParameterError, MobsimError, OutOfRangeError
from .metrics import SimilarityReport
from .solver import SolverConfig
from .tableau import GridSpec, MobilityTableau

HEADER = ("ox", "oy", "dx", "dy", "flow")
UNDEFINED = "undefined"
FORMAT_VERSION = 1


class FlowFileError(MobsimError, ValueError):
    """A flow file could not be parsed; the message carries the line number."""


def parse_grid(text: str, cell_width: float = 1.0) -> GridSpec:
    """Parse ``"MxN"`` into a grid."""
    match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text or "")
    if not match or int(match.group(1)) < 1 or int(match.group(2)) < 1:
        raise InvalidParameterError(f"malformed grid {text!r}; expected MxN with positive integers")
    return GridSpec(int(match.group(1)), int(match.group(2)), cell_width)


def read_records(lines: Iterable[str], grid: GridSpec, source: str = "<input>") -> MobilityTableau:
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise FlowFileError(f"{source}:1: missing header {','.join(HEADER)}") from None
    if tuple(h.strip().lower() for h in header) != HEADER:
        raise FlowFileError(f"{source}:1: expected header {','.join(HEADER)}, got {','.join(header)}")
    acc: dict[tuple, float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 5:
            raise FlowFileError(f"{source}:{lineno}: expected 5 fields, got {len(row)}")
        try:
            coords = tuple(int(cell) for cell in row[:4])
            flow = float(row[4])
        except ValueError:
            raise FlowFileError(f"{source}:{lineno}: cannot parse {','.join(row)!r}") from None
        if not math.isfinite(flow) or flow < 0:
            raise FlowFileError(f"{source}:{lineno}: flow must be a non-negative number, got {row[4]}")
        ox, oy, dx, dy = coords
        if not (grid.contains(ox, oy) and grid.contains(dx, dy)):
            raise OutOfRangeError(
                f"{source}:{lineno}: ({ox},{oy})->({dx},{dy}) is outside the {grid.rows_m}x{grid.cols_n} grid"
            )
        acc[coords] = acc.get(coords, 0.0) + flow
    return MobilityTableau(grid, acc)


def load_tableau(path, grid: GridSpec) -> MobilityTableau:
    """Read a flow file, merging duplicate rows and dropping zero flows."""
    path = Path(path)
    with path.open(newline="") as fh:
        return read_records(fh, grid, str(path))


def dumps_tableau(S: MobilityTableau) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for v, w in S.flows.items():
        writer.writerow([v.ox, v.oy, v.dx, v.dy, repr(w)])
    return buf.getvalue()


def save_tableau(S: MobilityTableau, path) -> None:
    Path(path).write_text(dumps_tableau(S))


def tableau_digest(S: MobilityTableau) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(dumps_tableau(S).encode()).hexdigest()


def _encode(value):
    if value is None:
        return UNDEFINED
    if isinstance(value, float) and not math.isfinite(value):
        return UNDEFINED
    return value


def _decode(value):
    return None if value == UNDEFINED else value


def build_report(report: SimilarityReport, grid: GridSpec, cfg: SolverConfig, digests: dict,
                 stats: dict) -> dict:
    """Assemble the JSON-ready report document."""
    return {
        "format_version": FORMAT_VERSION,
        "grid": {"rows_m": grid.rows_m, "cols_n": grid.cols_n, "cell_width": grid.cell_width},
        "inputs": digests,
        "solver": {k: v for k, v in asdict(cfg).items()},
        "mu": report.mu_used,
        "metrics": {k: _encode(v) for k, v in report.as_dict().items()},
        "stats": stats,
    }


def dumps_report(doc: dict) -> str:
    # json writes floats with repr, i.e. the shortest round-tripping form (up to 17 digits)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def loads_report(text: str) -> dict:
    return json.loads(text)


def report_metrics(doc: dict) -> SimilarityReport:
    """Rebuild the :class:`SimilarityReport` stored in a report document."""
    return SimilarityReport(**{k: _decode(v) for k, v in doc["metrics"].items()})


def format_cell(value) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return UNDEFINED
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows: Sequence[dict], path, columns: Sequence[str] | None = None) -> None:
    """Write dict rows as CSV with a stable column order."""
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([format_cell(r.get(c)) for c in columns])


def read_rows(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
