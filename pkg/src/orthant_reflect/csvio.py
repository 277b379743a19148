"""Small CSV helpers shared by the path, solution and report writers.

Floats are written with 17 significant digits so that every value survives a
write/read round trip bit for bit.
"""

from __future__ import annotations

import csv
import io
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigParse


def fmt(value) -> str:
    v = float(value)
    if np.isnan(v):
        return "nan"
    return format(v, ".17g")


def write_table(
    fh,
    header: Sequence[str],
    rows: Iterable[Sequence[float]],
    trailer: Sequence[str] = (),
) -> None:
    """Write a header, numeric rows and optional ``# ...`` trailer lines."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    for line in trailer:
        fh.write(f"# {line}\n")


def table_text(header, rows, trailer=()) -> str:
    buf = io.StringIO()
    write_table(buf, header, rows, trailer)
    return buf.getvalue()


def read_table(source: str | PathLike | io.TextIOBase) -> tuple[list[str], np.ndarray, list[str]]:
    """Return ``(header, data, trailer)``; trailer lines have the ``# `` stripped."""
    if isinstance(source, io.TextIOBase):
        text = source.read()
        name = getattr(source, "name", "<stream>")
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
        name = str(source)
    header: list[str] | None = None
    rows: list[list[float]] = []
    trailer: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            trailer.append(line[1:].strip())
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header = [f.strip() for f in fields]
            continue
        if len(fields) != len(header):
            raise ConfigParse(
                f"{name}:{lineno}: expected {len(header)} fields, got {len(fields)}"
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ConfigParse(f"{name}:{lineno}: non-numeric field in {line!r}") from None
    if header is None:
        raise ConfigParse(f"{name}: missing header line")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data, trailer
