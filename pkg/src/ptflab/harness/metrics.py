"""Per-episode metrics records and their CSV files."""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from ..errors import ConfigurationError
from .policyfile import atomic_write


@dataclass(frozen=True)
class MetricsRecord:
    seed: int
    episode: int
    steps: int
    discounted_return: float
    raw_return: float
    length: int
    option_hist: tuple
    switches: int
    mean_weight: float
    epsilon: float

    @classmethod
    def from_episode(cls, seed, rec):
        return cls(seed, rec.episode, rec.steps, float(rec.discounted_return),
                   float(rec.raw_return), rec.length, tuple(rec.option_hist), rec.switches,
                   float(rec.mean_weight), float(rec.epsilon))


COLUMNS = tuple(f.name for f in fields(MetricsRecord))


def _cell(v):
    if isinstance(v, tuple):
        return "|".join(str(int(c)) for c in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_metrics(records, header_lines=()):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    buf.write(",".join(COLUMNS) + "\n")
    for r in records:
        buf.write(",".join(_cell(v) for v in astuple(r)) + "\n")
    return buf.getvalue()


def write_metrics(path, records, header_lines=()):
    atomic_write(path, format_metrics(records, header_lines))


def read_metrics(path):
    """``(header_lines, records)`` from a metrics CSV."""
    text = Path(path).read_text(encoding="utf-8")
    header, body = [], []
    for line in text.splitlines():
        if line.startswith("#"):
            header.append(line[1:].strip())
        elif line.strip():
            body.append(line)
    if not body or tuple(body[0].split(",")) != COLUMNS:
        raise ConfigurationError(f"{path}: not a metrics file (bad column row)")
    records = []
    for row in csv.reader(body[1:]):
        hist = tuple(int(c) for c in row[6].split("|")) if row[6] else ()
        records.append(MetricsRecord(int(row[0]), int(row[1]), int(row[2]), float(row[3]),
                                     float(row[4]), int(row[5]), hist, int(row[7]),
                                     float(row[8]), float(row[9])))
    return header, records
