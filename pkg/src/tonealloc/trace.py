"""Trace records and their on-disk CSV format (round-trip exact)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["TraceRecord", "write_trace", "read_trace", "trace_header"]


@dataclass(frozen=True)
class TraceRecord:
    """One row per round of the distributed run."""

    round: int
    residual: float
    dual_value: float
    prices: np.ndarray
    demand: np.ndarray
    updates_performed: int
    messages_dropped: int

    def __post_init__(self):
        if self.residual < 0:
            raise ValidationError("residual must be >= 0")
        if self.updates_performed > self.prices.size:
            raise ValidationError("updates_performed exceeds tone count")


def trace_header(num_tones: int) -> str:
    cols = ["round", "residual", "dual_value", "updates_performed", "messages_dropped"]
    cols += [f"mu_{n}" for n in range(num_tones)]
    cols += [f"d_{n}" for n in range(num_tones)]
    return ",".join(cols)


def _fmt(x: float) -> str:
    # 17 significant digits: round-trips exactly through float()
    return "%.17g" % x


def write_trace(records, destination, metadata: dict | None = None) -> None:
    """Write trace rows as CSV, plus an optional JSON metadata sidecar.

    `destination` is a path or a writable text stream. Floats are printed
    with 17 significant digits so that a write/parse round trip reproduces
    the records exactly.
    """
    records = list(records)
    num_tones = records[0].prices.size if records else 0

    def _dump(fh):
        fh.write(trace_header(num_tones) + "\n")
        for r in records:
            row = [
                str(int(r.round)),
                _fmt(r.residual),
                _fmt(r.dual_value),
                str(int(r.updates_performed)),
                str(int(r.messages_dropped)),
            ]
            row += [_fmt(float(x)) for x in r.prices]
            row += [str(int(x)) for x in r.demand]
            fh.write(",".join(row) + "\n")

    if hasattr(destination, "write"):
        _dump(destination)
    else:
        try:
            with open(destination, "w") as fh:
                _dump(fh)
        except OSError as exc:
            raise OSError(f"cannot write trace to {destination}: {exc}") from exc
        if metadata is not None:
            with open(str(destination) + ".meta.json", "w") as fh:
                json.dump(metadata, fh, indent=2, sort_keys=True)
                fh.write("\n")


def read_trace(source) -> list[TraceRecord]:
    """Parse a trace CSV written by write_trace."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source) as fh:
            lines = fh.read().splitlines()
    if not lines:
        raise ValidationError("empty trace file")
    header = lines[0].split(",")
    n = sum(1 for c in header if c.startswith("mu_"))
    records = []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        records.append(
            TraceRecord(
                round=int(parts[0]),
                residual=float(parts[1]),
                dual_value=float(parts[2]),
                updates_performed=int(parts[3]),
                messages_dropped=int(parts[4]),
                prices=np.array([float(x) for x in parts[5:5 + n]]),
                demand=np.array([int(x) for x in parts[5 + n:5 + 2 * n]]),
            )
        )
    return records
