"""CSV/JSON/JSONL readers and writers shared by the CLI and tests.

Series CSV schema: header ``t,x0..x{D-1},y0..y{C-1}``; for plain time
series ``x0`` equals ``t``. JSONL files are written with sorted keys and
compact separators so identical runs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .window import TimeSeriesWindow


def write_series_csv(path, window: TimeSeriesWindow) -> None:
    path = Path(path)
    d, c = window.input_dim, window.channel_count
    header = ["t"] + [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(c)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        ts = window.timestamps()
        for i in range(len(window)):
            row = [int(ts[i])]
            row += [repr(float(v)) for v in window.inputs[i]]
            row += [repr(float(v)) for v in window.outputs[i]]
            writer.writerow(row)


def read_series_csv(path) -> TimeSeriesWindow:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        if not header or header[0] != "t":
            raise ValueError(f"{path}: first column must be 't', got {header[:1]}")
        d = sum(1 for name in header if name.startswith("x"))
        c = sum(1 for name in header if name.startswith("y"))
        if d == 0 or c == 0 or 1 + d + c != len(header):
            raise ValueError(f"{path}: header must be t,x0..,y0.. but is {header}")
        ts, xs, ys = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1 + d + c:
                raise ValueError(f"{path}: row {lineno} has {len(row)} fields, expected {1 + d + c}")
            try:
                ts.append(int(row[0]))
                xs.append([float(v) for v in row[1:1 + d]])
                ys.append([float(v) for v in row[1 + d:]])
            except ValueError as exc:
                raise ValueError(f"{path}: row {lineno}: {exc}") from None
    if not ts:
        raise ValueError(f"{path}: no data rows")
    start = ts[0]
    if ts != list(range(start, start + len(ts))):
        raise ValueError(f"{path}: timestamps are not contiguous from {start}")
    return TimeSeriesWindow(np.array(xs), np.array(ys), start_index=start)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path, records: list[dict]) -> None:
    with Path(path).open("w") as fh:
        for record in records:
            fh.write(canonical_json(record) + "\n")


def read_jsonl(path) -> list[dict]:
    records = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return records


def write_json(path, obj) -> None:
    with Path(path).open("w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    path = Path(path)
    try:
        with path.open() as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
