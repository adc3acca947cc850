"""Result files: JSON and CSV, each carrying the resolved config and a schema version."""
from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

SCHEMA_VERSION = "parisichaos-results/1"


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(payload) -> str:
    return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"


def write_json(path, kind: str, config: dict, result) -> str:
    payload = {"schema_version": SCHEMA_VERSION, "kind": kind, "config": config, "result": result}
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(payload))
    return path


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, kind: str, config: dict, header, rows) -> str:
    """CSV with '#' comment lines (schema, kind, config JSON) before the header."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        fh.write(f"# kind: {kind}\n")
        fh.write("# config: " + json.dumps(_plain(config), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def read_csv(path):
    """Return ``(meta, header, rows)``; rows are lists of strings."""
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().split("\n")
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].strip().partition(": ")
            meta[key] = json.loads(val) if key == "config" else val
        elif ln:
            body.append(ln)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]
