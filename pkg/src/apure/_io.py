"""Atomic CSV/JSON output helpers shared by the command-line interface.

All writers go through a temp-file + rename so partially written artifacts
never appear under the target name.  Floats are serialized with repr()
(shortest round-tripping form) and CSVs carry ``#``-prefixed header
comments recording the seed of the producing run.
"""

from __future__ import annotations

import json
import os
import tempfile

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "atomic_write_text", "write_csv", "write_json", "fmt"]


def fmt(value) -> str:
    """Shortest representation that round-trips through float()."""
    if isinstance(value, float):
        # plain repr: numpy scalar reprs carry a type prefix
        return repr(float(value))
    return str(value)


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(path, columns: dict, comments: dict | None = None) -> None:
    """RFC-4180-style CSV with leading ``# key=value`` comment lines.

    ``columns`` maps header name to an equal-length sequence of values.
    """
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    n_rows = len(cols[0]) if cols else 0
    if any(len(c) != n_rows for c in cols):
        raise ValueError("all columns must have equal length")
    lines = []
    for key, value in (comments or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(",".join(names))
    for i in range(n_rows):
        lines.append(",".join(fmt(c[i]) for c in cols))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    import enum

    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.datetime64):
        return str(obj)
    return obj


def write_json(path, payload: dict, seed=None) -> None:
    """JSON report with a schema-version field (and the seed, if any)."""
    body = {"schema_version": SCHEMA_VERSION}
    if seed is not None:
        body["seed"] = seed
    body.update(_jsonable(payload))
    atomic_write_text(path, json.dumps(body, indent=2) + "\n")
