"""CSV/JSON output helpers: hash-stamped headers, atomic writes, canonical floats."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

__version_tag__ = "lrgl-0.1.0"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def fmt(x) -> str:
    """Repr-exact float formatting so identical runs emit identical bytes."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header_cols, rows, cfg_hash=""):
    """One '#'-prefixed metadata line, then a header row, then data rows."""
    with open(path, "w") as f:
        f.write(f"# config_hash={cfg_hash} toolkit={__version_tag__}\n")
        f.write(",".join(header_cols) + "\n")
        for row in rows:
            f.write(",".join(fmt(x) for x in row) + "\n")


def write_json_atomic(path, obj):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(obj, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
