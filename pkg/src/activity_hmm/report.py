"""Deterministic CSV/JSON writers and the bundle manifest."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if hasattr(o, "to_dict"):
        return _plain(o.to_dict())
    if hasattr(o, "isoformat"):
        return o.isoformat()
    return o


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    path.write_text(csv_text(rows, columns))
    return path


def read_csv(path) -> list[dict]:
    """Read a table written by :func:`write_csv`; numeric cells become int/float, blanks None."""
    def conv(s):
        if s == "":
            return None
        for t in (int, float):
            try:
                return t(s)
            except ValueError:
                pass
        return s
    with Path(path).open(newline="") as fh:
        return [{k: conv(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_table(path_stem, rows, columns=None, fmt: str = "csv") -> Path:
    path_stem = Path(path_stem)
    if fmt == "json":
        return write_json(path_stem.with_suffix(".json"), list(rows))
    return write_csv(path_stem.with_suffix(".csv"), rows, columns)


def sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def versions() -> dict:
    import scipy

    from . import __version__
    return {"activity_hmm": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, config: dict, inputs: Iterable = ()) -> Path:
    """manifest.json: config and its hash, input hashes, seed, versions, artifact hashes."""
    out_dir = Path(out_dir)
    config = _plain(config)
    artifacts = {p.name: sha256_file(p) for p in sorted(out_dir.iterdir())
                 if p.is_file() and p.name != "manifest.json"}
    manifest = {
        "config": config,
        "config_hash": sha256_bytes(json.dumps(config, sort_keys=True).encode()),
        "inputs": {str(Path(p).name): sha256_file(p) for p in inputs if p},
        "seed": config.get("seed"),
        "versions": versions(),
        "artifacts": artifacts,
    }
    return write_json(out_dir / "manifest.json", manifest)
