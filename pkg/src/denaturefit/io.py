"""CSV and JSON formats used by the command line tools.

Datasets are UTF-8 CSV with the header ``denaturant,signal``; lines
starting with ``#`` are comments.  JSON documents carry
``"schema_version": 1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .model import PARAM_NAMES, DenaturationDataset, FullParams, to_triple

SCHEMA_VERSION = 1
DATASET_HEADER = ("denaturant", "signal")


class ParseError(ValueError):
    """Malformed dataset file; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def parse_dataset(text: str) -> DenaturationDataset:
    header_seen = False
    d, s = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            if tuple(f.lower() for f in fields) != DATASET_HEADER:
                raise ParseError(f"expected header 'denaturant,signal', got {line!r}", lineno)
            header_seen = True
            continue
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
        try:
            dv, sv = float(fields[0]), float(fields[1])
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", lineno) from None
        if not (math.isfinite(dv) and math.isfinite(sv)):
            raise ParseError("non-finite value", lineno)
        if dv < 0:
            raise ParseError("negative denaturant concentration", lineno)
        d.append(dv)
        s.append(sv)
    if not header_seen:
        raise ParseError("empty file: no 'denaturant,signal' header")
    try:
        return DenaturationDataset(d, s)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def read_dataset(path) -> DenaturationDataset:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}") from None
    return parse_dataset(text)


def format_dataset(data: DenaturationDataset, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    buf.write(",".join(DATASET_HEADER) + "\n")
    for dv, sv in zip(data.d.tolist(), data.signal.tolist()):
        buf.write(f"{dv!r},{sv!r}\n")
    return buf.getvalue()


def write_dataset(path, data: DenaturationDataset, comment: str | None = None):
    Path(path).write_text(format_dataset(data, comment), encoding="utf-8")


def write_rows(path_or_file, rows, fieldnames=None):
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    if hasattr(path_or_file, "write"):
        _write_csv(path_or_file, rows, fieldnames)
        return
    with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, rows, fieldnames)


def _write_csv(fh, rows, fieldnames):
    writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(doc) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **_jsonable(doc)}, indent=2) + "\n"


def write_json(path, doc):
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read_json(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}")
    return doc


def params_doc(p: FullParams):
    return {"form": p.form.value, "values": p.as_dict(), "triple": to_triple(p.lem).as_dict()}


def fit_report(fit, intervals=()):
    names = list(PARAM_NAMES[fit.form])
    doc = {
        "kind": "fit",
        "form": fit.form.value,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "n": fit.n,
        "dof": fit.dof,
        "sse": fit.sse,
        "s2": fit.s2,
        "params": fit.params.as_dict(),
        "triple": to_triple(fit.params.lem).as_dict(),
        "param_names": names,
        "covariance": fit.covariance,
        "correlation": fit.correlation,
    }
    if fit.covariance is not None:
        doc["stderr"] = dict(zip(names, fit.stderr().tolist()))
    doc["intervals"] = [iv.as_dict() for iv in intervals]
    return doc
