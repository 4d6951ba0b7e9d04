"""CSV data, model files and flat JSON config files.

A model file is line-delimited JSON.  The first line is a metadata record;
each following line holds one retained snapshot as ``{"phi": .., "trees": [..]}``
with every tree in its pre-order text encoding.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .draws import PosteriorDraws, TransformRecord
from .simdata import Dataset

FORMAT_VERSION = 1


class DataError(ValueError):
    """Input data or model file that cannot be used."""


@dataclass
class CsvTable:
    header: list[str]
    rows: list[list[str]]


def _read_table(path) -> CsvTable:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [r for r in reader if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if not header:
        raise DataError(f"{path}: missing header row")
    header = [h.strip() for h in header]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(r)} fields, header has {len(header)}")
    return CsvTable(header, rows)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in {"", "na", "nan", "null"}


def _to_float(cell: str, col: str, line: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} in column {col!r} (line {line})") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value {cell!r} in column {col!r} (line {line})")
    return v


def read_csv(path, target: str | None = None, columns: list[str] | None = None
             ) -> tuple[Dataset, int]:
    """Load a numeric CSV into a Dataset, dropping rows with a missing cell.

    With ``target=None`` the response is all zeros (prediction input).  When
    ``columns`` is given the predictors are taken in that order.  Returns the
    dataset and the number of dropped rows.
    """
    table = _read_table(path)
    if target is not None and target not in table.header:
        raise DataError(f"target column {target!r} not found in {path}")
    if columns is None:
        columns = [h for h in table.header if h != target]
    missing = [c for c in columns if c not in table.header]
    if missing:
        raise DataError(f"{path}: missing predictor columns {missing}")
    if not columns:
        raise DataError(f"{path}: no predictor columns")
    idx = [table.header.index(c) for c in columns]
    t_idx = table.header.index(target) if target is not None else None
    used = idx + ([t_idx] if t_idx is not None else [])

    X, y, dropped = [], [], 0
    for line, r in enumerate(table.rows, start=2):
        if any(_is_missing(r[j]) for j in used):
            dropped += 1
            continue
        X.append([_to_float(r[j], table.header[j], line) for j in idx])
        y.append(_to_float(r[t_idx], target, line) if t_idx is not None else 0.0)
    if not X:
        raise DataError(f"{path}: no complete rows")
    data = Dataset(np.array(X), np.array(y), list(columns), target or "y")
    return data, dropped


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_dataset(path, data: Dataset) -> None:
    rows = np.column_stack([data.X, data.y])
    write_csv(path, list(data.columns) + [data.target], rows.tolist())


def _metadata(post: PosteriorDraws) -> dict:
    t = post.transform
    return {
        "format_version": FORMAT_VERSION,
        "kind": post.kind,
        "n_trees": post.n_trees,
        "n_features": post.n_features,
        "columns": list(post.columns),
        "target": post.target,
        "transform": {"y_min": t.y_min, "y_max": t.y_max, "is_identity": t.is_identity},
        "config": post.config,
        "acceptance": post.acceptance,
    }


def save_model(post: PosteriorDraws, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(_metadata(post), sort_keys=True) + "\n")
        for s in range(post.n_snapshots):
            rec = {"phi": float(post.phi[s]), "trees": post.tree_encodings(s)}
            fh.write(json.dumps(rec) + "\n")


def load_model(path) -> PosteriorDraws:
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc.strerror}") from None
    if not lines:
        raise DataError(f"{path}: empty model file")
    try:
        meta = json.loads(lines[0])
        snaps = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed model file ({exc.msg})") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format {meta.get('format_version')!r}")
    if not snaps:
        raise DataError(f"{path}: model file holds no snapshots")
    n_trees = int(meta["n_trees"])
    if any(len(s["trees"]) != n_trees for s in snaps):
        raise DataError(f"{path}: snapshot with the wrong number of trees")
    tr = meta["transform"]
    return PosteriorDraws.from_encodings(
        [s["trees"] for s in snaps], [s["phi"] for s in snaps],
        n_trees=n_trees, n_features=int(meta["n_features"]),
        transform=TransformRecord(tr["y_min"], tr["y_max"], tr["is_identity"]),
        config=meta.get("config", {}), kind=meta.get("kind", "regression"),
        columns=list(meta.get("columns", [])), target=meta.get("target", "y"),
        acceptance=meta.get("acceptance", {}),
    )


def read_config(path) -> dict:
    """Flat JSON object of option names to scalar values."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed config ({exc.msg})") from None
    if not isinstance(cfg, dict) or any(isinstance(v, (dict, list)) for v in cfg.values()):
        raise DataError(f"{path}: config must be a flat JSON object")
    return cfg
