"""Embedding CSV, assignment CSV and run-manifest files."""

import csv
import json
import platform
import subprocess
from importlib import metadata
from pathlib import Path

import numpy as np

from .geometry import GeometryError, as_point


class FormatError(ValueError):
    pass


def write_embeddings(path, tokens, points):
    """``node_token,x_1..x_m`` rows; floats use ``repr`` so reading back is exact."""
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_token"] + [f"x_{a + 1}" for a in range(points.shape[1])])
        for tok, row in zip(tokens, points):
            w.writerow([tok] + [repr(float(v)) for v in row])


def read_embeddings(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such input: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["node_token"]:
        raise FormatError(f"{path}: missing 'node_token,x_1..x_m' header")
    dim = len(rows[0]) - 1
    tokens, coords = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 1:
            raise FormatError(f"{path} line {lineno}: expected {dim + 1} fields, got {len(row)}")
        try:
            coords.append([float(v) for v in row[1:]])
        except ValueError:
            raise FormatError(f"{path} line {lineno}: non-numeric coordinate") from None
        tokens.append(row[0])
    if not tokens:
        raise FormatError(f"{path}: no embeddings")
    points = np.array(coords, dtype=np.float64)
    try:
        points = as_point(points)
    except GeometryError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return tokens, points


def write_assignments(path, tokens, labels):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_token", "community"])
        for tok, c in zip(tokens, labels):
            w.writerow([tok, int(c)])


def read_assignments(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such input: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["node_token", "community"]:
        raise FormatError(f"{path}: missing 'node_token,community' header")
    try:
        return [r[0] for r in rows[1:]], np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
    except (IndexError, ValueError):
        raise FormatError(f"{path}: malformed assignment row") from None


def source_revision():
    """Package version plus the git commit of the source tree when available."""
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        rev = out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{version}+{rev}" if rev else version


def write_manifest(path, **fields):
    doc = {"revision": source_revision(), "python": platform.python_version(), **fields}
    Path(path).write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n", encoding="utf-8")
    return doc


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
