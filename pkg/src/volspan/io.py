"""Plain-text readers and writers for point sets, spanners and ellipsoids.

Point sets are CSV (one point per row, ``#`` comments) or JSON
``{"dim": d, "points": [[...], ...]}``. Floats are written with 17
significant digits.
"""
import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import VolspanError
from .geometry import PointSet, SpannerSet


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="io", **kw)


def fmt(x):
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _open_input(path):
    path = Path(path)
    if not path.is_file():
        raise _err("io_missing_input", f"input file not found: {path}", path=str(path))
    return path


def parse_points_csv(text, source="<string>"):
    rows = []
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            row = [float(tok) for tok in next(csv.reader([s]))]
        except ValueError as exc:
            raise _err("parse_error", f"{source}:{lineno}: {exc}", line=lineno) from None
        if dim is None:
            dim = len(row)
        elif len(row) != dim:
            raise _err("parse_error", f"{source}:{lineno}: expected {dim} columns, got {len(row)}", line=lineno)
        rows.append(row)
    if not rows:
        raise _err("parse_error", f"{source}: no points found")
    return np.array(rows, dtype=float)


def read_points(path):
    """Load a :class:`PointSet` from ``.csv`` or ``.json``."""
    path = _open_input(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise _err("parse_error", f"{path}:{exc.lineno}: {exc.msg}", line=exc.lineno) from None
        pts = np.asarray(obj.get("points", []), dtype=float)
        if "dim" in obj and pts.size and pts.shape[1] != int(obj["dim"]):
            raise _err("parse_error", f"{path}: dim field {obj['dim']} does not match points")
        return PointSet(pts)
    return PointSet(parse_points_csv(text, source=str(path)))


def points_to_csv(points, header=None):
    buf = _io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    for row in np.atleast_2d(points):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_points(path, K, header=None):
    pts = K.points if isinstance(K, PointSet) else np.atleast_2d(K)
    path = Path(path)
    if path.suffix.lower() == ".json":
        obj = {"dim": int(pts.shape[1]), "points": [[float(v) for v in row] for row in pts]}
        atomic_write_text(path, dumps(obj))
    else:
        atomic_write_text(path, points_to_csv(pts, header))


def dumps(obj):
    """Deterministic JSON: sorted keys, 17-digit floats via ``repr``."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def spanner_to_dict(S, max_norm):
    uniq, counts = S.multiplicities()
    return {
        "indices": [int(i) for i in uniq],
        "multiplicities": [int(c) for c in counts],
        "max_norm": float(max_norm),
    }


def write_spanner(path, S, max_norm, extra=None):
    obj = spanner_to_dict(S, max_norm)
    if extra:
        obj.update(extra)
    atomic_write_text(path, dumps(obj))


def read_spanner(path, K):
    """Rebuild a :class:`SpannerSet` over ``K`` from spanner JSON."""
    path = _open_input(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise _err("parse_error", f"{path}:{exc.lineno}: {exc.msg}", line=exc.lineno) from None
    idx = obj.get("indices")
    if idx is None:
        raise _err("parse_error", f"{path}: missing 'indices'")
    mult = obj.get("multiplicities") or [1] * len(idx)
    if len(mult) != len(idx):
        raise _err("parse_error", f"{path}: indices and multiplicities differ in length")
    return SpannerSet.from_points(K, np.repeat(np.asarray(idx, dtype=int), np.asarray(mult, dtype=int)))


def write_ellipsoid(path, E):
    d = E.shape.shape[0]
    obj = {"dim": d, "shape": [float(v) for v in E.shape.reshape(-1)], "log_volume": float(E.log_volume)}
    atomic_write_text(path, dumps(obj))


def read_halfspaces(path):
    """Rows ``a_1, ..., a_d, b`` meaning ``a^T x <= b``."""
    path = _open_input(path)
    M = parse_points_csv(path.read_text(), source=str(path))
    if M.shape[1] < 2:
        raise _err("parse_error", f"{path}: halfspace rows need at least 2 columns")
    return M[:, :-1], M[:, -1]
