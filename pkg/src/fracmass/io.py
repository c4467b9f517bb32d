"""JSON/CSV readers and writers for curves, currents, regions and configs.

Floats go through ``repr``-exact JSON (Python writes the shortest string
that round-trips), so reading back what was written is loss-free.
"""

import csv
import json
import math

import numpy as np

from .geometry import PolyCurve, SegmentCurrent
from .perimeter import PlanarRegion


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def _floats(rows, what):
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what}: expected numbers") from exc
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what}: non-finite value")
    return arr


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def curve_to_dict(c):
    return {"closed": c.closed, "weight": c.weight, "vertices": c.vertices.tolist()}


def curve_from_dict(d, dim=None):
    try:
        v = _floats(d["vertices"], "vertices")
        c = PolyCurve(v, bool(d.get("closed", False)), float(d.get("weight", 1.0)))
    except KeyError as exc:
        raise InputError(f"curve is missing {exc}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if dim is not None and c.dim != dim:
        raise InputError(f"curve dimension {c.dim} does not match dim {dim}")
    return c


def curves_to_json(curves, path):
    dim = curves[0].dim if curves else 2
    _dump({"dim": dim, "curves": [curve_to_dict(c) for c in curves]}, path)


def read_curves(path):
    data = _load(path)
    if not isinstance(data, dict) or "curves" not in data:
        raise InputError(f"{path}: expected an object with a 'curves' list")
    dim = data.get("dim")
    curves = [curve_from_dict(d, dim) for d in data["curves"]]
    if not curves:
        raise InputError(f"{path}: no curves")
    return curves


def current_to_json(mu, path):
    segs = [{"a": a.tolist(), "b": b.tolist(), "w": float(w)}
            for a, b, w in zip(mu.starts, mu.ends, mu.weights)]
    _dump({"dim": mu.dim, "segments": segs}, path)


def read_current(path):
    data = _load(path)
    if not isinstance(data, dict) or "segments" not in data:
        raise InputError(f"{path}: expected an object with a 'segments' list")
    dim = int(data.get("dim", 2))
    segs = data["segments"]
    if not segs:
        return SegmentCurrent.empty(dim)
    try:
        a = _floats([s["a"] for s in segs], "a")
        b = _floats([s["b"] for s in segs], "b")
        w = _floats([s.get("w", 1.0) for s in segs], "w")
    except KeyError as exc:
        raise InputError(f"segment is missing {exc}") from exc
    if a.shape != b.shape or a.shape[1] != dim:
        raise InputError("segment endpoints do not match dim")
    return SegmentCurrent(a, b, w)


def region_to_json(E, path):
    _dump({"dim": 2, "outer": curve_to_dict(E.outer),
           "holes": [curve_to_dict(h) for h in E.holes]}, path)


def read_region(path):
    data = _load(path)
    if not isinstance(data, dict) or "outer" not in data:
        raise InputError(f"{path}: expected an object with 'outer' and optional 'holes'")
    outer = curve_from_dict({"closed": True, **data["outer"]}, 2)
    holes = tuple(curve_from_dict({"closed": True, **h}, 2) for h in data.get("holes", []))
    try:
        return PlanarRegion(outer, holes)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _value(text):
    text = text.strip()
    if text.startswith("(") or text.startswith("["):
        return tuple(float(x) for x in text.strip("()[]").split(",") if x.strip())
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment.  Tuples as ``(a, b)``."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key = value")
        key, val = line.split("=", 1)
        out[key.strip()] = _value(val)
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats for json.dumps."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
