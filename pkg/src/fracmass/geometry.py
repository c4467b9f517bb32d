"""Oriented polygonal curves, discrete 1-currents and their boundaries.

A :class:`SegmentCurrent` is stored column-wise (start points, end points,
weights) so that the quadrature kernels can work on whole arrays.  The
per-segment view :class:`OrientedSegment` is available for convenience.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class OrientedSegment:
    start: np.ndarray
    end: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        start, end = _frozen(self.start), _frozen(self.end)
        if start.shape != end.shape or start.ndim != 1 or start.size < 2:
            raise ValueError("segment endpoints must be points of the same dimension >= 2")
        if not (np.all(np.isfinite(start)) and np.all(np.isfinite(end))):
            raise ValueError("segment endpoints must be finite")
        if np.array_equal(start, end):
            raise ValueError("segment has zero length")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def length(self):
        return float(np.linalg.norm(self.end - self.start))

    @property
    def tangent(self):
        return (self.end - self.start) / self.length


@dataclass(frozen=True)
class PolyCurve:
    """Piecewise linear curve through ``vertices``.

    For closed curves the closing edge from the last vertex back to the
    first is implicit and the first vertex is not repeated.
    """

    vertices: np.ndarray
    closed: bool = False
    weight: float = 1.0

    def __post_init__(self):
        v = _frozen(self.vertices)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError("a curve needs at least 2 vertices in dimension >= 2")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        if not self.weight > 0:
            raise ValueError("curve weight must be positive")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "closed", bool(self.closed))
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def dim(self):
        return self.vertices.shape[1]

    def __len__(self):
        return self.vertices.shape[0]

    def edges(self):
        """Return ``(starts, ends)`` arrays, including the closing edge."""
        v = self.vertices
        ends = np.roll(v, -1, axis=0) if self.closed else v[1:]
        starts = v if self.closed else v[:-1]
        return starts, ends

    def length(self):
        a, b = self.edges()
        return float(np.linalg.norm(b - a, axis=1).sum())

    def reversed(self):
        return PolyCurve(self.vertices[::-1], self.closed, self.weight)


class SegmentCurrent:
    """Weighted family of oriented segments, the discrete vector measure

    mu = sum_i w_i tau_i H^1 restricted to [a_i, b_i].

    Zero-weight segments are dropped on construction.
    """

    __slots__ = ("starts", "ends", "weights")

    def __init__(self, starts, ends, weights):
        a = np.array(starts, dtype=float)
        b = np.array(ends, dtype=float)
        w = np.array(weights, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape != b.shape or a.shape[0] != w.shape[0]:
            raise ValueError("inconsistent segment arrays")
        if a.shape[1] < 2:
            raise ValueError("dimension must be >= 2")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(w))):
            raise ValueError("segment data must be finite")
        zero_len = np.all(a == b, axis=1)
        if np.any(zero_len):
            raise ValueError(f"zero-length segment at index {int(np.flatnonzero(zero_len)[0])}")
        keep = w != 0
        if not np.all(keep):
            a, b, w = a[keep], b[keep], w[keep]
        for arr in (a, b, w):
            arr.setflags(write=False)
        self.starts, self.ends, self.weights = a, b, w

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def from_segments(cls, segments, dim=None):
        segments = list(segments)
        if not segments:
            if dim is None:
                raise ValueError("dimension required for an empty current")
            return cls.empty(dim)
        dims = {s.start.size for s in segments}
        if len(dims) != 1 or (dim is not None and dims != {dim}):
            raise ValueError("mixed dimensions in segment list")
        return cls([s.start for s in segments], [s.end for s in segments],
                   [s.weight for s in segments])

    @property
    def dim(self):
        return self.starts.shape[1]

    def __len__(self):
        return self.starts.shape[0]

    def __iter__(self):
        for a, b, w in zip(self.starts, self.ends, self.weights):
            yield OrientedSegment(a, b, w)

    @property
    def segments(self):
        return list(self)

    @property
    def lengths(self):
        return np.linalg.norm(self.ends - self.starts, axis=1)

    @property
    def tangents(self):
        return (self.ends - self.starts) / self.lengths[:, None]

    def mass(self):
        """Total variation |mu|(R^d) = sum |w| * length."""
        return float(np.sum(np.abs(self.weights) * self.lengths))

    def vector_mass(self):
        return np.sum(self.weights[:, None] * (self.ends - self.starts), axis=0)

    def reversed(self):
        return SegmentCurrent(self.ends, self.starts, self.weights)

    def scaled(self, factor):
        """Multiply every weight by ``factor``."""
        return SegmentCurrent(self.starts, self.ends, self.weights * factor)

    def __neg__(self):
        return self.scaled(-1.0)

    def __add__(self, other):
        """Disjoint union (segments are concatenated, never merged)."""
        if not isinstance(other, SegmentCurrent):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("cannot combine currents of different dimensions")
        return SegmentCurrent(np.vstack([self.starts, other.starts]),
                              np.vstack([self.ends, other.ends]),
                              np.concatenate([self.weights, other.weights]))

    def __sub__(self, other):
        return self + (-other)

    def bbox(self):
        pts = np.vstack([self.starts, self.ends])
        return pts.min(axis=0), pts.max(axis=0)

    def diameter(self):
        if len(self) == 0:
            return 0.0
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def __repr__(self):
        return f"SegmentCurrent(n={len(self)}, dim={self.dim}, mass={self.mass():.6g})"


@dataclass(frozen=True)
class BoundaryChain:
    """0-current sum_k q_k [p_k]; ``tol`` is the merge tolerance used."""

    points: np.ndarray
    charges: np.ndarray
    tol: float = 0.0

    def __len__(self):
        return self.charges.shape[0]

    @property
    def atoms(self):
        return [(p, float(q)) for p, q in zip(self.points, self.charges)]

    def is_empty(self):
        return len(self) == 0

    def total_charge(self):
        return float(np.sum(self.charges))


def curve_to_current(c):
    starts, ends = c.edges()
    same = np.all(starts == ends, axis=1)
    if np.any(same):
        raise ValueError(f"degenerate edge at vertex index {int(np.flatnonzero(same)[0])}")
    return SegmentCurrent(starts, ends, np.full(starts.shape[0], c.weight))


def curves_to_current(curves, dim=None):
    curves = list(curves)
    if not curves:
        if dim is None:
            raise ValueError("dimension required for an empty family")
        return SegmentCurrent.empty(dim)
    out = curve_to_current(curves[0])
    for c in curves[1:]:
        out = out + curve_to_current(c)
    return out


def default_tol(mu):
    return 1e-9 * mu.diameter()


def merge_points(points, tol):
    """Label points so that points within ``tol`` (transitively) share a label.

    Labels are ordered by the lexicographically smallest member of each
    cluster, which keeps downstream output deterministic.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp), points
    if tol <= 0:
        reps, labels = np.unique(points, axis=0, return_inverse=True)
        return labels.reshape(-1), reps
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    order = np.lexsort(points.T[::-1])
    first = {}
    for idx in order:
        first.setdefault(comp[idx], idx)
    rank = {c: k for k, c in enumerate(sorted(first, key=lambda c: tuple(points[first[c]])))}
    labels = np.array([rank[c] for c in comp], dtype=np.intp)
    reps = np.array([points[first[c]] for c in sorted(rank, key=rank.get)])
    return labels, reps


def boundary(mu, tol=None):
    """Boundary chain: +w at every end point, -w at every start point."""
    tol = default_tol(mu) if tol is None else float(tol)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if len(mu) == 0:
        return BoundaryChain(np.zeros((0, mu.dim)), np.zeros(0), tol)
    pts = np.vstack([mu.ends, mu.starts])
    q = np.concatenate([mu.weights, -mu.weights])
    labels, reps = merge_points(pts, tol)
    charge = np.zeros(reps.shape[0])
    scale = np.zeros(reps.shape[0])
    np.add.at(charge, labels, q)
    np.add.at(scale, labels, np.abs(q))
    # charges that cancel up to rounding are zero
    keep = np.abs(charge) > 1e-12 * scale
    return BoundaryChain(_frozen(reps[keep]), _frozen(charge[keep]), tol)


def detect_quantum(weights, rtol=1e-6):
    """Largest delta such that every |w| is an integer multiple of delta."""
    w = np.abs(np.asarray(weights, dtype=float))
    if w.size == 0:
        raise ValueError("no weights")
    q = w.min()
    for x in np.unique(w):
        # Euclid with tolerance
        a, b = max(x, q), min(x, q)
        while b > rtol * w.max():
            a, b = b, a - b * np.floor(a / b + rtol)
            if b < 0:
                b = 0.0
        q = a
    mult = w / q
    if np.any(np.abs(mult - np.round(mult)) > rtol * np.maximum(mult, 1.0)) or mult.max() > 1e6:
        raise ValueError("weights are not commensurable")
    return float(q)


def loop_decompose(mu, tol=None, quantum=None):
    """Split a boundary-free current into closed curves of weight delta.

    Every segment becomes round(|w|/delta) unit copies (reversed when w < 0).
    Closed trails are peeled off by walking along the lexicographically
    smallest unused outgoing edge and cutting a loop as soon as the walk
    revisits a vertex of the current path, so the output curves are
    simple cycles of the vertex graph.
    """
    tol = default_tol(mu) if tol is None else float(tol)
    if len(mu) == 0:
        return []
    bd = boundary(mu, tol)
    if not bd.is_empty():
        shown = ", ".join(f"{tuple(np.round(p, 12))}:{q:+g}" for p, q in bd.atoms[:5])
        raise ValueError(f"current has nonzero boundary ({len(bd)} atoms): {shown}")
    delta = detect_quantum(mu.weights) if quantum is None else float(quantum)
    mult = np.abs(mu.weights) / delta
    reps_count = np.round(mult).astype(np.int64)
    if np.any(np.abs(mult - reps_count) > 1e-6 * np.maximum(mult, 1.0)) or np.any(reps_count == 0):
        raise ValueError("weights are not integer multiples of the quantum")

    flip = mu.weights < 0
    a = np.where(flip[:, None], mu.ends, mu.starts)
    b = np.where(flip[:, None], mu.starts, mu.ends)
    labels, reps = merge_points(np.vstack([a, b]), tol)
    n = len(mu)
    src, dst = labels[:n], labels[n:]

    # outgoing edge stacks, popped from the end, so store in reverse order
    order = np.lexsort((np.arange(n),) + tuple(reps[dst].T[::-1]) + (src,))
    out = {}
    for e in order:
        out.setdefault(int(src[e]), []).extend([int(e)] * int(reps_count[e]))
    for v in out:
        out[v].reverse()

    loops = []
    for start in sorted(out):
        while out[start]:
            path = [start]
            pos = {start: 0}
            v = start
            while True:
                e = out[v].pop()
                w = int(dst[e])
                if w in pos:
                    k = pos[w]
                    cycle = path[k:]
                    loops.append(PolyCurve(reps[cycle], closed=True, weight=delta))
                    for u in cycle[1:]:
                        del pos[u]
                    del path[k + 1:]
                    v = w
                    if len(path) == 1 and v == start:
                        break
                    continue
                pos[w] = len(path)
                path.append(w)
                v = w
    return loops


def transform(mu, scale=1.0, shift=None):
    if not scale > 0:
        raise ValueError("scale must be positive")
    shift = np.zeros(mu.dim) if shift is None else np.asarray(shift, dtype=float)
    if shift.shape != (mu.dim,):
        raise ValueError("shift dimension mismatch")
    return SegmentCurrent(scale * mu.starts + shift, scale * mu.ends + shift, mu.weights)


def transform_curve(c, scale=1.0, shift=None, rotation=None):
    v = c.vertices
    if rotation is not None:
        v = v @ np.asarray(rotation, dtype=float).T
    shift = np.zeros(c.dim) if shift is None else np.asarray(shift, dtype=float)
    return PolyCurve(scale * v + shift, c.closed, c.weight)


def sample_smooth_curve(kind, params=None, n=64):
    """Sample a smooth fixture curve at ``n`` equal parameter steps.

    kinds: ``circle`` (r, center), ``ellipse`` (a, b, center), ``helix``
    (r, pitch, turns) and ``segment`` (length, direction).
    """
    p = dict(params or {})
    if kind in ("circle", "ellipse"):
        if n < 3:
            raise ValueError("closed curves need n >= 3")
        if kind == "circle":
            a = b = float(p.get("r", 1.0))
        else:
            a, b = float(p.get("a", 2.0)), float(p.get("b", 1.0))
        if a <= 0 or b <= 0:
            raise ValueError("radii must be positive")
        t = 2 * np.pi * np.arange(n) / n
        v = np.column_stack([a * np.cos(t), b * np.sin(t)])
        v += np.asarray(p.get("center", (0.0, 0.0)), dtype=float)
        return PolyCurve(v, closed=True)
    if kind == "helix":
        r, pitch, turns = float(p.get("r", 1.0)), float(p.get("pitch", 1.0)), float(p.get("turns", 1.0))
        if r <= 0 or turns <= 0 or n < 2:
            raise ValueError("invalid helix parameters")
        t = 2 * np.pi * turns * np.linspace(0.0, 1.0, n)
        return PolyCurve(np.column_stack([r * np.cos(t), r * np.sin(t), pitch * t / (2 * np.pi)]))
    if kind == "segment":
        length = float(p.get("length", 1.0))
        if length <= 0 or n < 2:
            raise ValueError("invalid segment parameters")
        direction = np.asarray(p.get("direction", (1.0, 0.0)), dtype=float)
        direction = direction / np.linalg.norm(direction)
        t = np.linspace(0.0, length, n)
        return PolyCurve(t[:, None] * direction[None, :])
    raise ValueError(f"unknown curve kind {kind!r}")


def _seg_distance(a0, a1, b0, b1):
    """Pairwise distances between segment arrays (broadcasting)."""
    d1, d2 = a1 - a0, b1 - b0
    r = a0 - b0
    aa = np.sum(d1 * d1, -1)
    ee = np.sum(d2 * d2, -1)
    ff = np.sum(d2 * r, -1)
    cc = np.sum(d1 * r, -1)
    bb = np.sum(d1 * d2, -1)
    den = aa * ee - bb * bb
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den > 1e-300 * aa * ee, np.clip((bb * ff - cc * ee) / den, 0, 1), 0.0)
        t = (bb * s + ff) / ee
        s = np.where(t < 0, np.clip(-cc / aa, 0, 1), np.where(t > 1, np.clip((bb - cc) / aa, 0, 1), s))
        t = np.clip(t, 0, 1)
    diff = r + s[..., None] * d1 - t[..., None] * d2
    return np.linalg.norm(diff, axis=-1)


def self_intersections(c, tol=1e-9):
    """Index pairs of non-adjacent edges of ``c`` closer than ``tol``."""
    a, b = c.edges()
    m = a.shape[0]
    hits = []
    block = 512
    for i0 in range(0, m, block):
        ii = np.arange(i0, min(i0 + block, m))
        dist = _seg_distance(a[ii, None], b[ii, None], a[None], b[None])
        jj = np.arange(m)[None, :]
        sep = np.abs(ii[:, None] - jj)
        if c.closed:
            sep = np.minimum(sep, m - sep)
        mask = (sep > 1) & (dist < tol) & (jj > ii[:, None])
        for i, j in zip(*np.nonzero(mask)):
            hits.append((int(ii[i]), int(j)))
    return hits


def is_simple(c, tol=1e-9):
    return not self_intersections(c, tol)
