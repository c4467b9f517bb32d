"""Analytic divergence-free vector fields with compact support."""

from dataclasses import dataclass, field

import numpy as np

PRESETS = ("curl_bump_2d", "curl_bump_3d", "zero", "custom_analytic")


def _bump_potential(x, center, radius, amplitude):
    # phi = A R (1 - |x-c|^2/R^2)^3 inside the ball; returns phi and grad phi
    z = (x - center) / radius
    q = np.sum(z * z, axis=1)
    inside = q < 1.0
    g = np.where(inside, 1.0 - q, 0.0)
    phi = amplitude * radius * g ** 3
    grad = (-6.0 * amplitude * g ** 2)[:, None] * z
    return phi, grad


@dataclass(frozen=True)
class FieldSpec:
    """Compactly supported C^1 divergence-free field psi.

    ``curl_bump_2d``: psi = grad-perp of a polynomial bump potential,
    params ``center``, ``radius``, ``amplitude`` (peak speed is about
    1.72 * amplitude).  ``curl_bump_3d``: psi = grad(phi) x a for a
    constant axis ``a``.  ``custom_analytic``: a user callable ``func``
    mapping (m, d) points to (m, d) vectors, zero outside ``support_box``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    support_box: tuple = None

    def __post_init__(self):
        if self.kind not in PRESETS:
            raise ValueError(f"unknown field preset {self.kind!r}")
        p = dict(self.params)
        if self.kind in ("curl_bump_2d", "curl_bump_3d", "zero"):
            d = 2 if self.kind != "curl_bump_3d" else 3
            d = int(p.get("dim", d)) if self.kind == "zero" else d
            center = np.asarray(p.get("center", np.full(d, 0.5)), dtype=float)
            radius = float(p.get("radius", 0.5))
            if center.shape != (d,) or radius <= 0:
                raise ValueError("bad bump center/radius")
            p.update(center=center, radius=radius, amplitude=float(p.get("amplitude", 1.0)))
            if self.kind == "curl_bump_3d":
                axis = np.asarray(p.get("axis", (1.0, 2.0, 3.0)), dtype=float)
                p["axis"] = axis / np.linalg.norm(axis)
            box = (center - radius, center + radius)
        else:
            if "func" not in p or self.support_box is None:
                raise ValueError("custom_analytic needs func and support_box")
            box = self.support_box
        lo, hi = (np.asarray(b, dtype=float) for b in (self.support_box or box))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("invalid support box")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "support_box", (lo, hi))

    @property
    def dim(self):
        return self.support_box[0].size

    def is_zero(self):
        return self.kind == "zero" or (self.kind != "custom_analytic"
                                       and self.params["amplitude"] == 0)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError("point dimension mismatch")
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "custom_analytic":
            lo, hi = self.support_box
            inside = np.all((x >= lo) & (x <= hi), axis=1)
            out = np.zeros_like(x)
            if np.any(inside):
                out[inside] = np.asarray(p["func"](x[inside]), dtype=float)
            return out
        _, grad = _bump_potential(x, p["center"], p["radius"], p["amplitude"])
        if self.kind == "curl_bump_2d":
            return np.column_stack([-grad[:, 1], grad[:, 0]])
        return np.cross(grad, p["axis"])

    def potential(self, x):
        p = self.params
        phi, _ = _bump_potential(np.atleast_2d(x), p["center"], p["radius"], p["amplitude"])
        return phi


def curl_bump_2d(center=(0.5, 0.5), radius=0.5, amplitude=1.0):
    return FieldSpec("curl_bump_2d", dict(center=center, radius=radius, amplitude=amplitude))


def curl_bump_3d(center=(0.5, 0.5, 0.5), radius=0.5, amplitude=1.0, axis=(1.0, 2.0, 3.0)):
    return FieldSpec("curl_bump_3d", dict(center=center, radius=radius, amplitude=amplitude,
                                          axis=axis))


def constant_field(direction, box):
    """Constant field restricted to a box (not divergence-free across the box faces)."""
    direction = np.asarray(direction, dtype=float)
    return FieldSpec("custom_analytic",
                     dict(func=lambda x: np.broadcast_to(direction, x.shape).copy()),
                     support_box=box)


def box_quadrature(box, cells, order=6):
    """Tensor Gauss-Legendre nodes and weights on ``cells`` per axis of a box."""
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1), 0.5 * w
    axes, wts = [], []
    for a, b in zip(lo, hi):
        h = (b - a) / cells
        starts = a + h * np.arange(cells)
        axes.append((starts[:, None] + h * x[None, :]).ravel())
        wts.append(np.tile(h * w, cells))
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh]), np.prod([m.ravel() for m in wmesh], axis=0)


def default_cells(dim):
    # about 1e5 to 1e6 tensor nodes at order 6
    return 64 if dim == 2 else 12


def l1_norm(psi, cells=None, order=6):
    pts, w = box_quadrature(psi.support_box, cells or default_cells(psi.dim), order)
    return float(np.sum(w * np.linalg.norm(psi(pts), axis=1)))
