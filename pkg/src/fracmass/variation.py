"""First variation, s-fractional curvature and a demo descent flow."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi

from .geometry import PolyCurve, curve_to_current, self_intersections
from .riesz import FracParams, QuadConfig, fractional_mass, pair_integral_matrix, self_energy_segment


class FlowError(RuntimeError):
    """A flow step produced an invalid curve; ``flag`` names the failure."""

    def __init__(self, msg, flag="self_intersection"):
        super().__init__(msg)
        self.flag = flag


@dataclass(frozen=True)
class Perturbation:
    """Vertex values of a variation field h, interpolated linearly along edges."""

    curve: PolyCurve
    values: np.ndarray

    def __post_init__(self):
        h = np.array(self.values, dtype=float)
        if h.shape != self.curve.vertices.shape:
            raise ValueError("one perturbation vector per vertex is required")
        if not self.curve.closed:
            scale = max(1.0, float(np.abs(h).max()))
            if np.abs(h[0]).max() > 1e-14 * scale or np.abs(h[-1]).max() > 1e-14 * scale:
                raise ValueError("perturbation must vanish at both endpoints")
        h.setflags(write=False)
        object.__setattr__(self, "values", h)


def bump_perturbation(c, direction, amplitude=1.0):
    """h(u) = amplitude * sin(pi u / l)^2 * direction in arc length, zero at the ends."""
    a, b = c.edges()
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(b - a, axis=1))])[: len(c)]
    ell = c.length()
    prof = np.sin(np.pi * u / ell) ** 2
    if not c.closed:
        prof[0] = prof[-1] = 0.0
    return Perturbation(c, amplitude * prof[:, None] * np.asarray(direction, dtype=float)[None, :])


def _check_curve(c, min_vertices=8):
    if len(c) < min_vertices:
        raise ValueError(f"curve needs at least {min_vertices} vertices")
    hits = self_intersections(c, 1e-9)
    if hits:
        raise ValueError(f"curve self-intersects (edges {hits[0]})")


class _Spline:
    """C^2 cubic interpolant through the vertices, chord-length parametrized."""

    def __init__(self, c):
        v = c.vertices
        self.closed = c.closed
        pts = np.vstack([v, v[:1]]) if c.closed else v
        chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(chords == 0):
            raise ValueError("repeated vertex")
        self.knots = np.concatenate([[0.0], np.cumsum(chords)])
        self.sp = CubicSpline(self.knots, pts, bc_type="periodic" if c.closed else "not-a-knot")
        self.dsp = self.sp.derivative()
        self.n_pieces = chords.size


def _bracket(gu, T, g, dg, s):
    # ((d . T) g' - (T . g') d) / |d|^(2+s) with d = gamma(u) - gamma(v)
    d = gu - g
    r2 = np.einsum("...i,...i->...", d, d)
    num = np.einsum("...i,i->...", d, T)[..., None] * dg - np.einsum("...i,i->...", dg, T)[..., None] * d
    return num * (r2 ** (-(2.0 + s) / 2.0))[..., None]


def _curvature_at(spl, i, s, order, far_order, xg, wg):
    lam_u = spl.knots[i]
    gu = spl.sp(lam_u)
    T = spl.dsp(lam_u)
    T = T / np.linalg.norm(T)
    m = spl.n_pieces
    left = (i - 1) % m if spl.closed else i - 1
    right = i
    # pieces touching u: Gauss-Jacobi with weight t^-s in the distance t from u
    xj, wj = roots_jacobi(order, 0.0, -s)
    total = np.zeros_like(gu)
    D1 = spl.sp(lam_u, 1)
    D2 = spl.sp(lam_u, 2)
    for piece, sign in ((right, 1.0), (left, -1.0)):
        h = spl.knots[piece + 1] - spl.knots[piece]
        D3 = spl.sp(0.5 * (spl.knots[piece] + spl.knots[piece + 1]), 3)
        t = sign * 0.5 * h * (xj + 1.0)
        # on one cubic piece gamma(u) - gamma(u + t) = -t e(t), and the bracket
        # factors as t^2 [(T.p) e - (T.e) p], so |t|^-s splits off exactly
        e = D1[None, :] + t[:, None] * (D2 / 2.0)[None, :] + (t * t / 6.0)[:, None] * D3[None, :]
        pp = (D2 / 2.0)[None, :] + (t / 3.0)[:, None] * D3[None, :]
        g = (pp @ T)[:, None] * e - (e @ T)[:, None] * pp
        g *= (np.sum(e * e, axis=1) ** (-(2.0 + s) / 2.0))[:, None]
        total += (0.5 * h) ** (1.0 - s) * (g.T @ wj)
    # remaining pieces: plain Gauss-Legendre
    others = np.array([k for k in range(m) if k not in (left, right)], dtype=np.int64)
    if others.size:
        lo = spl.knots[others]
        h = spl.knots[others + 1] - lo
        lam = lo[:, None] + h[:, None] * xg[None, :]
        f = _bracket(gu, T, spl.sp(lam), spl.dsp(lam), s)
        total += np.einsum("kqi,q,k->i", f, wg, h)
    return s * total


def fractional_curvature(c, u_index, s, order=16, far_order=10, check=True):
    """s-fractional curvature vector at vertex ``u_index``.

    The polygon is replaced by its C^2 cubic spline interpolant before
    integrating: on straight edges incident to u the integrand vanishes
    identically, which would discard the part of the curvature that
    dominates as s -> 1.  The two spline pieces touching u use a
    Gauss-Jacobi rule absorbing |v - u|^-s; the rest use Gauss-Legendre.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    n = len(c)
    if not (0 <= u_index < n):
        raise IndexError("u_index out of range")
    if not c.closed and not (0 < u_index < n - 1):
        raise ValueError("u_index must be interior for open curves")
    if check:
        _check_curve(c)
    x, w = np.polynomial.legendre.leggauss(far_order)
    return _curvature_at(_Spline(c), u_index, s, order, far_order, 0.5 * (x + 1), 0.5 * w)


def curvature_field(c, s, order=16, far_order=10):
    """Curvature at every vertex (interior vertices for open curves; ends get 0)."""
    _check_curve(c)
    spl = _Spline(c)
    x, w = np.polynomial.legendre.leggauss(far_order)
    out = np.zeros_like(c.vertices)
    idx = range(len(c)) if c.closed else range(1, len(c) - 1)
    for i in idx:
        out[i] = _curvature_at(spl, i, s, order, far_order, 0.5 * (x + 1), 0.5 * w)
    return out


def _adjacent_J(P, alpha, La, ha, beta, Lb, hb, s, panels=4, order=16):
    """int int (a alpha - b beta).(a ha - b hb) / |a alpha - b beta|^(2+s) over
    [0, La] x [0, Lb] for two edges leaving the common vertex P.

    The integrand is homogeneous of degree -s; splitting the rectangle along
    its diagonal and scaling out the radial variable leaves two smooth 1-D
    integrals, each multiplied by La Lb / (2 - s).
    """
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1), 0.5 * w
    eta = ((np.arange(panels)[:, None] + x[None, :]) / panels).ravel()
    weta = np.tile(w / panels, panels)

    def F(a, b):
        d = a[:, None] * alpha - b[:, None] * beta
        dh = a[:, None] * ha - b[:, None] * hb
        r2 = np.sum(d * d, axis=1)
        return np.sum(d * dh, axis=1) * r2 ** (-(2.0 + s) / 2.0)

    one = np.ones_like(eta)
    total = weta @ F(La * one, Lb * eta) + weta @ F(La * eta, Lb * one)
    return La * Lb / (2.0 - s) * total


def first_variation(c, h, s, quad=None, order=16):
    """Derivative of M_s(c + t h) at t = 0 for the polygon c and piecewise-linear h.

    2 sum_ij (h'_i . tau_j) I_ij - s sum_ij (tau_i . tau_j) J_ij, where
    I_ij integrates |x - y|^-s over edges i, j and J_ij integrates
    (x - y).(h(x) - h(y)) |x - y|^-(2+s).
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if h.curve is not c and not np.array_equal(h.curve.vertices, c.vertices):
        raise ValueError("perturbation belongs to a different curve")
    H = h.values
    if not np.any(H):
        return 0.0
    a, b = c.edges()
    m = a.shape[0]
    L = np.linalg.norm(b - a, axis=1)
    tau = (b - a) / L[:, None]
    Hs = H if c.closed else H[:-1]
    He = np.roll(H, -1, axis=0) if c.closed else H[1:]
    dh = (He - Hs) / L[:, None]
    mu = curve_to_current(c)
    I = pair_integral_matrix(mu, s, quad or QuadConfig())
    termA = 2.0 * float(np.sum((dh @ tau.T) * I))

    TT = tau @ tau.T
    J = np.zeros((m, m))
    for i in range(m):
        J[i, i] = float(tau[i] @ dh[i]) * self_energy_segment(L[i], s)
    # edge i ends where edge i+1 starts
    pairs = [(i, i + 1) for i in range(m - 1)] + ([(m - 1, 0)] if c.closed and m > 2 else [])
    adjacent = np.zeros((m, m), dtype=bool)
    for i, j in pairs:
        v = _adjacent_J(b[i], -tau[i], L[i], -dh[i], tau[j], L[j], dh[j], s)
        J[i, j] = J[j, i] = v
        adjacent[i, j] = adjacent[j, i] = True
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1), 0.5 * w
    rest = ~adjacent & ~np.eye(m, dtype=bool) & (np.abs(TT) > 0)
    ii, jj = np.nonzero(np.triu(rest, 1))
    for k0 in range(0, ii.size, 256):
        I0, J0 = ii[k0:k0 + 256], jj[k0:k0 + 256]
        X = a[I0, None, :] + (L[I0, None] * x[None, :])[..., None] * tau[I0, None, :]
        Y = a[J0, None, :] + (L[J0, None] * x[None, :])[..., None] * tau[J0, None, :]
        hX = Hs[I0, None, :] + x[None, :, None] * (He[I0] - Hs[I0])[:, None, :]
        hY = Hs[J0, None, :] + x[None, :, None] * (He[J0] - Hs[J0])[:, None, :]
        d = X[:, :, None, :] - Y[:, None, :, :]
        dhh = hX[:, :, None, :] - hY[:, None, :, :]
        r2 = np.sum(d * d, axis=-1)
        f = np.sum(d * dhh, axis=-1) * r2 ** (-(2.0 + s) / 2.0)
        vals = np.einsum("kpq,p,q->k", f, w, w) * L[I0] * L[J0]
        J[I0, J0] = vals
        J[J0, I0] = vals
    termB = -s * float(np.sum(TT * J))
    return termA + termB


def perturb(c, h, t):
    return PolyCurve(c.vertices + t * h.values, c.closed, c.weight)


def fd_first_variation(c, h, s, t=None, quad=None):
    """Central difference of M_s along h; step from the cube-root rule when ``t`` is None."""
    if t is None:
        scale = max(1.0, float(np.abs(c.vertices).max()))
        t = np.finfo(float).eps ** (1.0 / 3.0) * scale / max(float(np.abs(h.values).max()), 1e-300)
    p = FracParams(s, quad=quad or QuadConfig())
    plus = fractional_mass(curve_to_current(perturb(c, h, t)), p)
    minus = fractional_mass(curve_to_current(perturb(c, h, -t)), p)
    return float((plus - minus) / (2.0 * t))


def curvature_pairing(c, h, s, order=16):
    """2 int h . k_s du with h and k_s sampled at vertices (trapezoid in arc length)."""
    k = curvature_field(c, s, order)
    a, b = c.edges()
    L = np.linalg.norm(b - a, axis=1)
    f = np.einsum("ij,ij->i", h.values, k)
    fe = np.roll(f, -1) if c.closed else f[1:]
    fs = f if c.closed else f[:-1]
    return 2.0 * float(np.sum(0.5 * L * (fs + fe)))


def resample(c, n=None):
    """Resample to ``n`` vertices equally spaced in arc length (keeps the first vertex)."""
    n = n or len(c)
    v = c.vertices
    pts = np.vstack([v, v[:1]]) if c.closed else v
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    targets = np.linspace(0.0, u[-1], n + 1 if c.closed else n)
    if c.closed:
        targets = targets[:-1]
    out = np.column_stack([np.interp(targets, u, pts[:, k]) for k in range(c.dim)])
    return PolyCurve(out, c.closed, c.weight)


def gradient_flow_step(c, s, dt):
    """One explicit Euler step v <- v - dt k_s(v), then uniform arc-length resampling.

    Demo plumbing only; there is no topological surgery, so a step that
    self-intersects raises FlowError.
    """
    if dt < 0 or not math.isfinite(dt):
        raise ValueError("dt must be >= 0")
    if not c.closed:
        raise ValueError("flow is defined for closed curves")
    if dt == 0:
        return c
    k = curvature_field(c, s)
    moved = PolyCurve(c.vertices - dt * k, True, c.weight)
    if self_intersections(moved, 1e-9):
        raise FlowError("flow step produced a self-intersection")
    out = resample(moved, len(c))
    if self_intersections(out, 1e-9):
        raise FlowError("flow step produced a self-intersection")
    return out


def richardson(s_values, values):
    """Limit s -> 1 of samples of (1 - s) * quantity, linear in (1 - s).

    Uses the two s closest to 1.
    """
    order = np.argsort(s_values)[::-1]
    s1, s2 = s_values[order[0]], s_values[order[1]]
    v1, v2 = values[order[0]], values[order[1]]
    e1, e2 = 1.0 - s1, 1.0 - s2
    return (e2 * v1 - e1 * v2) / (e2 - e1)
