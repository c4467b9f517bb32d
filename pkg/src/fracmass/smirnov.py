"""Approximation of divergence-free fields by weighted closed polygons.

Pipeline: cover the support with cubes of side eps, measure the flux of
psi through every face (shared faces once), put one lattice point per
delta units of flux on each face, match inflow and outflow points inside
thin cylinders parallel to the mean field of each cube, pair what is
left inside each cube, close the remaining atoms globally, and finally
split the resulting boundary-free current into closed loops of weight
delta.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .fields import box_quadrature, default_cells, l1_norm
from .geometry import SegmentCurrent, boundary, loop_decompose
from .riesz import FracParams, QuadConfig, field_riesz_energy, fractional_mass


@dataclass(frozen=True)
class ApproxParams:
    eps: float
    delta: float
    rho: float = 0.0
    dim: int = 2
    seed: int = 0
    flux_order: int = 8
    rounding: str = "half"

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0 and self.rho >= 0):
            raise ValueError("need eps > 0, delta > 0, rho >= 0")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.rounding not in ("half", "floor"):
            raise ValueError("rounding must be 'half' or 'floor'")


@dataclass(frozen=True)
class Cube:
    index: tuple
    lo: np.ndarray
    side: float

    @property
    def hi(self):
        return self.lo + self.side


@dataclass(frozen=True)
class CubeCover:
    origin: np.ndarray
    side: float
    shape: tuple
    cubes: list

    @property
    def dim(self):
        return len(self.shape)


@dataclass(frozen=True)
class FaceLattice:
    """Lattice on the face with normal axis ``axis`` at grid position ``index``.

    ``flux`` is measured along +e_axis; ``sign`` is its sign (0 if empty).
    Seen from the cube on the low side the outward flux is ``flux``, from
    the cube on the high side it is ``-flux``.
    """

    axis: int
    index: tuple
    normal: np.ndarray
    spacing: float
    points: np.ndarray
    sign: int
    flux: float


def cube_cover(psi, eps):
    """Axis-aligned cubes of side ``eps`` covering the support box, in index order."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, hi = psi.support_box
    shape = tuple(max(1, int(math.ceil((h - l) / eps - 1e-12))) for l, h in zip(lo, hi))
    cubes = [Cube(idx, lo + eps * np.asarray(idx, dtype=float), eps)
             for idx in np.ndindex(*shape)]
    return CubeCover(np.array(lo, dtype=float), float(eps), shape, cubes)


def _gauss01(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1), 0.5 * w


def _face_nodes(cover, axis, order):
    """Quadrature nodes for all faces normal to ``axis``.

    Returns face indices (nf, d), nodes (nf, m, d) and weights (m,).
    """
    d = cover.dim
    shape = list(cover.shape)
    shape[axis] += 1
    idx = np.array(list(np.ndindex(*shape)), dtype=np.int64).reshape(-1, d)
    x, w = _gauss01(order)
    others = [k for k in range(d) if k != axis]
    grids = np.meshgrid(*([x] * (d - 1)), indexing="ij")
    wgrid = np.meshgrid(*([w] * (d - 1)), indexing="ij")
    local = np.zeros((grids[0].size, d))
    for j, k in enumerate(others):
        local[:, k] = grids[j].ravel()
    wts = np.prod([g.ravel() for g in wgrid], axis=0) * cover.side ** (d - 1)
    base = cover.origin + cover.side * idx
    nodes = base[:, None, :] + cover.side * local[None, :, :]
    return idx, nodes, wts


def _edge_potential_integrals(psi, cover, axis, order=8):
    """int phi dt along every grid edge parallel to ``axis`` (3-D bump presets).

    Inside the support ball phi is a polynomial of degree 6 along a line, and
    the ball meets each line in one interval, so Gauss on that interval is exact.
    """
    d = cover.dim
    shape = [n + 1 for n in cover.shape]
    shape[axis] -= 1
    idx = np.array(list(np.ndindex(*shape)), dtype=np.int64).reshape(-1, d)
    p0 = cover.origin + cover.side * idx
    c = psi.params["center"]
    R = psi.params["radius"]
    rel = p0 - c
    # |rel + t e_axis|^2 = R^2
    b = rel[:, axis]
    disc = R * R - (np.sum(rel * rel, axis=1) - b * b)
    out = np.zeros(idx.shape[0])
    hit = disc > 0
    root = np.sqrt(np.where(hit, disc, 0.0))
    lo = np.clip(-b - root, 0.0, cover.side)
    hi = np.clip(-b + root, 0.0, cover.side)
    hit &= hi > lo
    x, w = _gauss01(order)
    if np.any(hit):
        ts = lo[hit, None] + (hi - lo)[hit, None] * x[None, :]
        pts = p0[hit, None, :] + ts[..., None] * np.eye(d)[axis][None, None, :]
        vals = psi.potential(pts.reshape(-1, d)).reshape(ts.shape)
        out[hit] = (vals @ w) * (hi - lo)[hit]
    return {tuple(r): v for r, v in zip(idx.tolist(), out)}


def _exact_fluxes(psi, cover, axis, idx):
    """Face fluxes from the stream function, so every cube's outward fluxes telescope to zero."""
    d = cover.dim
    if d == 2:
        # psi = (-d2 phi, d1 phi): flux through a face is a difference of phi at its ends
        other = 1 - axis
        p0 = cover.origin + cover.side * idx
        p1 = p0.copy()
        p1[:, other] += cover.side
        phi0, phi1 = psi.potential(p0), psi.potential(p1)
        return phi0 - phi1 if axis == 0 else phi1 - phi0
    # psi = curl(phi a): flux is the circulation of phi a around the face
    i, j = (axis + 1) % 3, (axis + 2) % 3
    a = psi.params["axis"]
    Ei = _edge_potential_integrals(psi, cover, i)
    Ej = _edge_potential_integrals(psi, cover, j)
    out = np.empty(idx.shape[0])
    for n, ix in enumerate(idx.tolist()):
        up_j = list(ix)
        up_j[j] += 1
        up_i = list(ix)
        up_i[i] += 1
        out[n] = (a[i] * (Ei[tuple(ix)] - Ei[tuple(up_j)])
                  + a[j] * (Ej[tuple(up_i)] - Ej[tuple(ix)]))
    return out


def face_flux(psi, cover, order=8):
    """Fluxes along +e_k through every grid face, as a dict axis -> (index array, flux, sup).

    Each face is evaluated once and both adjacent cubes read the same
    number.  Curl-bump presets use their stream function, which makes the
    outward fluxes of every cube cancel to rounding; other fields use a
    tensor Gauss-Legendre rule of the given order.  ``sup`` is the largest
    |psi . e_k| seen at the face's quadrature nodes.
    """
    out = {}
    exact = psi.kind in ("curl_bump_2d", "curl_bump_3d")
    for axis in range(cover.dim):
        idx, nodes, wts = _face_nodes(cover, axis, order)
        vals = psi(nodes.reshape(-1, cover.dim))[:, axis].reshape(nodes.shape[:2])
        flux = _exact_fluxes(psi, cover, axis, idx) if exact else vals @ wts
        out[axis] = (idx, flux, np.abs(vals).max(axis=1))
    return out


def lattice_points(face_lo, axis, side, spacing, dim, rounding="half"):
    """Centers of a (d-1)-grid of given spacing on the face, anchored at its min corner.

    With ``rounding="half"`` every center inside the face is kept, so the
    count per axis is side/spacing rounded to nearest, ties down; ``"floor"`` keeps only
    whole grid cells.
    """
    ratio = side / spacing
    m = int(math.floor(ratio)) if rounding == "floor" else int(math.ceil(ratio - 0.5))
    if m <= 0:
        return np.zeros((0, dim))
    if m ** (dim - 1) > 5 * 10**7:
        raise ValueError("lattice too fine; increase delta")
    t = (np.arange(m) + 0.5) * spacing
    others = [k for k in range(dim) if k != axis]
    grids = np.meshgrid(*([t] * (dim - 1)), indexing="ij")
    pts = np.repeat(face_lo[None, :], grids[0].size, axis=0)
    for j, k in enumerate(others):
        pts[:, k] = face_lo[k] + grids[j].ravel()
    return pts


def build_lattices(cover, fluxes, delta, rounding="half"):
    """One FaceLattice per grid face with nonzero flux, keyed by (axis, index)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    d = cover.dim
    area = cover.side ** (d - 1)
    lattices = {}
    for axis, (idx, flux, _) in fluxes.items():
        normal = np.zeros(d)
        normal[axis] = 1.0
        for ix, f in zip(idx, flux):
            if f == 0.0:
                continue
            spacing = (delta * area / abs(f)) ** (1.0 / (d - 1))
            face_lo = cover.origin + cover.side * ix
            pts = lattice_points(face_lo, axis, cover.side, spacing, d, rounding)
            if pts.shape[0] == 0:
                continue
            pts.setflags(write=False)
            lattices[(axis, tuple(int(v) for v in ix))] = FaceLattice(
                axis, tuple(int(v) for v in ix), normal, spacing, pts, int(np.sign(f)), float(f))
    return lattices


def cylinder_frame(eta):
    """Orthonormal frame (eta, e_2, ...) by Gram-Schmidt against the standard
    basis, dropping the axis most parallel to eta."""
    eta = np.asarray(eta, dtype=float)
    eta = eta / np.linalg.norm(eta)
    d = eta.size
    drop = int(np.argmax(np.abs(eta)))
    frame = [eta]
    for k in range(d):
        if k == drop:
            continue
        v = np.zeros(d)
        v[k] = 1.0
        for f in frame:
            v = v - (v @ f) * f
        frame.append(v / np.linalg.norm(v))
    return np.array(frame)


@dataclass
class _Atoms:
    """Signed lattice points seen from one cube (+1 outflow, -1 inflow)."""

    ids: np.ndarray
    points: np.ndarray
    signs: np.ndarray


def _lex_order(points, *keys):
    # lexsort with coordinates as final tie-breakers
    return np.lexsort(tuple(points.T[::-1]) + keys[::-1]) if keys else np.lexsort(points.T[::-1])


def cylinder_match(cube, atoms, eta):
    """Pair opposite-sign atoms inside eps^2-wide cylinders parallel to ``eta``.

    Within each cylinder the inflow atoms and the outflow atoms are each
    sorted by their coordinate along eta and paired in that order.
    Returns (starts, ends, leftover mask).
    """
    n = atoms.points.shape[0]
    d = atoms.points.shape[1] if n else len(cube.lo)
    if n == 0:
        return np.zeros((0, d)), np.zeros((0, d)), np.zeros(0, dtype=bool)
    frame = cylinder_frame(eta)
    rel = atoms.points - cube.lo
    along = rel @ frame[0]
    cells = np.floor(rel @ frame[1:].T / cube.side ** 2).astype(np.int64)
    keys = [cells[:, j] for j in range(cells.shape[1])]
    order = np.lexsort((np.arange(n), along, atoms.signs) + tuple(keys[::-1]))
    cells_o = cells[order]
    change = np.ones(n, dtype=bool)
    change[1:] = np.any(cells_o[1:] != cells_o[:-1], axis=1)
    bounds = np.append(np.flatnonzero(change), n)
    left = np.ones(n, dtype=bool)
    starts, ends = [], []
    for g0, g1 in zip(bounds[:-1], bounds[1:]):
        grp = order[g0:g1]
        neg = grp[atoms.signs[grp] < 0]
        pos = grp[atoms.signs[grp] > 0]
        k = min(neg.size, pos.size)
        if k == 0:
            continue
        starts.append(atoms.points[neg[:k]])
        ends.append(atoms.points[pos[:k]])
        left[neg[:k]] = False
        left[pos[:k]] = False
    if starts:
        return np.vstack(starts), np.vstack(ends), left
    return np.zeros((0, d)), np.zeros((0, d)), left


def greedy_pairs(plus, minus):
    """Greedy closest-pair matching between two point sets.

    Pairs are taken in order of increasing distance with lexicographic
    coordinate tie-breaks.  Returns index arrays (i_plus, i_minus).
    """
    np_, nm = plus.shape[0], minus.shape[0]
    if np_ == 0 or nm == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if np_ * nm > 4 * 10**6:
        return _mutual_nn_pairs(plus, minus)
    dist = np.linalg.norm(plus[:, None, :] - minus[None, :, :], axis=2).ravel()
    ip = np.repeat(np.arange(np_), nm)
    im = np.tile(np.arange(nm), np_)
    rp = np.argsort(_lex_order(plus)).astype(np.int64)
    rm = np.argsort(_lex_order(minus)).astype(np.int64)
    order = np.lexsort((rm[im], rp[ip], dist))
    used_p = np.zeros(np_, dtype=bool)
    used_m = np.zeros(nm, dtype=bool)
    out_p, out_m = [], []
    k = min(np_, nm)
    for o in order:
        a, b = ip[o], im[o]
        if used_p[a] or used_m[b]:
            continue
        used_p[a] = used_m[b] = True
        out_p.append(a)
        out_m.append(b)
        if len(out_p) == k:
            break
    return np.array(out_p, dtype=np.int64), np.array(out_m, dtype=np.int64)


def _mutual_nn_pairs(plus, minus):
    # repeated mutual-nearest-neighbour rounds give the greedy matching
    ip_all = np.arange(plus.shape[0])
    im_all = np.arange(minus.shape[0])
    out_p, out_m = [], []
    while ip_all.size and im_all.size:
        P, M = plus[ip_all], minus[im_all]
        _, nn_pm = cKDTree(M).query(P)
        _, nn_mp = cKDTree(P).query(M)
        mutual = np.flatnonzero(nn_mp[nn_pm] == np.arange(P.shape[0]))
        out_p.append(ip_all[mutual])
        out_m.append(im_all[nn_pm[mutual]])
        keep_p = np.ones(ip_all.size, dtype=bool)
        keep_p[mutual] = False
        keep_m = np.ones(im_all.size, dtype=bool)
        keep_m[nn_pm[mutual]] = False
        ip_all, im_all = ip_all[keep_p], im_all[keep_m]
    return np.concatenate(out_p), np.concatenate(out_m)


def boundary_match(atoms):
    """Pair leftover atoms of one cube greedily; returns (starts, ends, residual mask)."""
    plus = np.flatnonzero(atoms.signs > 0)
    minus = np.flatnonzero(atoms.signs < 0)
    ip, im = greedy_pairs(atoms.points[plus], atoms.points[minus])
    left = np.ones(atoms.signs.size, dtype=bool)
    left[plus[ip]] = False
    left[minus[im]] = False
    return atoms.points[minus[im]], atoms.points[plus[ip]], left


def close_current(points, signs, ids=None):
    """Close residual atoms: cancel coincident opposite atoms, then join each
    remaining (-) atom to a (+) atom by greedy nearest neighbour.

    Returns (starts, ends).  Raises if the charges do not balance.
    """
    points = np.asarray(points, dtype=float)
    signs = np.asarray(signs, dtype=np.int64)
    d = points.shape[1] if points.ndim == 2 else 2
    if signs.size == 0:
        return np.zeros((0, d)), np.zeros((0, d))
    if signs.sum() != 0:
        raise RuntimeError(f"global charge imbalance {int(signs.sum())}: face sharing is broken")
    if ids is None:
        _, ids = np.unique(points, axis=0, return_inverse=True)
        ids = ids.reshape(-1)
    # net charge per lattice point
    uid, inv = np.unique(ids, return_inverse=True)
    net = np.zeros(uid.size, dtype=np.int64)
    np.add.at(net, inv, signs)
    first = np.zeros(uid.size, dtype=np.int64)
    first[inv[::-1]] = np.arange(inv.size)[::-1]
    rep = points[first]
    plus = np.repeat(np.arange(uid.size), np.maximum(net, 0))
    minus = np.repeat(np.arange(uid.size), np.maximum(-net, 0))
    ip, im = greedy_pairs(rep[plus], rep[minus])
    if ip.size != plus.size or im.size != minus.size:
        raise RuntimeError("closing failed to consume every atom")
    return rep[minus[im]], rep[plus[ip]]


@dataclass
class Diagnostics:
    eps: float
    delta: float
    rho: float
    n_cubes: int
    n_active: int
    n_good: int
    n_bad: int
    n_close: int
    mass_mu: float
    mass_good: float
    mass_bad: float
    mass_close: float
    mass_psi: float
    pairing_errors: list = field(default_factory=list)
    Ms_mu: float = float("nan")
    Ms_psi: float = float("nan")
    Ms_psi_sigma: float = float("nan")
    n_loops: int = 0
    runtime_s: float = 0.0

    @property
    def mass_error(self):
        return abs(self.mass_mu - self.mass_psi) / self.mass_psi if self.mass_psi else 0.0

    @property
    def pairing_err_max(self):
        return max(self.pairing_errors) if self.pairing_errors else 0.0

    @property
    def Ms_error(self):
        return abs(self.Ms_mu - self.Ms_psi) / abs(self.Ms_psi) if self.Ms_psi else 0.0

    def row(self):
        return dict(eps=self.eps, delta=self.delta, rho=self.rho, mass_mu=self.mass_mu,
                    mass_psi=self.mass_psi, pairing_err_max=self.pairing_err_max,
                    Ms_mu=self.Ms_mu, Ms_psi=self.Ms_psi, runtime_s=self.runtime_s)


def _bump(t):
    out = np.zeros_like(t)
    m = t < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


def form_panel(psi):
    """Coordinate bump 1-forms at three scales, centres off the field's centre.

    Each entry is (center, radius, axis); the form is bump(|x-c|/r) dx_axis
    with sup norm 1.
    """
    lo, hi = psi.support_box
    mid = 0.5 * (lo + hi)
    R = 0.5 * float(np.min(hi - lo))
    shifts = np.array([0.13, -0.07, 0.05])[: psi.dim]
    panel = []
    for j, scale in enumerate((1.0, 0.5, 0.25)):
        c = mid + R * shifts * (j + 1)
        for axis in range(psi.dim):
            panel.append((c, scale * R, axis))
    return panel


def pair_current_form(mu, form, order=16):
    c, r, axis = form
    x, w = _gauss01(order)
    seg = mu.ends - mu.starts
    pts = mu.starts[:, None, :] + x[None, :, None] * seg[:, None, :]
    vals = _bump(np.linalg.norm(pts - c, axis=2) / r)
    return float(np.sum(mu.weights * seg[:, axis] * (vals @ w)))


def pair_field_form(psi, form, cells=None, order=6):
    c, r, axis = form
    lo = np.maximum(psi.support_box[0], c - r)
    hi = np.minimum(psi.support_box[1], c + r)
    if np.any(hi <= lo):
        return 0.0
    pts, w = box_quadrature((lo, hi), cells or default_cells(psi.dim), order)
    return float(np.sum(w * psi(pts)[:, axis] * _bump(np.linalg.norm(pts - c, axis=1) / r)))


def approximate(psi, p, s=0.5, compute_ms=True, ms_samples=2 * 10**6, quad=None,
                decompose=True):
    """Run the construction; returns (current, loops, Diagnostics)."""
    t0 = time.perf_counter()
    if psi.dim != p.dim:
        raise ValueError("field and parameters disagree on dimension")
    d = p.dim
    cover = cube_cover(psi, p.eps)
    empty = SegmentCurrent.empty(d)
    fluxes = face_flux(psi, cover, p.flux_order)
    lattices = build_lattices(cover, fluxes, p.delta, p.rounding)

    # global atom ids for every lattice point
    offsets = {}
    total = 0
    for key in sorted(lattices):
        offsets[key] = total
        total += lattices[key].points.shape[0]

    # per-cube sup estimate: face nodes plus interior samples
    face_sup = {axis: dict(zip(map(tuple, idx.tolist()), sup))
                for axis, (idx, _, sup) in fluxes.items()}
    xg, wg = _gauss01(4)
    interior = np.array(np.meshgrid(*([xg] * d), indexing="ij")).reshape(d, -1).T
    iw = np.prod(np.array(np.meshgrid(*([wg] * d), indexing="ij")).reshape(d, -1), axis=0)
    los = np.array([c.lo for c in cover.cubes])
    samples = psi((los[:, None, :] + p.eps * interior[None]).reshape(-1, d))
    samples = samples.reshape(len(cover.cubes), -1, d)
    means = np.einsum("k,ckd->cd", iw, samples)
    sup_in = np.linalg.norm(samples, axis=2).max(axis=1)

    good_s, good_e, bad_s, bad_e = [], [], [], []
    res_pts, res_sign, res_ids = [], [], []
    n_active = 0
    for ci, cube in enumerate(cover.cubes):
        ids, pts, sg = [], [], []
        sup = sup_in[ci]
        for axis in range(d):
            for side in (0, 1):
                fidx = list(cube.index)
                fidx[axis] += side
                fidx = tuple(fidx)
                sup = max(sup, face_sup[axis].get(fidx, 0.0))
                lat = lattices.get((axis, fidx))
                if lat is None:
                    continue
                outward = lat.sign if side == 1 else -lat.sign
                m = lat.points.shape[0]
                ids.append(offsets[(axis, fidx)] + np.arange(m))
                pts.append(lat.points)
                sg.append(np.full(m, outward, dtype=np.int64))
        if not ids:
            continue
        atoms = _Atoms(np.concatenate(ids), np.vstack(pts), np.concatenate(sg))
        left = np.ones(atoms.ids.size, dtype=bool)
        mean = means[ci]
        if sup >= p.rho and np.linalg.norm(mean) > 0:
            n_active += 1
            a, b, left = cylinder_match(cube, atoms, mean / np.linalg.norm(mean))
            good_s.append(a)
            good_e.append(b)
        rest = _Atoms(atoms.ids[left], atoms.points[left], atoms.signs[left])
        a, b, left2 = boundary_match(rest)
        bad_s.append(a)
        bad_e.append(b)
        res_pts.append(rest.points[left2])
        res_sign.append(rest.signs[left2])
        res_ids.append(rest.ids[left2])

    def cat(parts):
        return np.vstack(parts) if parts else np.zeros((0, d))

    if res_pts:
        cs, ce = close_current(np.vstack(res_pts), np.concatenate(res_sign),
                               np.concatenate(res_ids))
    else:
        cs, ce = np.zeros((0, d)), np.zeros((0, d))
    parts = [(cat(good_s), cat(good_e)), (cat(bad_s), cat(bad_e)), (cs, ce)]
    currents = [SegmentCurrent(a, b, np.full(a.shape[0], p.delta)) for a, b in parts]
    mu = currents[0] + currents[1] + currents[2]

    loops = []
    if len(mu):
        if not boundary(mu, 0.0).is_empty():
            raise RuntimeError("approximating current is not closed")
        if decompose:
            loops = loop_decompose(mu, 0.0, p.delta)

    mass_psi = l1_norm(psi) if not psi.is_zero() else 0.0
    panel = form_panel(psi)
    errs = []
    for form in panel:
        pm = pair_current_form(mu, form) if len(mu) else 0.0
        pf = pair_field_form(psi, form)
        errs.append(abs(pm - pf) / mass_psi if mass_psi else 0.0)
    diag = Diagnostics(p.eps, p.delta, p.rho, len(cover.cubes), n_active,
                       len(currents[0]), len(currents[1]), len(currents[2]), mu.mass(),
                       currents[0].mass(), currents[1].mass(), currents[2].mass(), mass_psi,
                       errs, n_loops=len(loops))
    if compute_ms and len(mu):
        diag.Ms_mu = fractional_mass(mu, FracParams(s, quad=quad or QuadConfig()))
        diag.Ms_psi, diag.Ms_psi_sigma = field_riesz_energy(psi, s, ms_samples, p.seed)
    elif compute_ms:
        diag.Ms_mu = diag.Ms_psi = diag.Ms_psi_sigma = 0.0
    diag.runtime_s = time.perf_counter() - t0
    return mu, loops, diag
