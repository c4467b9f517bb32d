"""Compiled pair-integral kernels.

All routines integrate k(|x - y|) over pairs of straight segments
parametrized by arc length.  Three kernels are supported:

    0  r**(-s)                    (Riesz)
    1  1 / max(r, eps)            (regularized, exponent one)
    2  1 / sqrt(r**2 + eps**2)    (smooth regularization)

Close pairs integrate the inner variable exactly through the
antiderivative G(x, h) = int_0^x k(sqrt(t^2 + h^2)) dt and the outer
variable with composite Gauss rules graded dyadically toward the points
where the integrand loses smoothness.
"""

import math

import numba as nb

nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
import numpy as np
from scipy.special import gamma

MAX_ORDER = 64
N_ASYM = 24


def _gauss_table():
    xs = np.zeros((MAX_ORDER + 1, MAX_ORDER))
    ws = np.zeros((MAX_ORDER + 1, MAX_ORDER))
    for q in range(1, MAX_ORDER + 1):
        x, w = np.polynomial.legendre.leggauss(q)
        xs[q, :q] = 0.5 * (x + 1.0)
        ws[q, :q] = 0.5 * w
    return xs, ws


GX, GW = _gauss_table()


N_CHEB = 16
CHEB_PIECES = 4
CHEB_WIDTH = 2.0 / CHEB_PIECES


def _phi_reference(X, s):
    # 64-point Gauss on [0, X]; the integrand is analytic within distance 1 of the axis
    x, w = GX[MAX_ORDER], GW[MAX_ORDER]
    t = X[:, None] * x[None, :]
    return X * ((1.0 + t * t) ** (-0.5 * s) @ w)


def riesz_aux(s):
    """Constants for the Riesz antiderivative at exponent ``s``.

    Phi(X) = int_0^X (1+t^2)^(-s/2) dt.  Returns the finite-part constant
    C_s = lim (Phi(X) - X^(1-s)/(1-s)) and one coefficient array holding
    the asymptotic expansion in powers X^(1-s-2k) (first N_ASYM entries)
    followed by Chebyshev coefficients of Phi on equal pieces of [0, 2].
    """
    cs = math.sqrt(math.pi) * gamma((s - 1.0) / 2.0) / (2.0 * gamma(s / 2.0))
    coef = np.zeros(N_ASYM + CHEB_PIECES * N_CHEB)
    b = 1.0
    for k in range(1, N_ASYM + 1):
        b *= (-s / 2.0 - (k - 1)) / k
        coef[k - 1] = b / (1.0 - s - 2.0 * k)
    nodes = np.cos(np.pi * (np.arange(N_CHEB) + 0.5) / N_CHEB)
    for piece in range(CHEB_PIECES):
        lo = piece * CHEB_WIDTH
        vals = _phi_reference(lo + 0.5 * CHEB_WIDTH * (nodes + 1.0), s)
        c = np.polynomial.chebyshev.chebfit(nodes, vals, N_CHEB - 1)
        coef[N_ASYM + piece * N_CHEB:N_ASYM + (piece + 1) * N_CHEB] = c
    return float(cs), coef


@nb.njit(cache=True)
def kernel_value(r, s, ktype, eps):
    if ktype == 0:
        return r ** (-s)
    if ktype == 1:
        return 1.0 / max(r, eps)
    return 1.0 / math.sqrt(r * r + eps * eps)


@nb.njit(cache=True)
def _phi(X, s, cs, coef):
    # int_0^X (1 + t^2)^(-s/2) dt for X >= 0
    if X < 0.05:
        x2 = X * X
        term = X
        val = X
        b = 1.0
        for k in range(1, 8):
            b *= (-0.5 * s - (k - 1)) / k
            term *= x2
            val += b * term / (2 * k + 1)
        return val
    if X <= 2.0:
        piece = min(int(X / CHEB_WIDTH), CHEB_PIECES - 1)
        z = 2.0 * (X - piece * CHEB_WIDTH) / CHEB_WIDTH - 1.0
        base = N_ASYM + piece * N_CHEB
        b1 = 0.0
        b2 = 0.0
        for k in range(N_CHEB - 1, 0, -1):
            b1, b2 = 2.0 * z * b1 - b2 + coef[base + k], b1
        return z * b1 - b2 + coef[base]
    p = X ** (1.0 - s)
    val = cs + p / (1.0 - s)
    inv2 = 1.0 / (X * X)
    term = p
    for k in range(N_ASYM):
        term *= inv2
        c = coef[k] * term
        val += c
        if abs(c) < 1e-17 * abs(val):
            break
    return val


@nb.njit(cache=True)
def inner_antiderivative(x, h, s, ktype, eps, cs, coef):
    """G(x, h) = int_0^x k(sqrt(t^2 + h^2)) dt, odd in x."""
    sg = 1.0 if x >= 0.0 else -1.0
    ax = abs(x)
    if ax == 0.0:
        return 0.0
    if ktype == 0:
        if h == 0.0:
            return sg * ax ** (1.0 - s) / (1.0 - s)
        return sg * h ** (1.0 - s) * _phi(ax / h, s, cs, coef)
    if ktype == 2:
        return sg * math.asinh(ax / math.sqrt(h * h + eps * eps))
    if h >= eps:
        return sg * math.asinh(ax / h)
    a = math.sqrt(eps * eps - h * h)
    if ax <= a:
        return sg * ax / eps
    return sg * (a / eps + math.log((ax + math.sqrt(ax * ax + h * h)) / (a + eps)))


@nb.njit(cache=True)
def _line_point_dist(a0, ta, La, p):
    # closest parameter on segment a0 + u ta (u in [0, La]) to point p
    d = a0.shape[0]
    u = 0.0
    for k in range(d):
        u += (p[k] - a0[k]) * ta[k]
    u = min(max(u, 0.0), La)
    r2 = 0.0
    for k in range(d):
        z = a0[k] + u * ta[k] - p[k]
        r2 += z * z
    return u, math.sqrt(r2)


@nb.njit(cache=True)
def _closest_params(a0, ta, La, b0, tb, Lb):
    # parameters (u, v) of the closest points of two segments, and distance
    d = a0.shape[0]
    r = np.empty(d)
    for k in range(d):
        r[k] = a0[k] - b0[k]
    bb = 0.0
    cc = 0.0
    ff = 0.0
    for k in range(d):
        bb += ta[k] * tb[k]
        cc += ta[k] * r[k]
        ff += tb[k] * r[k]
    den = 1.0 - bb * bb
    if den > 1e-14:
        u = min(max((bb * ff - cc) / den, 0.0), La)
    else:
        u = 0.0
    v = bb * u + ff
    if v < 0.0:
        v = 0.0
        u = min(max(-cc, 0.0), La)
    elif v > Lb:
        v = Lb
        u = min(max(bb * Lb - cc, 0.0), La)
    r2 = 0.0
    for k in range(d):
        z = r[k] + u * ta[k] - v * tb[k]
        r2 += z * z
    return u, v, math.sqrt(r2)


@nb.njit(cache=True)
def _outer_value(u, a0, ta, b0, tb, Lb, s, ktype, eps, cs, coef):
    d = a0.shape[0]
    v0 = 0.0
    for k in range(d):
        v0 += (a0[k] + u * ta[k] - b0[k]) * tb[k]
    h2 = 0.0
    for k in range(d):
        z = a0[k] + u * ta[k] - b0[k] - v0 * tb[k]
        h2 += z * z
    h = math.sqrt(h2)
    return (inner_antiderivative(Lb - v0, h, s, ktype, eps, cs, coef)
            + inner_antiderivative(v0, h, s, ktype, eps, cs, coef))


@nb.njit(cache=True)
def _graded_half(l, r, toward_left, levels, a0, ta, b0, tb, Lb, s, ktype, eps, cs, coef, q):
    # composite Gauss on [l, r] with dyadic panels refined toward one end
    acc = 0.0
    width = r - l
    lo = 0.0
    for lev in range(levels, -1, -1):
        hi = 1.0 if lev == 0 else 0.5 ** lev
        if lev == levels:
            lo = 0.0
        # panel [lo, hi] in relative coordinates measured from the graded end
        pl = lo * width
        ph = hi * width
        pw = ph - pl
        part = 0.0
        for k in range(q):
            t = pl + pw * GX[q, k]
            u = l + t if toward_left else r - t
            part += GW[q, k] * _outer_value(u, a0, ta, b0, tb, Lb, s, ktype, eps, cs, coef)
        acc += pw * part
        lo = hi
    return acc


@nb.njit(cache=True)
def near_pair(a0, ta, La, b0, tb, Lb, s, ktype, eps, cs, coef, q, depth):
    """int_0^La int_0^Lb k(|a0 + u ta - b0 - v tb|) dv du for close segments."""
    d = a0.shape[0]
    bp = np.empty(5)
    sc = np.empty(5)
    nb_ = 0
    b1 = np.empty(d)
    for k in range(d):
        b1[k] = b0[k] + Lb * tb[k]
    u, dist = _line_point_dist(a0, ta, La, b0)
    bp[nb_] = u
    sc[nb_] = dist
    nb_ += 1
    u, dist = _line_point_dist(a0, ta, La, b1)
    bp[nb_] = u
    sc[nb_] = dist
    nb_ += 1
    u, v, dist = _closest_params(a0, ta, La, b0, tb, Lb)
    bp[nb_] = u
    sc[nb_] = dist
    nb_ += 1
    if ktype == 1:
        # kink where the clamp radius meets the closest approach
        bp[nb_] = u
        sc[nb_] = abs(dist - eps)
        nb_ += 1
    # drop breakpoints far from any singular feature, merge duplicates
    pts = np.empty(nb_ + 2)
    lev = np.empty(nb_ + 2, dtype=np.int64)
    pts[0] = 0.0
    lev[0] = -1
    pts[1] = La
    lev[1] = -1
    m = 2
    floor_scale = La * 0.5 ** depth
    for i in range(nb_):
        if sc[i] >= La:
            continue
        ll = int(math.ceil(math.log2(La / max(sc[i], floor_scale))))
        ll = min(max(ll, 0), depth)
        pts[m] = bp[i]
        lev[m] = ll
        m += 1
    order = np.argsort(pts[:m])
    P = np.empty(m)
    Lv = np.empty(m, dtype=np.int64)
    n = 0
    tol = 1e-14 * La
    for idx in order:
        if n > 0 and pts[idx] - P[n - 1] <= tol:
            Lv[n - 1] = max(Lv[n - 1], lev[idx])
            continue
        P[n] = pts[idx]
        Lv[n] = lev[idx]
        n += 1
    total = 0.0
    for i in range(n - 1):
        l = P[i]
        r = P[i + 1]
        mid = 0.5 * (l + r)
        half = mid - l
        nl = 0
        if Lv[i] >= 0:
            nl = Lv[i] - int(math.floor(math.log2(La / half)))
            nl = min(max(nl, 0), depth)
        nr = 0
        if Lv[i + 1] >= 0:
            nr = Lv[i + 1] - int(math.floor(math.log2(La / half)))
            nr = min(max(nr, 0), depth)
        total += _graded_half(l, mid, True, nl, a0, ta, b0, tb, Lb, s, ktype, eps, cs, coef, q)
        total += _graded_half(mid, r, False, nr, a0, ta, b0, tb, Lb, s, ktype, eps, cs, coef, q)
    return total


@nb.njit(cache=True)
def gauss_pair(a0, ta, La, b0, tb, Lb, s, ktype, eps, q):
    d = a0.shape[0]
    acc = 0.0
    for i in range(q):
        u = La * GX[q, i]
        row = 0.0
        for j in range(q):
            v = Lb * GX[q, j]
            r2 = 0.0
            for k in range(d):
                z = a0[k] + u * ta[k] - b0[k] - v * tb[k]
                r2 += z * z
            if ktype == 0:
                row += GW[q, j] * math.exp(-0.5 * s * math.log(r2))
            else:
                row += GW[q, j] * kernel_value(math.sqrt(r2), s, ktype, eps)
        acc += GW[q, i] * row
    return acc * La * Lb


@nb.njit(cache=True)
def far_order(gap, lmax, tol, qmax):
    # Bernstein-ellipse estimate for a kernel singular at distance gap
    dd = 2.0 * gap / lmax
    rho = dd + math.sqrt(1.0 + dd * dd)
    q = int(math.ceil(math.log(1.0 / tol) / (2.0 * math.log(rho))))
    return min(max(q, 1), qmax)


@nb.njit(cache=True)
def pair_integral(a0, a1, b0, b1, s, ktype, eps, cs, coef, q, depth, near_ratio, tol, force_quad):
    """Unweighted double integral of the kernel over two segments."""
    d = a0.shape[0]
    ta = np.empty(d)
    tb = np.empty(d)
    La = 0.0
    Lb = 0.0
    same = True
    for k in range(d):
        ta[k] = a1[k] - a0[k]
        tb[k] = b1[k] - b0[k]
        La += ta[k] * ta[k]
        Lb += tb[k] * tb[k]
        if a0[k] != b0[k] or a1[k] != b1[k]:
            same = False
    La = math.sqrt(La)
    Lb = math.sqrt(Lb)
    for k in range(d):
        ta[k] /= La
        tb[k] /= Lb
    if same and ktype == 0 and not force_quad:
        return 2.0 * La ** (2.0 - s) / ((1.0 - s) * (2.0 - s))
    cd2 = 0.0
    for k in range(d):
        z = 0.5 * (a0[k] + a1[k] - b0[k] - b1[k])
        cd2 += z * z
    lmax = max(La, Lb)
    gap = math.sqrt(cd2) - 0.5 * (La + Lb)
    if gap >= near_ratio * lmax:
        return gauss_pair(a0, ta, La, b0, tb, Lb, s, ktype, eps, far_order(gap, lmax, tol, q))
    # integrate the outer variable along the longer segment
    if Lb > La:
        return near_pair(b0, tb, Lb, a0, ta, La, s, ktype, eps, cs, coef, q, depth)
    return near_pair(a0, ta, La, b0, tb, Lb, s, ktype, eps, cs, coef, q, depth)


def far_thresholds(tol, qmax):
    """Smallest 2 gap / lmax for which far_order returns each q = 1..qmax.

    far_order gives q <= m exactly when asinh(2 gap / lmax) >= log(1/tol) / (2m).
    """
    out = np.empty(qmax + 1)
    out[0] = np.inf
    for m in range(1, qmax + 1):
        out[m] = math.sinh(math.log(1.0 / tol) / (2.0 * m))
    return out


@nb.njit(cache=True)
def _far_gauss_rows(starts, tang, lengths, i, j, q, s, ktype, eps):
    # gauss_pair on rows i, j without temporaries
    d = starts.shape[1]
    La = lengths[i]
    Lb = lengths[j]
    acc = 0.0
    for a in range(q):
        u = La * GX[q, a]
        row = 0.0
        for b in range(q):
            v = Lb * GX[q, b]
            r2 = 0.0
            for k in range(d):
                z = starts[i, k] + u * tang[i, k] - starts[j, k] - v * tang[j, k]
                r2 += z * z
            if ktype == 0:
                row += GW[q, b] * math.exp(-0.5 * s * math.log(r2))
            else:
                row += GW[q, b] * kernel_value(math.sqrt(r2), s, ktype, eps)
        acc += GW[q, a] * row
    return acc * La * Lb


@nb.njit(cache=True, parallel=True)
def weighted_row_sums(starts, ends, weights, s, ktype, eps, cs, coef, q, depth,
                      near_ratio, tol, force_quad, thresholds):
    """Row i holds w_i^2 I_ii + 2 sum_{j>i} w_i w_j (tau_i . tau_j) I_ij.

    Each row is accumulated in index order with Kahan compensation.
    Well-separated pairs take an inlined tensor Gauss rule whose order
    comes from ``thresholds`` (see far_thresholds).
    """
    n = starts.shape[0]
    d = starts.shape[1]
    rows = np.zeros(n)
    lengths = np.empty(n)
    tang = np.empty((n, d))
    mid = np.empty((n, d))
    for i in range(n):
        acc = 0.0
        for k in range(d):
            z = ends[i, k] - starts[i, k]
            acc += z * z
        lengths[i] = math.sqrt(acc)
        for k in range(d):
            tang[i, k] = (ends[i, k] - starts[i, k]) / lengths[i]
            mid[i, k] = 0.5 * (starts[i, k] + ends[i, k])
    for i in nb.prange(n):
        total = weights[i] * weights[i] * pair_integral(
            starts[i], ends[i], starts[i], ends[i], s, ktype, eps, cs, coef, q, depth,
            near_ratio, tol, force_quad)
        comp = 0.0
        for j in range(i + 1, n):
            dot = 0.0
            for k in range(d):
                dot += tang[i, k] * tang[j, k]
            if dot == 0.0:
                continue
            cd2 = 0.0
            for k in range(d):
                z = mid[i, k] - mid[j, k]
                cd2 += z * z
            lmax = max(lengths[i], lengths[j])
            gap = math.sqrt(cd2) - 0.5 * (lengths[i] + lengths[j])
            if gap >= near_ratio * lmax:
                dd = 2.0 * gap / lmax
                m = q
                while m > 1 and dd >= thresholds[m - 1]:
                    m -= 1
                integral = _far_gauss_rows(starts, tang, lengths, i, j, m, s, ktype, eps)
            else:
                integral = pair_integral(starts[i], ends[i], starts[j], ends[j], s, ktype,
                                         eps, cs, coef, q, depth, near_ratio, tol, force_quad)
            val = 2.0 * weights[i] * weights[j] * dot * integral
            y = val - comp
            t = total + y
            comp = (t - total) - y
            total = t
        rows[i] = total
    return rows


@nb.njit(cache=True)
def pair_matrix(starts, ends, s, ktype, eps, cs, coef, q, depth, near_ratio, tol, force_quad):
    """Symmetric matrix of unweighted pair integrals I_ij."""
    n = starts.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            v = pair_integral(starts[i], ends[i], starts[j], ends[j], s, ktype, eps, cs, coef,
                              q, depth, near_ratio, tol, force_quad)
            out[i, j] = v
            out[j, i] = v
    return out
