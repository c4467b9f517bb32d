"""The s-fractional mass of segment currents and related Riesz energies."""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels as K
from .geometry import SegmentCurrent


class DomainError(ValueError):
    """A numeric quantity was requested outside its domain."""


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature controls.

    ``gauss_order`` is the per-panel order for close pairs and the largest
    order used for far pairs; far pairs pick the smallest order whose
    error estimate is below ``far_tol``.  ``near_split_depth`` bounds the
    number of dyadic grading levels toward a singular point.
    """

    gauss_order: int = 8
    near_split_depth: int = 20
    near_ratio: float = 2.0
    far_tol: float = 1e-10

    def __post_init__(self):
        if not 2 <= self.gauss_order <= K.MAX_ORDER:
            raise ValueError(f"gauss_order must be in [2, {K.MAX_ORDER}]")
        if self.near_split_depth < 0 or self.near_split_depth > 60:
            raise ValueError("near_split_depth must be in [0, 60]")
        if not self.near_ratio > 0 or not 0 < self.far_tol < 1:
            raise ValueError("near_ratio must be > 0 and far_tol in (0, 1)")

    def refined(self):
        return QuadConfig(min(2 * self.gauss_order, K.MAX_ORDER),
                          min(2 * self.near_split_depth, 60), self.near_ratio, self.far_tol)


@dataclass(frozen=True)
class FracParams:
    s: float = 0.5
    eps: float = 0.0
    quad: QuadConfig = field(default_factory=QuadConfig)
    smooth_kernel: bool = False

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.eps == 0 and not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")


def kernel(r, p):
    """Pointwise kernel: r^-s, or 1/max(r, eps) when ``p.eps`` > 0."""
    r = float(r)
    if r < 0 or not math.isfinite(r):
        raise DomainError("r must be a finite nonnegative distance")
    if p.eps > 0:
        return 1.0 / math.sqrt(r * r + p.eps ** 2) if p.smooth_kernel else 1.0 / max(r, p.eps)
    if r == 0:
        raise DomainError("Riesz kernel is singular at r = 0")
    return r ** (-p.s)


def self_energy_segment(L, s):
    """int_0^L int_0^L |u - v|^-s du dv = 2 L^(2-s) / ((1-s)(2-s))."""
    if not L > 0:
        raise ValueError("L must be positive")
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return 2.0 * L ** (2.0 - s) / ((1.0 - s) * (2.0 - s))


def _mode(p):
    if p.eps > 0:
        return (2 if p.smooth_kernel else 1), 1.0, float(p.eps), 0.0, np.zeros(K.N_ASYM + K.CHEB_PIECES * K.N_CHEB)
    cs, coef = K.riesz_aux(p.s)
    return 0, float(p.s), 0.0, cs, coef


def pair_energy(A, B, p, force_quad=False):
    """w_A w_B (tau_A . tau_B) times the kernel integrated over A x B."""
    if A.start.size != B.start.size:
        raise ValueError("segments of different dimension")
    dot = float(np.dot(A.tangent, B.tangent))
    if dot == 0.0:
        return 0.0
    ktype, s, eps, cs, coef = _mode(p)
    q = p.quad
    val = K.pair_integral(A.start, A.end, B.start, B.end, s, ktype, eps, cs, coef,
                          q.gauss_order, q.near_split_depth, q.near_ratio, q.far_tol, force_quad)
    if not math.isfinite(val):
        raise DomainError("non-finite pair integral")
    return A.weight * B.weight * dot * val


def _run(mu, p, threads, force_quad):
    ktype, s, eps, cs, coef = _mode(p)
    q = p.quad
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    rows = K.weighted_row_sums(np.ascontiguousarray(mu.starts), np.ascontiguousarray(mu.ends),
                               np.ascontiguousarray(mu.weights), s, ktype, eps, cs, coef,
                               q.gauss_order, q.near_split_depth, q.near_ratio, q.far_tol,
                               force_quad, K.far_thresholds(q.far_tol, q.gauss_order))
    if not np.all(np.isfinite(rows)):
        raise DomainError("non-finite pair integral")
    # fixed-order exact reduction of the per-row partial sums
    return math.fsum(rows.tolist())


def fractional_mass(mu, p, threads=None, force_quad=False):
    """M_s(mu) = sum_ij w_i w_j (tau_i . tau_j) int int |x - y|^-s.

    With ``force_quad`` the diagonal terms are integrated numerically
    instead of by their closed form.
    """
    if not isinstance(mu, SegmentCurrent):
        raise TypeError("expected a SegmentCurrent")
    if len(mu) == 0:
        raise ValueError("empty current")
    if p.eps > 0:
        raise ValueError("use regularized_mass_m1 for eps > 0")
    return _run(mu, p, threads, force_quad)


def regularized_mass_m1(mu, eps, quad=None, smooth=False, threads=None):
    """Mass with kernel 1/max(|x - y|, eps) (or 1/sqrt(r^2 + eps^2) if ``smooth``)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if len(mu) == 0:
        raise ValueError("empty current")
    p = FracParams(s=1.0, eps=eps, quad=quad or QuadConfig(), smooth_kernel=smooth)
    return _run(mu, p, threads, True)


def pair_integral_matrix(mu, s, quad=None):
    """Matrix of unweighted pair integrals int int |x - y|^-s (small currents)."""
    quad = quad or QuadConfig()
    cs, coef = K.riesz_aux(s)
    return K.pair_matrix(np.ascontiguousarray(mu.starts), np.ascontiguousarray(mu.ends),
                         float(s), 0, 0.0, cs, coef, quad.gauss_order, quad.near_split_depth,
                         quad.near_ratio, quad.far_tol, False)


def field_riesz_energy(psi, s, n_samples=10**6, seed=0, batch=2**18):
    """Monte Carlo estimate of int int psi(x) . psi(y) |x - y|^-s dx dy.

    Pairs are drawn uniformly from the support box.  Batches use seeds
    spawned from ``seed`` so the result does not depend on batch timing.
    Returns ``(estimate, standard_error)``.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    lo, hi = psi.support_box
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("field support must be bounded")
    if psi.is_zero():
        return 0.0, 0.0
    vol = float(np.prod(hi - lo))
    sizes = [batch] * (n_samples // batch) + ([n_samples % batch] if n_samples % batch else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    sums = []
    sq = []
    for m, ss in zip(sizes, seeds):
        rng = np.random.default_rng(ss)
        x = lo + (hi - lo) * rng.random((m, lo.size))
        y = lo + (hi - lo) * rng.random((m, lo.size))
        r = np.linalg.norm(x - y, axis=1)
        f = np.einsum("ij,ij->i", psi(x), psi(y)) * r ** (-s)
        sums.append(math.fsum(f.tolist()))
        sq.append(math.fsum((f * f).tolist()))
    mean = math.fsum(sums) / n_samples
    var = max(math.fsum(sq) / n_samples - mean * mean, 0.0)
    return vol * vol * mean, vol * vol * math.sqrt(var / n_samples)
