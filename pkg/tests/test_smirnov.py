import numpy as np
import pytest

from fracmass import ApproxParams, approximate, boundary, curl_bump_2d, curl_bump_3d
from fracmass.fields import FieldSpec, constant_field
from fracmass.smirnov import (_Atoms, Cube, boundary_match, build_lattices, close_current,
                              cube_cover, cylinder_frame, cylinder_match, face_flux,
                              greedy_pairs, lattice_points)


def unit_box_field(d):
    return FieldSpec("zero", {"dim": d, "center": np.full(d, 0.5), "radius": 0.5})


def cube_net_flux(cover, fluxes):
    """Outward flux of every cube from the shared face table."""
    table = {axis: dict(zip(map(tuple, idx.tolist()), f)) for axis, (idx, f, _) in fluxes.items()}
    out = []
    for cube in cover.cubes:
        tot = 0.0
        for axis in range(cover.dim):
            lo = tuple(cube.index)
            hi = list(cube.index)
            hi[axis] += 1
            tot += table[axis][tuple(hi)] - table[axis][lo]
        out.append(tot)
    return np.array(out)


def test_cube_cover_counts():
    assert len(cube_cover(unit_box_field(2), 0.25).cubes) == 16
    assert len(cube_cover(unit_box_field(3), 0.5).cubes) == 8
    assert cube_cover(unit_box_field(2), 5.0).shape == (1, 1)


def test_zero_field_has_zero_fluxes():
    cover = cube_cover(unit_box_field(2), 0.25)
    for _, f, _ in face_flux(unit_box_field(2), cover).values():
        assert np.all(f == 0)


def test_face_outside_support_is_zero():
    psi = curl_bump_2d(center=(0.5, 0.5), radius=0.3)
    psi = FieldSpec("custom_analytic", {"func": psi}, support_box=((0.0, 0.0), (1.0, 1.0)))
    cover = cube_cover(psi, 0.1)
    idx, f, _ = face_flux(psi, cover)[0]
    assert np.all(f[idx[:, 0] == 0] == 0)


@pytest.mark.parametrize("psi,eps", [(curl_bump_2d(), 0.1), (curl_bump_3d(), 0.25)])
def test_cube_fluxes_cancel(psi, eps):
    cover = cube_cover(psi, eps)
    fluxes = face_flux(psi, cover)
    scale = max(np.abs(f).max() for _, f, _ in fluxes.values())
    assert np.abs(cube_net_flux(cover, fluxes)).max() < 1e-12 * scale


def test_exact_fluxes_match_quadrature():
    psi = curl_bump_2d()
    cover = cube_cover(psi, 0.1)
    exact = face_flux(psi, cover)
    generic = FieldSpec("custom_analytic", {"func": psi}, support_box=psi.support_box)
    quad = face_flux(generic, cover, order=16)
    for axis in range(2):
        np.testing.assert_allclose(exact[axis][1], quad[axis][1], atol=1e-6)


def test_lattice_unit_spacing_count():
    pts = lattice_points(np.zeros(3), 0, 4.0, 1.0, 3)
    assert pts.shape == (16, 3)
    assert np.all(pts[:, 0] == 0)


def test_lattice_rounding_modes():
    half = lattice_points(np.zeros(2), 0, 1.0, 1 / 2.6, 2)
    floor = lattice_points(np.zeros(2), 0, 1.0, 1 / 2.6, 2, rounding="floor")
    assert half.shape[0] == 3 and floor.shape[0] == 2
    assert np.all(half[:, 1] < 1.0)


def test_build_lattices_spacing_and_empty():
    psi = constant_field((1.0, 0.0, 0.0), ((0, 0, 0), (1, 1, 1)))
    cover = cube_cover(psi, 1.0)
    fluxes = face_flux(psi, cover)
    lat1 = build_lattices(cover, fluxes, 0.01)
    lat2 = build_lattices(cover, fluxes, 0.02)
    # faces normal to e2, e3 carry no flux
    assert all(k[0] == 0 for k in lat1)
    key = (0, (0, 0, 0))
    assert lat2[key].spacing / lat1[key].spacing == pytest.approx(2 ** 0.5)
    assert lat1[key].points.shape[0] == 100


def test_constant_field_pairs_straight_across():
    psi = constant_field((1.0, 0.0, 0.0), ((0, 0, 0), (1, 1, 1)))
    cover = cube_cover(psi, 1.0)
    lat = build_lattices(cover, face_flux(psi, cover), 0.04)
    cube = cover.cubes[0]
    lo, hi = lat[(0, (0, 0, 0))], lat[(0, (1, 0, 0))]
    pts = np.vstack([lo.points, hi.points])
    signs = np.concatenate([-np.ones(len(lo.points), int), np.ones(len(hi.points), int)])
    atoms = _Atoms(np.arange(len(signs)), pts, signs)
    a, b, left = cylinder_match(cube, atoms, np.array([1.0, 0.0, 0.0]))
    assert not left.any()
    d = b - a
    np.testing.assert_array_equal(d[:, 1:], 0.0)
    assert np.all(d[:, 0] == 1.0)


def test_cylinder_match_empty():
    a, b, left = cylinder_match(Cube((0, 0), np.zeros(2), 1.0),
                                _Atoms(np.zeros(0, int), np.zeros((0, 2)), np.zeros(0, int)),
                                np.array([1.0, 0.0]))
    assert a.shape == (0, 2) and left.size == 0


def test_cylinder_frame_orthonormal():
    F = cylinder_frame(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(F @ F.T, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(F[0], np.array([1, 2, 3]) / np.sqrt(14))


def test_boundary_match_balanced_and_imbalanced():
    rng = np.random.default_rng(0)
    pts = rng.random((10, 2))
    signs = np.array([1, -1] * 5)
    _, _, left = boundary_match(_Atoms(np.arange(10), pts, signs))
    assert not left.any()
    signs = np.array([1] * 8 + [-1] * 5)
    _, _, left = boundary_match(_Atoms(np.arange(13), rng.random((13, 2)), signs))
    assert left.sum() == 3


def test_greedy_pairs_picks_closest_first():
    plus = np.array([[0.0, 0.0], [10.0, 0.0]])
    minus = np.array([[9.0, 0.0], [0.5, 0.0]])
    ip, im = greedy_pairs(plus, minus)
    assert sorted(zip(ip.tolist(), im.tolist())) == [(0, 1), (1, 0)]


def test_close_current():
    a, b = close_current(np.zeros((0, 2)), np.zeros(0, int))
    assert a.shape == (0, 2)
    a, b = close_current(np.array([[0.0, 0.0], [1.0, 2.0]]), np.array([1, -1]))
    np.testing.assert_array_equal(a, [[1.0, 2.0]])
    np.testing.assert_array_equal(b, [[0.0, 0.0]])
    with pytest.raises(RuntimeError):
        close_current(np.array([[0.0, 0.0]]), np.array([1]))


def test_zero_field_gives_empty_output():
    mu, loops, diag = approximate(unit_box_field(2), ApproxParams(0.25, 1e-3))
    assert len(mu) == 0 and loops == [] and diag.mass_mu == 0.0


@pytest.mark.parametrize("rounding", ["half", "floor"])
def test_output_is_exactly_closed(rounding):
    psi = curl_bump_2d(amplitude=0.02)
    mu, loops, diag = approximate(psi, ApproxParams(0.2, 1e-3, 1e-3, rounding=rounding),
                                  compute_ms=False)
    assert len(mu) > 0
    assert boundary(mu, 0.0).is_empty()
    assert all(c.closed for c in loops)
    assert sum(len(c) for c in loops) == len(mu)


def test_3d_output_is_closed():
    psi = curl_bump_3d(amplitude=0.05)
    mu, loops, diag = approximate(psi, ApproxParams(0.25, 2e-3, 0.0, dim=3), compute_ms=False)
    assert len(mu) > 0 and boundary(mu, 0.0).is_empty()


def test_direction_fidelity():
    psi = curl_bump_2d(amplitude=0.02)
    mu, _, diag = approximate(psi, ApproxParams(0.1, 1e-4, 1e-3), compute_ms=False,
                              decompose=False)
    n_good = diag.n_good
    seg = mu.ends[:n_good] - mu.starts[:n_good]
    mid = 0.5 * (mu.ends[:n_good] + mu.starts[:n_good])
    field = psi(mid)
    cos = np.einsum("ij,ij->i", seg, field) / (
        np.linalg.norm(seg, axis=1) * np.linalg.norm(field, axis=1))
    L = np.linalg.norm(seg, axis=1)
    assert L[cos >= 0.9].sum() >= 0.9 * L.sum()


def test_determinism():
    psi = curl_bump_2d(amplitude=0.02)
    p = ApproxParams(0.2, 1e-3, 1e-3)
    m1, l1, d1 = approximate(psi, p, ms_samples=10**4)
    m2, l2, d2 = approximate(psi, p, ms_samples=10**4)
    assert np.array_equal(m1.starts, m2.starts) and np.array_equal(m1.ends, m2.ends)
    assert d1.row() | {"runtime_s": 0} == d2.row() | {"runtime_s": 0}


def test_bad_params():
    with pytest.raises(ValueError):
        ApproxParams(0.0, 1e-3)
    with pytest.raises(ValueError):
        ApproxParams(0.1, 1e-3, rounding="nearest")
    with pytest.raises(ValueError):
        approximate(curl_bump_2d(), ApproxParams(0.1, 1e-3, dim=3))
