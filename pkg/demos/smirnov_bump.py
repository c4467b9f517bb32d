"""Approximating a divergence-free field by closed polygons.

A small curl bump in the unit square is replaced by a weighted sum of
closed polygonal loops: cover by cubes of side eps, put a lattice of
atoms on each face whose density matches the flux, join opposite atoms
along the mean flow direction, then close what is left.  The result has
no boundary at all, and its mass, its action on test 1-forms and its
fractional mass approach those of the field as (eps, delta) shrink.

The finest level of the acceptance schedule takes several minutes, so
this demo stops one level earlier.

Run:  python3 demos/smirnov_bump.py
"""

from fracmass import ApproxParams, QuadConfig, approximate, boundary, curl_bump_2d

psi = curl_bump_2d(amplitude=0.02)
quad = QuadConfig(gauss_order=6, near_ratio=1.0, far_tol=1e-6)

print(f"{'eps':>6} {'delta':>7} {'segments':>9} {'loops':>6} {'mass err':>9} "
      f"{'pairing':>8} {'M_s err':>8}")
for eps, delta in ((0.2, 1e-3), (0.1, 1e-4)):
    mu, loops, d = approximate(psi, ApproxParams(eps, delta, rho=1e-3), s=0.5,
                               ms_samples=10**6, quad=quad)
    assert boundary(mu, 0.0).is_empty()
    print(f"{eps:>6} {delta:>7} {len(mu):>9} {len(loops):>6} {d.mass_error:>9.4f} "
          f"{d.pairing_err_max:>8.4f} {d.Ms_error:>8.4f}")

# Most of the mass sits on segments aligned with the flow ("good" cubes);
# the boundary-matching and closing parts shrink relative to it.
print(f"\nlast level: good {d.mass_good:.4f}, boundary {d.mass_bad:.4f}, "
      f"closing {d.mass_close:.4f}, field L1 {d.mass_psi:.4f}")
