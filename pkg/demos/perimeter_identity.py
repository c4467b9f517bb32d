"""Three ways to the fractional perimeter of a square.

P_s(E) counts pairs (x in E, y outside E) weighted by |x - y|^(-2-s).
For planar sets s^2 P_s(E) equals the fractional mass of the boundary,
and it also equals a weighted L2 norm of the Fourier transform of the
indicator.  The three numbers below come from independent code paths:
a ray Monte Carlo, a boundary double integral and a radial Fourier
quadrature.

Run:  python3 demos/perimeter_identity.py
"""

import time

from fracmass import (FracParams, fractional_mass, fractional_perimeter_mc,
                      indicator_spectral_mass, square)

s = 0.5
E = square()

t = time.perf_counter()
mc, err = fractional_perimeter_mc(E, s, n=10**6, seed=0)
print(f"Monte Carlo       s^2 P_s = {s * s * mc:.5f} +- {s * s * err:.5f}"
      f"   ({time.perf_counter() - t:.1f} s)")

t = time.perf_counter()
direct = fractional_mass(E.boundary_current(), FracParams(s))
print(f"boundary mass     M_s(dE) = {direct:.5f}            ({time.perf_counter() - t:.2f} s)")

t = time.perf_counter()
fourier = indicator_spectral_mass(E, s)
print(f"Fourier annulus           = {fourier:.5f}            ({time.perf_counter() - t:.1f} s)")

# The Fourier value is a few percent low: the annulus [1e-2, 1e3] drops the
# slowly decaying |xi|^(s-3) tail of a set with corners.
print(f"\nFourier vs boundary: {(fourier - direct) / direct:+.2%}")
