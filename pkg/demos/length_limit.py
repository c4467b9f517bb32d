"""Fractional mass near s = 1: the length comes back.

As s -> 1 the self-interaction of a curve blows up like 1/(1 - s), and the
coefficient of the blow-up is twice the length.  We watch (1 - s) M_s
converge on a unit segment (closed form available) and on a circle, then
do the same for the fractional curvature, whose rescaled limit is the
ordinary curvature vector.

Run:  python3 demos/length_limit.py
"""

import math

import numpy as np

from fracmass import (FracParams, PolyCurve, curve_to_current, fractional_curvature,
                      fractional_mass, richardson, sample_smooth_curve, self_energy_segment)

S_VALUES = [0.9, 0.99, 0.999]


def table(title, values, target):
    print(title)
    for s, v in zip(S_VALUES, values):
        print(f"  s = {s:<6} (1-s) M_s = {v:.6f}")
    lim = richardson(S_VALUES, values)
    print(f"  extrapolated {lim:.6f}   target {target:.6f}\n")


# unit segment: exact value 2 / ((1 - s)(2 - s))
seg = curve_to_current(PolyCurve([[0.0, 0.0], [1.0, 0.0]]))
vals = [(1 - s) * fractional_mass(seg, FracParams(s)) for s in S_VALUES]
for s, v in zip(S_VALUES, vals):
    assert abs(v - (1 - s) * self_energy_segment(1.0, s)) < 1e-9
table("unit segment, twice the length is 2", vals, 2.0)

# unit circle with 2048 vertices
circle = curve_to_current(sample_smooth_curve("circle", {"r": 1.0}, 2048))
vals = [(1 - s) * fractional_mass(circle, FracParams(s)) for s in S_VALUES]
table("unit circle, twice the length is 4 pi", vals, 4 * math.pi)

# The convergence is slow in s: at s = 0.9 the circle is still 6% short.
# Linear extrapolation in (1 - s) removes the leading correction.

c = sample_smooth_curve("circle", {"r": 1.0}, 2048)
ks = [fractional_curvature(c, 0, s, check=False) for s in S_VALUES]
print("fractional curvature at (1, 0)")
for s, k in zip(S_VALUES, ks):
    print(f"  s = {s:<6} (1-s) k_s = ({(1 - s) * k[0]:.6f}, {(1 - s) * k[1]:.1e})")
lim = richardson(S_VALUES, [(1 - s) * np.linalg.norm(k) for s, k in zip(S_VALUES, ks)])
print(f"  extrapolated |k| = {lim:.6f}; -gamma'' = gamma = (1, 0), magnitude 1")
