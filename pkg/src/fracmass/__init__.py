"""Fractional mass of curves and 1-currents.

Numerics for the s-fractional mass M_s, its first variation and
curvature, its spectral form, the fractional perimeter of planar sets,
and a constructive approximation of divergence-free fields by weighted
closed polygons.
"""

from .fields import FieldSpec, curl_bump_2d, curl_bump_3d, l1_norm
from .geometry import (BoundaryChain, OrientedSegment, PolyCurve, SegmentCurrent, boundary,
                       curve_to_current, curves_to_current, is_simple, loop_decompose,
                       merge_points, sample_smooth_curve, self_intersections, transform,
                       transform_curve)
from .perimeter import (PlanarRegion, boundary_mass_perimeter, fractional_perimeter_mc,
                        hexagon, l_shape, square, square_annulus)
from .riesz import (DomainError, FracParams, QuadConfig, field_riesz_energy, fractional_mass,
                    kernel, pair_energy, regularized_mass_m1, self_energy_segment)
from .smirnov import ApproxParams, Diagnostics, approximate
from .spectral import (SpectralConfig, fourier_of_current, indicator_fourier,
                       indicator_spectral_mass, perimeter_identity_check, riesz_constant,
                       spectral_mass)
from .variation import (FlowError, Perturbation, curvature_field, fd_first_variation,
                        first_variation, fractional_curvature, gradient_flow_step, richardson)

__version__ = "0.1.0"
