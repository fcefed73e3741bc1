"""Normalization constants for the circle with unnormalized Lebesgue measure.

Multiplier convention: (-Δ)^{1/2} acts as |k| on e^{ikx}, Fourier coefficients
are (1/2π)∫ f e^{-ikx} dx and distances are chordal, |x - y| = 2|sin((x-y)/2)|.

Every constant below is checked by an independent quadrature oracle in
``tests/test_constants.py``. The flow and the verification suite read them
through this module at call time, so a test can perturb one and watch the
stationarity check break.
"""

from __future__ import annotations

import math

# P.V.∫ (f(x) - f(y)) / |x-y|^2 dy = PV_HALF_LAPLACIAN * (-Δ)^{1/2} f.
# For f = e^{ikx} the integrand reduces to a Fejér kernel of integral 2π|k|,
# halved because only the real part of (1 - e^{ikh}) survives.
PV_HALF_LAPLACIAN = math.pi

# ∫∫ |d_{1/2} u|^2 dx dy / |x-y| = FRACGRAD_ENERGY * ‖(-Δ)^{1/4} u‖^2_{L^2}.
FRACGRAD_ENERGY = 2.0 * math.pi

# div_{1/2} d_{1/2} = DIV_GRAD * (-Δ)^{1/2}; antisymmetrization doubles (a).
DIV_GRAD = 2.0 * math.pi

# λ = λ_raw / LAMBDA_SCALE makes the sphere-preservation identity exact:
# for |u| = 1, u·(-Δ)^{1/2}u = λ_raw / (2π).
LAMBDA_SCALE = 2.0 * math.pi

# Factor in front of the three-term remainder T^i(u, v, w).
HALF = 0.5
