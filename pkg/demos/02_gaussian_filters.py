"""
Gaussian filters over iteration counts
======================================

The estimators draw iteration counts from a truncated discrete Gaussian.
Its cosine transform is a periodic Gaussian, which is what makes the
least-squares loss well behaved.
"""
import math

import numpy as np

from eigengap_ae.gaussian_filters import (
    Kind,
    PeriodicGaussian,
    Variant,
    analytic_second_derivative,
    build_sampler,
    cosine_transform,
)

T = 5.0
s = build_sampler(T)
print(f"T={T}: cutoff M={s.M}, mean={s.mean():.1e}, variance={s.variance():.3f} (T^2={T * T})")
print(f"expected queries per shot: {s.expected_queries():.2f}")

odd = build_sampler(T, kind=Kind.ODD_ONLY)
print("odd-only table near zero:", {m: round(odd.prob(m), 5) for m in range(-3, 4)})

rng = np.random.default_rng(0)
draws = s.sample(rng, 10)
print("ten draws:", draws.tolist())

# The cosine transform of the table is close to the periodic Gaussian.
x = np.linspace(0, 2 * math.pi, 7)
phi = PeriodicGaussian(T)
print("transform :", np.round(cosine_transform(s.support, s.pmf, x), 6))
print("Phi_T     :", np.round(phi(x), 6))

# Curvature: sharply concave at the peak, flat elsewhere.
for xi in (0.0, 0.5 / T, 1.0 / T, math.pi):
    print(f"Phi''({xi:.3f}) / T^2 = {analytic_second_derivative(phi, xi) / T**2:+.4f}")

psi = PeriodicGaussian(T, variant=Variant.PSI)
print(f"Psi_T(0)={psi(0.0):.6f}  Psi_T(pi)={psi(math.pi):.6f}  q_T(0)={psi.zero_mass:.2e}")
