"""Transition density, the normalising constant c_k and the radial Bessel law.

Run: python3 demos/04_transition_density.py
"""

from fractions import Fraction

import numpy as np
from scipy import integrate

from dunkl import density, rootsys

# %% c_k: closed forms where known, cross-checked by quadrature
for kind, ks in (("B2", (1, Fraction(1, 2))), ("A2", (Fraction(2, 3),)), ("I2(5)", (Fraction(1, 4),))):
    rs = rootsys.build(kind, None, ks)
    est = density.compute_ck(rs)
    quad = density.compute_ck(rs, "quadrature")
    print(f"{rs.describe():22s} {est.method:30s} c_k={est.value:.12g} quad={quad.value:.12g}")

# %% rank one density integrates to one and has mean x (X is a martingale)
rs = rootsys.build("rank1", 1, (Fraction(3, 5),))
ctx = density.density_context(rs)
p = lambda y: density.transition_density(ctx, [0.8], [y], 0.5)
mass = integrate.quad(p, -9, 0)[0] + integrate.quad(p, 0, 9)[0]
mean = integrate.quad(lambda y: y * p(y), -9, 0)[0] + integrate.quad(lambda y: y * p(y), 0, 9)[0]
print("mass", mass, "mean", mean)

# %% |X_t| is a Bessel process of dimension d + 2 gamma
N = float(rs.bessel_dimension)
r = np.linspace(0.05, 3, 5)
sym = np.array([p(v) + p(-v) for v in r])
print("radial from density:", np.round(sym, 6))
print("Bessel density:     ", np.round(density.bessel_density(N, 0.8, r, 0.5), 6))
