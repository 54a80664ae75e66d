"""Exact Dunkl operators on polynomials with coefficients in Q(sqrt2).

Run: python3 demos/02_dunkl_operators.py
"""

from fractions import Fraction

from dunkl import polyalg, rootsys
from dunkl.polyalg import Polynomial

rs = rootsys.build("B2", None, (1, Fraction(1, 2)))
x1, x2 = Polynomial.var(0, 2), Polynomial.var(1, 2)
p = x1**3 * x2 + x2**2 * Fraction(2, 3)
print("p        =", p)

# divided difference along the first root, always an exact polynomial
print("Delta_1 p =", polyalg.divided_difference(rs, 0, p))

# T_1, T_2 and their commutation
T1 = polyalg.dunkl_T(rs, 0, p)
print("T_1 p    =", T1)
print("[T_1, T_2] p == 0:", polyalg.dunkl_T(rs, 0, polyalg.dunkl_T(rs, 1, p)) == polyalg.dunkl_T(rs, 1, T1))

# the Dunkl Laplacian agrees with the explicit drift-plus-jump generator
print("L_k p    =", polyalg.dunkl_L(rs, p))
print("matches closed form:", polyalg.dunkl_L(rs, p) == polyalg.dunkl_L_closed(rs, p))

# the canonical text form parses back to the same polynomial
text = p.canonical()
assert Polynomial.parse(text, 2) == p
