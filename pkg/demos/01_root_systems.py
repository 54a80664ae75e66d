"""Root systems, reflection groups and the Weyl chamber.

Run: python3 demos/01_root_systems.py
"""

from fractions import Fraction

import numpy as np

from dunkl import rootsys

# %% Build a few systems; roots are normalised to <alpha, alpha> = 2
for kind, ks in (("A2", (1,)), ("B2", (1, Fraction(1, 2))), ("D3", (1,)), ("I2(5)", (Fraction(1, 3),))):
    rs = rootsys.build(kind, None, ks)
    W = rootsys.group_elements(rs)
    print(f"{rs.describe():24s} d={rs.dim} |R+|={rs.n_roots} |W|={len(W)} gamma={rs.gamma} exact={rs.exact}")

# %% B2 lists the long roots first; multiplicities are per orbit
b2 = rootsys.build("B2", None, (3, Fraction(1, 2)))
for a, k in zip(b2.positive_roots, b2.multiplicity):
    print("root", tuple(str(c) for c in a), "k =", k)

# %% Every point has one representative in the closed fundamental chamber
x = np.array([[-0.3, 1.7], [2.0, -2.5]])
print(rootsys.chamber_project_array(b2, x))
print(rootsys.chamber_project(b2, (Fraction(-3, 10), Fraction(17, 10))))
