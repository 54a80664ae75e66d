"""The intertwining operator V_k, generalized monomials and space-time Hermite polynomials.

Run: python3 demos/03_intertwiner_and_hermite.py
"""

from fractions import Fraction

from dunkl import intertwine, rootsys

# %% rank one: V_k x^n is a multiple of x^n
rs1 = rootsys.build("rank1", 1, (1,))
tb1 = intertwine.build_intertwine(rs1, 6)
for n in range(5):
    print(f"m_{n} =", tb1.m((n,)))

# Q_nu = V_k H_nu is space-time harmonic; note the minus sign in front of t
fam = intertwine.hermite_Q(tb1, (2,))
print("Q_2 =", fam.Q)
print("Q_2(1, -1) =", fam.Q.eval((Fraction(1),), Fraction(-1)))
print("harmonic:", not intertwine.harmonicity_defect(rs1, fam.Q))

# %% B2: the table solves T_i m_nu = nu_i m_(nu - e_i) degree by degree
rs = rootsys.build("B2", None, (1, Fraction(1, 2)))
tb = intertwine.build_intertwine(rs, 4)
print("m_(2,1) =", tb.m((2, 1)))
bad = [nu for nu in tb.monomials for i in range(2) if intertwine.defining_relation_defect(tb, nu, i)]
print("defining relation failures:", bad)

# %% the Dunkl kernel by its power series, against the Bessel closed form in rank one
ft = intertwine.build_intertwine(rootsys.build("rank1", 1, (Fraction(3, 5),)), 40, exact=False)
for x, y in ((1.0, 0.7), (-1.2, 2.0)):
    print(x, y, intertwine.dunkl_kernel(ft, [x], [y]), intertwine.rank1_kernel_closed_form(0.6, x, y))
