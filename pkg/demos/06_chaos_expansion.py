"""Exact chaos expansions of polynomial functionals and their Monte Carlo check.

Run: python3 demos/06_chaos_expansion.py
"""

from fractions import Fraction

from dunkl import chaos, intertwine, pathsim, rootsys

rs = rootsys.build("rank1", 1, (1,))
tb = intertwine.build_intertwine(rs, 4)

# m_1(X_(1/2)) m_1(X_1): constant, terms and the exact variance
spec = chaos.FunctionalSpec((Fraction(1, 2), Fraction(1)), ((1,), (1,)))
exp = chaos.chaos_expand(tb, spec, [1])
print(exp.canonical())
print("variance by the isometry:", exp.variance())

# both harmonic lifts give the same expansion, character for character
print("heat lift agrees:", chaos.chaos_expand(tb, spec, [1], lift="heat").canonical() == exp.canonical())

# simulate, build the iterated integrals, compare
path = pathsim.simulate(rs, [1.0], 1.0, 1e-3, 99, 10_000, record_every=10, workers=4)
dec = pathsim.extract_martingales(rs, path)
rep = chaos.isometry_check(path, dec, exp, tb)
print("E Lambda:", rep["lambda_mean"], "exact", rep["constant"])
print("Var Lambda:", rep["lambda_var"], "exact", rep["variance_exact"])
for t in rep["terms"]:
    print(t["indices"], "E I^2 = %.5f +- %.5f" % t["second_moment"], "exact %.5f" % t["norm_sq"])
