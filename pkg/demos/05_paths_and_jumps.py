"""Path simulation: Euler drift, reflection jumps, and the martingale decomposition.

Run: python3 demos/05_paths_and_jumps.py
"""

from fractions import Fraction

import numpy as np
from scipy import stats

from dunkl import density, pathsim, rootsys

# multiplicities well above 1/2; at k = 1/2 paths crowd the walls (see the README)
rs = rootsys.build("B2", None, (1, 1))
path = pathsim.simulate(rs, [1.0, 0.5], 1.0, 1e-3, 2024, 4000, record_every=100, workers=4)
print("paths", path.n_paths, "rejected", int(path.rejected.sum()), "jumps", len(path.jump_path))

# %% |X_1| against the Bessel law
r = np.linalg.norm(path.final[path.accepted], axis=1)
cdf = density.radial_cdf(float(rs.bessel_dimension), float(np.hypot(1.0, 0.5)), 1.0)
print("KS p-value for |X_1|:", stats.kstest(r, cdf).pvalue)

# %% jump counts against their compensators k int ds / <alpha, X>^2
f = pathsim.estimate_jump_functionals(rs, path)
for row in f["roots"]:
    m, se = row["count_minus_compensator"]
    print(f"root {row['root']} k={row['k']}: E N = {row['jump_count'][0]:.3f}, E(N - comp) = {m:+.4f} +- {se:.4f}")

# %% X = x + B + sum sqrt(k) M^alpha alpha; the residual is discretisation error only
dec = pathsim.extract_martingales(rs, path)
print("rms residual at T:", float(np.sqrt(np.mean(dec.residual[:, -1] ** 2))))
print("E [M^alpha]_T:", dec.quad_var[path.accepted].mean(axis=0).round(3))

# %% rank one skew product: |X| a Bessel process, signs flipped at a time-changed Poisson clock
a = pathsim.simulate(rootsys.build("rank1", 1, (1,)), [1.0], 1.0, 1e-3, 7, 4000, record_every=None, workers=4)
b = pathsim.simulate_skew_rank1(Fraction(1), 1.0, 1.0, 1e-3, 8, 4000, record_every=None, workers=4)
print("two-sample KS Euler vs skew product:", stats.ks_2samp(a.final[:, 0], b.final[:, 0]).pvalue)

# %% at k = 1/2 the reject policy conditions the sample; clip keeps every path
half = rootsys.build("B2", None, (1, Fraction(1, 2)))
for policy in ("reject", "clip"):
    q = pathsim.simulate(half, [1.0, 0.5], 1.0, 1e-3, 5, 2000, record_every=None, workers=4, on_collapse=policy)
    print(f"k=(1,1/2) {policy}: rejected {q.rejection_rate:.3f}, clipped substeps {int(q.clipped.sum())}")
