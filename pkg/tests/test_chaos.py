from fractions import Fraction as F

import numpy as np
import pytest

from dunkl import chaos, intertwine, pathsim, rootsys
from dunkl.field import QSqrt2
from dunkl.polyalg import Polynomial


def rank1_moments(k, x, t, n_max):
    """E_x X_t^n for n <= n_max, from exp(t T^2 / 2) on monomials, T x^n = (n + 2k[n odd]) x^(n-1)."""
    c = lambda n: n + (2 * k if n % 2 else 0)
    out = []
    for n in range(n_max + 1):
        total, coeff, p, j = F(0), F(1), n, 0
        while p >= 0:
            total += coeff * x**p * t**j
            coeff = coeff * c(p) * c(p - 1) / 2 / (j + 1) if p >= 2 else 0
            p, j = p - 2, j + 1
            if coeff == 0:
                break
        out.append(total)
    return out


def exact_value(v):
    return v if isinstance(v, F) else (v.a if isinstance(v, QSqrt2) and v.b == 0 else None)


@pytest.mark.parametrize("k", [F(1), F(1, 2), F(2)])
def test_variances_match_moment_oracle(k):
    rs = rootsys.build("rank1", 1, (k,))
    tb = intertwine.build_intertwine(rs, 4)
    c1, c2 = tb.m((1,)).coefficient((1,)), tb.m((2,)).coefficient((2,))
    c1, c2 = exact_value(c1), exact_value(c2)
    mom1 = rank1_moments(k, F(1), F(1), 4)
    mom_half = rank1_moments(k, F(1), F(1, 2), 4)

    e1 = chaos.chaos_expand(tb, chaos.FunctionalSpec((F(1),), ((1,),)), [1])
    assert e1.variance() == QSqrt2(c1**2 * (mom1[2] - mom1[1] ** 2))
    e2 = chaos.chaos_expand(tb, chaos.FunctionalSpec((F(1),), ((2,),)), [1])
    assert e2.constant == QSqrt2(c2 * mom1[2])
    assert e2.variance() == QSqrt2(c2**2 * (mom1[4] - mom1[2] ** 2))
    # m_1(X_s) m_1(X_t): condition on X_s and use E[X_t^2 | X_s = y] = y^2 + (1 + 2k)(t - s)
    e3 = chaos.chaos_expand(tb, chaos.FunctionalSpec((F(1, 2), F(1)), ((1,), (1,))), [1])
    second = c1**4 * (mom_half[4] + (1 + 2 * k) * F(1, 2) * mom_half[2])
    assert e3.constant == QSqrt2(c1**2 * mom_half[2])
    assert e3.variance() == QSqrt2(second - (c1**2 * mom_half[2]) ** 2)


def test_known_rank1_values():
    tb = intertwine.build_intertwine(rootsys.build("rank1", 1, (1,)), 4)
    got = [
        chaos.chaos_expand(tb, chaos.FunctionalSpec(ts, nus), [1]).variance()
        for ts, nus in (((1,), ((1,),)), ((1,), ((2,),)), ((F(1, 2), 1), ((1,), (1,))))
    ]
    assert got == [QSqrt2(F(1, 3)), QSqrt2(F(10, 9)), QSqrt2(F(29, 324))]


@pytest.mark.parametrize(
    "rs,spec",
    [
        (rootsys.build("B2", None, (1, F(1, 2))), chaos.FunctionalSpec((F(1, 2), F(1)), ((1, 0), (0, 1)))),
        (rootsys.build("A2", None, (F(1, 2),)), chaos.FunctionalSpec((F(1),), ((1, 1, 0),))),
    ],
    ids=["B2", "A2"],
)
def test_table_and_heat_lifts_agree(rs, spec):
    tb = intertwine.build_intertwine(rs, 2)
    x0 = [1, F(1, 2)] if rs.dim == 2 else [1, F(1, 3), -1]
    a = chaos.chaos_expand(tb, spec, x0)
    b = chaos.chaos_expand(tb, spec, x0, lift="heat")
    assert a.canonical() == b.canonical()


def test_first_chaos_integrand_is_the_hermite_integrand():
    tb = intertwine.build_intertwine(rootsys.build("rank1", 1, (1,)), 3)
    spec = chaos.FunctionalSpec((F(1),), ((3,),))
    exp = chaos.chaos_expand(tb, spec, [1])
    # noise labels are 1-based: the Brownian coordinate, then the root
    assert sorted(exp.first_peel) == [1, 2]
    for eps, G in exp.first_peel.items():
        assert G == chaos.first_peel_reference(tb, spec, eps)


def test_integrate_cells():
    one = Polynomial.constant(1, 0, 2)
    assert chaos.integrate_cells(one, [(0, 1), (0, None)]) == QSqrt2(F(1, 2))
    u1 = Polynomial.var(0, 0, 1)
    assert chaos.integrate_cells(u1 * u1, [(F(1, 2), 1)]) == QSqrt2(F(7, 24))


@pytest.mark.parametrize(
    "times,nus",
    [((), ()), ((1, F(1, 2)), ((1,), (1,))), ((1,), ((1,), (2,))), ((-1,), ((1,),)), ((1,), ((-1,),))],
)
def test_bad_specs(times, nus):
    with pytest.raises(chaos.ChaosError):
        chaos.FunctionalSpec(times, nus)


def test_reconstruction_on_simulated_paths():
    rs = rootsys.build("rank1", 1, (1,))
    tb = intertwine.build_intertwine(rs, 2)
    path = pathsim.simulate(rs, [1.0], 1.0, 1e-3, 77, 400)
    dec = pathsim.extract_martingales(rs, path)
    exp = chaos.chaos_expand(tb, chaos.FunctionalSpec((1,), ((2,),)), [1])
    rep = chaos.isometry_check(path, dec, exp, tb)
    m, se = rep["residual_mean"]
    assert abs(m) < 4 * se + 0.02
    assert rep["residual_second_moment"][0] < 0.05 * rep["variance_exact"]
