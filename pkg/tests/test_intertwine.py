import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.special import gamma, iv

from dunkl import intertwine, polyalg, rootsys
from dunkl.polyalg import Polynomial


def rank1_coefficient(n, k):
    # V_k x^n = c_n x^n with T(c_n x^n) = n c_(n-1) x^(n-1)
    c = F(1)
    for j in range(1, n + 1):
        c *= F(j) / (j + (2 * k if j % 2 else 0))
    return c


@pytest.mark.parametrize("k", [F(1), F(3, 5), F(0)])
def test_rank1_generalized_monomials(k):
    tb = intertwine.build_intertwine(rootsys.build("rank1", 1, (k,)), 8)
    assert tb.m((1,)) == Polynomial.monomial((1,), 1, coeff=1 / (1 + 2 * k))
    for n in range(9):
        assert tb.m((n,)) == Polynomial.monomial((n,), 1, coeff=rank1_coefficient(n, k))


def test_rank1_hermite_has_minus_t():
    k = F(1)
    tb = intertwine.build_intertwine(rootsys.build("rank1", 1, (k,)), 4)
    Q2 = intertwine.hermite_Q(tb, (2,)).Q
    x = Polynomial.var(0, 1, 1)
    t = Polynomial.monomial((0,), 1, 1, time_exps=(1,))
    assert Q2 == x * x * F(1, 3) - t
    assert Q2.eval((F(1),), F(-1)) == F(4, 3)
    assert intertwine.classical_hermite(2) == x * x - t


SYSTEMS = [
    rootsys.build("B2", None, (1, F(1, 2))),
    rootsys.build("A2", None, (F(1, 3),)),
    rootsys.build("product_of_rank1", 2, (1, 2)),
    rootsys.build("I2(4)", None, (F(2, 3), 1)),
]


@pytest.mark.parametrize("rs", SYSTEMS, ids=lambda r: r.label)
def test_defining_relations_and_harmonicity(rs):
    tb = intertwine.build_intertwine(rs, 4)
    assert tb.m((0,) * rs.dim) == Polynomial.constant(1, rs.dim)
    for nu, m in tb.monomials.items():
        assert m.is_homogeneous(sum(nu))
        for i in range(rs.dim):
            assert not intertwine.defining_relation_defect(tb, nu, i)
        if sum(nu) <= 3:
            assert not intertwine.harmonicity_defect(rs, intertwine.hermite_Q(tb, nu).Q)


@pytest.mark.parametrize("rs", SYSTEMS[:2], ids=lambda r: r.label)
def test_table_lift_equals_heat_lift(rs):
    tb = intertwine.build_intertwine(rs, 4)
    p = polyalg.random_polynomial(np.random.default_rng(5), rs.dim, 4)
    assert intertwine.space_time_lift(tb, p) == intertwine.heat_lift(rs, p)


def test_generalized_expansion_round_trip():
    tb = intertwine.build_intertwine(SYSTEMS[0], 4)
    p = polyalg.random_polynomial(np.random.default_rng(9), 2, 4)
    back = Polynomial.zero(2)
    for nu, c in tb.to_generalized(p).items():
        back = back + tb.m(nu) * c
    assert back == p


def bessel_oracle(k, z):
    # j_a(iz) normalised Bessel functions, written with scipy's I_nu
    a = k - 0.5
    j = lambda nu, z: gamma(nu + 1) * (abs(z) / 2) ** (-nu) * iv(nu, abs(z))
    return j(a, z) + z / (2 * k + 1) * j(a + 1, z)


@pytest.mark.parametrize("k", [0.6, 1.0, 2.5])
@pytest.mark.parametrize("x,y", [(1.0, 0.7), (-1.2, 2.0), (0.3, -0.4)])
def test_rank1_kernel(k, x, y):
    tb = intertwine.build_intertwine(rootsys.build("rank1", 1, (F(k).limit_denominator(10),)), 40, exact=False)
    got = intertwine.dunkl_kernel(tb, [x], [y])
    assert math.isclose(got, bessel_oracle(k, x * y), rel_tol=1e-9)
    assert math.isclose(got, intertwine.rank1_kernel_closed_form(k, x, y), rel_tol=1e-9)


def test_kernel_symmetries():
    rs = SYSTEMS[0]
    tb = intertwine.build_intertwine(rs, 30, exact=False)
    x, y = np.array([0.8, -0.3]), np.array([0.5, 1.1])
    e = intertwine.dunkl_kernel(tb, x, y)
    assert math.isclose(e, intertwine.dunkl_kernel(tb, y, x), rel_tol=1e-10)
    for g in rootsys.group_elements(rs):
        assert math.isclose(e, intertwine.dunkl_kernel(tb, g @ x, g @ y), rel_tol=1e-10)
    assert intertwine.dunkl_kernel(tb, x, [0.0, 0.0]) == pytest.approx(1.0)


def test_kernel_truncation_error():
    tb = intertwine.build_intertwine(rootsys.build("rank1", 1, (1,)), 6)
    with pytest.raises(intertwine.KernelTruncationError):
        intertwine.dunkl_kernel(tb, [3.0], [3.0])
    with pytest.raises(intertwine.KernelTruncationError):
        tb.m((7,))
