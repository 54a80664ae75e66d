import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import integrate, special as sp

from dunkl import density, rootsys, special
from dunkl.polyalg import Polynomial


def gaussian_moment_ck(rs):
    """c_k for integer k: expand the (polynomial) weight and use E Z^(2m) = (2m-1)!!."""
    w = Polynomial.constant(1, rs.dim)
    for a, k in zip(rs.positive_roots, rs.multiplicity):
        w = w * Polynomial.linear_form(a) ** int(2 * k)
    total = 0.0
    for e, c in w.terms.items():
        if all(p % 2 == 0 for p in e):
            total += float(c) * math.prod(float(sp.factorial2(p - 1)) if p else 1.0 for p in e)
    return (2 * math.pi) ** (rs.dim / 2) * total


CLOSED = [
    ("A2", None, (1,), "closed_form_mehta"),
    ("A3", None, (1,), "closed_form_mehta"),
    ("D3", None, (1,), "closed_form_mehta"),
    ("I2(5)", None, (1,), "closed_form_mehta"),
    ("I2(6)", None, (2, 2), "closed_form_mehta"),
    ("B2", None, (1, 2), "closed_form_laguerre_selberg"),
    ("B3", None, (2, 1), "closed_form_laguerre_selberg"),
    ("product_of_rank1", 2, (1, 3), "closed_form_rank1_product"),
]


@pytest.mark.parametrize("kind,dim,ks,method", CLOSED)
def test_ck_closed_forms_against_gaussian_moments(kind, dim, ks, method):
    rs = rootsys.build(kind, dim, ks)
    assert density.default_ck_method(rs) == method
    est = density.compute_ck(rs)
    assert est.value == pytest.approx(gaussian_moment_ck(rs), rel=1e-11)


@pytest.mark.parametrize("kind,ks", [("B2", (F(3, 5), F(1, 3))), ("A2", (F(2, 3),)), ("I2(5)", (F(1, 4),))])
def test_ck_closed_form_against_quadrature(kind, ks):
    rs = rootsys.build(kind, None, ks)
    closed = density.compute_ck(rs).value
    quad = density.compute_ck(rs, "quadrature").value
    assert closed == pytest.approx(quad, rel=1e-9)


def test_ck_monte_carlo_within_its_error():
    rs = rootsys.build("B2", None, (1, F(1, 2)))
    mc = density.compute_ck(rs, "monte_carlo", n_samples=200_000, seed=3)
    closed = density.compute_ck(rs).value
    assert abs(mc.value / closed - 1) < 5 * mc.rel_error


def test_rank1_ck():
    for k in (F(0), F(1, 2), F(3)):
        rs = rootsys.build("rank1", 1, (k,))
        want = integrate.quad(lambda y: math.exp(-y * y / 2) * density.weight(rs, [y]), -np.inf, np.inf)[0]
        assert density.compute_ck(rs).value == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("nu", [-0.5, 0.0, 0.3, 1.5, 4.0, 9.5, 15.0])
def test_bessel_against_scipy(nu):
    x = np.concatenate([np.linspace(0, 40, 401), [19.999, 20.0, 20.001, 75.0, 300.0, 2000.0]])
    if nu < 0:
        # I_(-1/2) blows up at 0, where scipy returns nan
        assert special.bessel_ive(nu, 0.0) == np.inf
        x = x[1:]
    np.testing.assert_allclose(special.bessel_ive(nu, x), sp.ive(nu, x), rtol=1e-11, atol=1e-300)
    np.testing.assert_allclose(special.bessel_iv(nu, x[:200]), sp.iv(nu, x[:200]), rtol=1e-11)


def test_bessel_rejects_negative_argument():
    with pytest.raises(ValueError):
        special.bessel_ive(1.0, [-1.0])


@pytest.mark.parametrize("N,r0", [(1.0, 0.7), (2.2, 1.0), (5.0, 0.0), (7.0, 2.0)])
def test_bessel_density_normalised(N, r0):
    mass = integrate.quad(lambda r: density.bessel_density(N, r0, np.array([r]), 0.8)[0], 0, 30, limit=200)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_radial_cdf_matches_density():
    r, cdf = np.linspace(0.1, 4, 5), density.radial_cdf(3.0, 1.0, 1.0)
    for v in r:
        want = integrate.quad(lambda s: density.bessel_density(3.0, 1.0, np.array([s]), 1.0)[0], 0, v)[0]
        assert float(cdf(v)) == pytest.approx(want, abs=1e-7)


def test_zero_multiplicity_is_the_heat_kernel():
    ctx = density.density_context(rootsys.build("rank1", 1, (0,)))
    y = np.linspace(-3, 3, 13)[:, None]
    np.testing.assert_allclose(density.transition_density(ctx, [0.4], y, 0.7), density.heat_kernel([0.4], y, 0.7), rtol=1e-11)


def test_product_density_factorises():
    k1, k2 = F(1, 2), F(3, 2)
    ctx = density.density_context(rootsys.build("product_of_rank1", 2, (k1, k2)))
    c1 = density.density_context(rootsys.build("rank1", 1, (k1,)))
    c2 = density.density_context(rootsys.build("rank1", 1, (k2,)))
    x, y, t = [0.5, -0.8], [-0.3, 1.1], 0.6
    p = density.transition_density(ctx, x, y, t)
    assert p == pytest.approx(density.transition_density(c1, [x[0]], [y[0]], t) * density.transition_density(c2, [x[1]], [y[1]], t), rel=1e-10)


def test_density_is_w_invariant_and_positive():
    rs = rootsys.build("B2", None, (1, F(1, 2)))
    ctx = density.density_context(rs)
    x, y = np.array([0.7, 0.2]), np.array([-0.4, 0.9])
    p = density.transition_density(ctx, x, y, 0.5)
    assert p > 0
    for g in rootsys.group_elements(rs):
        assert density.transition_density(ctx, g @ x, g @ y, 0.5) == pytest.approx(p, rel=1e-10)


@pytest.mark.parametrize("kind,ks", [("B2", (2, F(1, 3))), ("A2", (F(1, 2),)), ("rank1", (F(3, 5),))])
def test_radial_part_of_generator(kind, ks):
    rs = rootsys.build(kind, 1 if kind == "rank1" else None, ks)
    assert density.radial_generator_check(rs, [F(1), F(-2), F(1, 3), F(5)])["equal"]
