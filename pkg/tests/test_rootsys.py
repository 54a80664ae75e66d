from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dunkl import rootsys
from dunkl.field import QSqrt2

SYSTEMS = [
    ("rank1", 1, (1,), 2),
    ("product_of_rank1", 3, (1, F(1, 2), 2), 8),
    ("A2", None, (1,), 6),
    ("A3", None, (F(1, 3),), 24),
    ("B2", None, (1, F(1, 2)), 8),
    ("B3", None, (2, 1), 48),
    ("D3", None, (1,), 24),
    ("D4", None, (1,), 192),
    ("I2(4)", None, (1, 2), 8),
    ("I2(5)", None, (1,), 10),
    ("I2(6)", None, (1, 3), 12),
]


@pytest.mark.parametrize("kind,dim,ks,order", SYSTEMS)
def test_invariants(kind, dim, ks, order):
    rs = rootsys.build(kind, dim, ks)
    A = rs.roots_array
    np.testing.assert_allclose(np.einsum("ij,ij->i", A, A), 2.0, atol=1e-12)
    for i in range(rs.n_roots):
        S = rootsys.reflection_matrix(rs, i)
        for j in range(rs.n_roots):
            img = S @ A[j]
            hits = [r for r in range(rs.n_roots) if np.allclose(img, A[r]) or np.allclose(img, -A[r])]
            assert len(hits) == 1
            # k is W-invariant
            assert rs.multiplicity[hits[0]] == rs.multiplicity[j]
    assert len(rootsys.group_elements(rs)) == order
    assert rs.bessel_dimension == 2 * sum(rs.multiplicity) + rs.dim


def test_exact_roots_squared_norm_is_two():
    rs = rootsys.build("B2", None, (1, 1))
    assert rs.exact
    for a in rs.positive_roots:
        assert sum((QSqrt2.coerce(c) * QSqrt2.coerce(c) for c in a), QSqrt2(0)) == QSqrt2(2)


def test_orbit_ordering_for_b2():
    rs = rootsys.build("B2", None, (3, F(1, 2)))
    # long roots e1 -/+ e2 first, then the short sqrt2 e_i
    assert rs.multiplicity == (3, 3, F(1, 2), F(1, 2))
    assert rs.orbit_multiplicities() == (3, F(1, 2))


def test_float_mode_when_sqrt3_needed():
    assert not rootsys.build("I2(6)", None, (1, 1)).exact
    assert rootsys.build("I2(4)", None, (1, 1)).exact


@pytest.mark.parametrize(
    "kind,dim,ks",
    [("A", 0, (1,)), ("rank1", 2, (1,)), ("B2", None, (1, 2, 3)), ("Z", 2, (1,)), ("B2", None, (-1, 1))],
)
def test_bad_systems(kind, dim, ks):
    with pytest.raises(rootsys.RootSystemError):
        rootsys.build(kind, dim, ks)


vectors = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(vectors, st.lists(st.integers(0, 8), max_size=6))
def test_chamber_projection(v, word):
    rs = rootsys.build("B3", None, (1, 1))
    x = np.array(v)
    y = x.copy()
    for i in word:
        y = rootsys.reflection_matrix(rs, i) @ y
    px = rootsys.chamber_project_array(rs, x)[0]
    py = rootsys.chamber_project_array(rs, y)[0]
    assert np.all(px @ rs.roots_array.T >= -1e-12)
    np.testing.assert_allclose(px, py, atol=1e-9)
    assert np.isclose(np.linalg.norm(px), np.linalg.norm(x))


def test_exact_chamber_projection_matches_float():
    rs = rootsys.build("A2", None, (1,))
    x = (F(3), F(-1), F(2))
    exact = rootsys.chamber_project(rs, x)
    flt = rootsys.chamber_project_array(rs, np.array([3.0, -1.0, 2.0]))[0]
    np.testing.assert_allclose([float(c) for c in exact], flt)
