import math
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from dunkl.field import QSqrt2, is_exact, sqrt_rational, to_float

rationals = st.fractions(min_value=-50, max_value=50, max_denominator=30)
elements = st.builds(QSqrt2, rationals, rationals)


@given(elements, elements, elements)
def test_ring_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert a - a == QSqrt2(0)


@given(elements)
def test_inverse(a):
    if a == QSqrt2(0):
        return
    assert a * (1 / a) == QSqrt2(1)


@given(elements, elements)
def test_float_image_is_a_homomorphism(a, b):
    assert math.isclose(float(a * b), float(a) * float(b), rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(float(a + b), float(a) + float(b), rel_tol=1e-12, abs_tol=1e-12)


def test_sqrt2_squares_to_two():
    r = QSqrt2.sqrt2()
    assert r * r == QSqrt2(2)
    assert math.isclose(float(r), math.sqrt(2))


def test_canonical_text():
    assert QSqrt2(F(1, 3)).canonical() == "1/3+0*sqrt2"
    assert QSqrt2(0, F(-2, 3)).canonical() == "0-2/3*sqrt2"


def test_sqrt_rational():
    assert sqrt_rational(F(9, 4)) == QSqrt2(F(3, 2))
    assert sqrt_rational(F(1, 2)) == QSqrt2(0, F(1, 2))
    assert sqrt_rational(8) == QSqrt2(0, 2)
    v = sqrt_rational(F(3))
    assert not is_exact(v)
    assert math.isclose(to_float(v), math.sqrt(3))


def test_immutable():
    with pytest.raises(AttributeError):
        QSqrt2(1).a = 2
