"""Exact arithmetic in the quadratic field Q(sqrt 2).

Roots normalised to squared length 2 put sqrt(2) into pairings such as
<sqrt2, x>, so every symbolic quantity in this package lives in Q(sqrt 2).
Mixing a :class:`QSqrt2` with a Python float degrades to float.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

SQRT2 = math.sqrt(2.0)


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"cannot coerce {v!r} to an exact rational")


class QSqrt2:
    """The number ``a + b*sqrt(2)`` with rational ``a`` and ``b``."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        object.__setattr__(self, "a", _frac(a))
        object.__setattr__(self, "b", _frac(b))

    def __setattr__(self, name, value):
        raise AttributeError("QSqrt2 is immutable")

    @classmethod
    def sqrt2(cls) -> "QSqrt2":
        return cls(0, 1)

    # --- coercion -------------------------------------------------------
    @staticmethod
    def coerce(v):
        """Return ``v`` as a QSqrt2 when exact, or as a float otherwise."""
        if isinstance(v, QSqrt2):
            return v
        if isinstance(v, bool):
            return QSqrt2(int(v))
        if isinstance(v, (int, Fraction)):
            return QSqrt2(v)
        if isinstance(v, float):
            return v
        if isinstance(v, Rational):
            return QSqrt2(Fraction(v))
        raise TypeError(f"unsupported scalar {v!r}")

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * SQRT2

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    # --- arithmetic -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, float):
            return float(self) + other
        other = QSqrt2.coerce(other)
        return QSqrt2(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __neg__(self):
        return QSqrt2(-self.a, -self.b)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, float):
            return float(self) - other
        other = QSqrt2.coerce(other)
        return QSqrt2(self.a - other.a, self.b - other.b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, float):
            return float(self) * other
        other = QSqrt2.coerce(other)
        return QSqrt2(
            self.a * other.a + 2 * self.b * other.b,
            self.a * other.b + self.b * other.a,
        )

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        """Field norm a^2 - 2 b^2 (zero only for the zero element)."""
        return self.a * self.a - 2 * self.b * self.b

    def conjugate(self) -> "QSqrt2":
        return QSqrt2(self.a, -self.b)

    def inverse(self) -> "QSqrt2":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt2)")
        return QSqrt2(self.a / n, -self.b / n)

    def __truediv__(self, other):
        if isinstance(other, float):
            return float(self) / other
        return self * QSqrt2.coerce(other).inverse()

    def __rtruediv__(self, other):
        if isinstance(other, float):
            return other / float(self)
        return QSqrt2.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return float(self) ** n
        if n < 0:
            return self.inverse() ** (-n)
        out = QSqrt2(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # --- comparison -----------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, float):
            return float(self) == other
        try:
            other = QSqrt2.coerce(other)
        except TypeError:
            return NotImplemented
        return self.a == other.a and self.b == other.b

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def sign(self) -> int:
        """Exact sign of a + b sqrt2."""
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sa == 0:
            return sb
        if sb == 0 or sa == sb:
            return sa
        # opposite signs: compare a^2 with 2 b^2
        return sa if self.a * self.a > 2 * self.b * self.b else -sa

    def __lt__(self, other):
        if isinstance(other, float):
            return float(self) < other
        return (self - other).sign() < 0

    def __le__(self, other):
        if isinstance(other, float):
            return float(self) <= other
        return (self - other).sign() <= 0

    def __gt__(self, other):
        if isinstance(other, float):
            return float(self) > other
        return (self - other).sign() > 0

    def __ge__(self, other):
        if isinstance(other, float):
            return float(self) >= other
        return (self - other).sign() >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # --- text -------------------------------------------------------------
    def canonical(self) -> str:
        """Fixture text form ``a+b*sqrt2`` (always both parts)."""
        b = self.b
        sep = "-" if b < 0 else "+"
        return f"{self.a}{sep}{abs(b)}*sqrt2"

    def __repr__(self):
        return f"QSqrt2({self.canonical()})"

    __str__ = canonical


def sqrt_rational(q) -> QSqrt2 | float:
    """Square root of a nonnegative rational, exactly when it lies in Q(sqrt2).

    sqrt(q) is in the field iff q or 2q is a rational square; otherwise the
    float root is returned.
    """
    q = _frac(q)
    if q < 0:
        raise ValueError("negative argument")
    r = _rational_sqrt(q)
    if r is not None:
        return QSqrt2(r)
    r = _rational_sqrt(2 * q)
    if r is not None:
        return QSqrt2(0, r / 2)
    return math.sqrt(q)


def _rational_sqrt(q: Fraction) -> Fraction | None:
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def to_float(v) -> float:
    return float(v)


def is_exact(v) -> bool:
    return isinstance(v, (QSqrt2, int, Fraction))
