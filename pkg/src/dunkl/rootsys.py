"""Normalised root systems, reflections and Weyl chambers.

Every positive root is stored with squared length exactly 2, so that the
reflection through the hyperplane orthogonal to ``alpha`` reads
``x - <alpha, x> alpha``.  Coordinates are :class:`~dunkl.field.QSqrt2`
whenever the system admits it, floats otherwise (dihedral I2(m) with
``m`` not in {1, 2, 4}).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .field import QSqrt2

KINDS = ("rank1", "product_of_rank1", "A", "B", "D", "I2")

GROUP_CAP = 10_000


class RootSystemError(ValueError):
    pass


def as_multiplicity(v) -> Fraction:
    """Coerce a user multiplicity to an exact rational (floats via their repr)."""
    if isinstance(v, Fraction):
        q = v
    elif isinstance(v, int):
        q = Fraction(v)
    elif isinstance(v, float):
        q = Fraction(repr(v))
    elif isinstance(v, str):
        q = Fraction(v.strip())
    else:
        raise RootSystemError(f"bad multiplicity {v!r}")
    if q < 0:
        raise RootSystemError(f"negative multiplicity {q}")
    return q


@dataclass(frozen=True)
class RootSystem:
    """A positive subsystem together with a W-invariant multiplicity."""

    kind: str
    dim: int
    positive_roots: tuple[tuple, ...]
    multiplicity: tuple[Fraction, ...]
    orbit_classes: tuple[tuple[int, ...], ...]
    exact: bool = True
    label: str = ""
    _float_roots: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "_float_roots",
            np.array([[float(c) for c in a] for a in self.positive_roots], dtype=float).reshape(
                len(self.positive_roots), self.dim
            ),
        )

    # derived quantities -------------------------------------------------
    @property
    def n_roots(self) -> int:
        return len(self.positive_roots)

    @property
    def gamma(self) -> Fraction:
        """Index of the multiplicity: the sum of k over positive roots."""
        return sum(self.multiplicity, Fraction(0))

    @property
    def bessel_dimension(self) -> Fraction:
        """Dimension 2*gamma + d of the Bessel process |X|."""
        return 2 * self.gamma + self.dim

    @property
    def roots_array(self) -> np.ndarray:
        return self._float_roots

    @property
    def k_array(self) -> np.ndarray:
        return np.array([float(k) for k in self.multiplicity])

    @property
    def is_trivial(self) -> bool:
        return all(k == 0 for k in self.multiplicity)

    def with_multiplicities(self, values: Sequence) -> "RootSystem":
        return _assemble(self.kind, self.dim, self.positive_roots, values, self.exact, self.label)

    def __hash__(self):
        return hash((self.kind, self.dim, self.positive_roots, self.multiplicity))

    def __eq__(self, other):
        if not isinstance(other, RootSystem):
            return NotImplemented
        return (self.kind, self.dim, self.positive_roots, self.multiplicity) == (
            other.kind,
            other.dim,
            other.positive_roots,
            other.multiplicity,
        )

    def describe(self) -> str:
        ks = ",".join(str(k) for k in self.orbit_multiplicities())
        return f"{self.label}[k={ks}]"

    def orbit_multiplicities(self) -> tuple[Fraction, ...]:
        return tuple(self.multiplicity[c[0]] for c in self.orbit_classes)


# ---------------------------------------------------------------------------
# construction


def _unit(d: int, i: int, scale=1):
    return tuple(QSqrt2(scale) if j == i else QSqrt2(0) for j in range(d))


def _sqrt2_unit(d: int, i: int):
    return tuple(QSqrt2(0, 1) if j == i else QSqrt2(0) for j in range(d))


def _diff(d, i, j, sign=-1):
    v = [QSqrt2(0)] * d
    v[i] = QSqrt2(1)
    v[j] = QSqrt2(sign)
    return tuple(v)


# exact cos/sin of j*pi/4 in Q(sqrt2)
_H = QSqrt2(0, Fraction(1, 2))
_EIGHTHS = {
    0: (QSqrt2(1), QSqrt2(0)),
    1: (_H, _H),
    2: (QSqrt2(0), QSqrt2(1)),
    3: (-_H, _H),
}


def _dihedral_roots(m: int):
    """Positive roots at angles j*pi/m, j = 0..m-1, scaled to length sqrt2."""
    if 4 % m == 0:
        step = 4 // m
        roots = []
        for j in range(m):
            c, s = _EIGHTHS[j * step]
            roots.append((c * QSqrt2(0, 1), s * QSqrt2(0, 1)))
        return roots, True
    roots = []
    for j in range(m):
        th = j * math.pi / m
        roots.append((math.sqrt(2) * math.cos(th), math.sqrt(2) * math.sin(th)))
    return roots, False


def build(kind: str, dim: int | None = None, multiplicities: Sequence = (0,), n: int | None = None) -> RootSystem:
    """Construct a root system.

    ``kind`` is one of ``rank1``, ``product_of_rank1``, ``A``, ``B``, ``D``,
    ``I2``; the rank ``n`` of A/B/D and the order ``m`` of I2 may be given
    through ``n`` or embedded in the kind string (``"B2"``, ``"A(2)"``,
    ``"I2(5)"``).  ``multiplicities`` holds one value per W-orbit, orbits
    being ordered by their first positive root.

    A(n) lives in R^(n+1); B(n) and D(n) in R^n, with the long roots
    e_i -/+ e_j listed before the short ones sqrt2 e_i.
    """
    kind, n = _parse_kind(kind, n)
    if kind == "rank1":
        if dim not in (None, 1):
            raise RootSystemError("rank1 requires dim 1")
        dim = 1
        roots = [_sqrt2_unit(1, 0)]
        label = "rank1"
    elif kind == "product_of_rank1":
        if dim is None or dim < 1:
            raise RootSystemError("product_of_rank1 requires dim >= 1")
        roots = [_sqrt2_unit(dim, i) for i in range(dim)]
        label = f"product{dim}"
    elif kind == "A":
        n = n if n is not None else (dim - 1 if dim else None)
        if n is None or n < 1:
            raise RootSystemError("A(n) requires n >= 1")
        if dim not in (None, n + 1):
            raise RootSystemError(f"A({n}) lives in dimension {n + 1}, got {dim}")
        dim = n + 1
        roots = [_diff(dim, i, j) for i in range(dim) for j in range(i + 1, dim)]
        label = f"A{n}"
    elif kind in ("B", "D"):
        n = n if n is not None else dim
        if n is None or n < 1 or (kind == "D" and n < 2):
            raise RootSystemError(f"{kind}(n) requires a valid rank")
        if dim not in (None, n):
            raise RootSystemError(f"{kind}({n}) lives in dimension {n}, got {dim}")
        dim = n
        roots = []
        for i in range(dim):
            for j in range(i + 1, dim):
                roots.append(_diff(dim, i, j, -1))
                roots.append(_diff(dim, i, j, +1))
        if kind == "B":
            roots += [_sqrt2_unit(dim, i) for i in range(dim)]
        label = f"{kind}{n}"
    elif kind == "I2":
        if n is None or n < 1:
            raise RootSystemError("I2(m) requires m >= 1")
        if dim not in (None, 2):
            raise RootSystemError("I2(m) lives in dimension 2")
        dim = 2
        roots, exact = _dihedral_roots(n)
        return _assemble("I2", dim, tuple(roots), multiplicities, exact, f"I2({n})")
    else:
        raise RootSystemError(f"unknown root system kind {kind!r}")
    return _assemble(kind, dim, tuple(roots), multiplicities, True, label)


def _parse_kind(kind: str, n):
    k = kind.strip().replace("(", "").replace(")", "")
    if k in ("rank1", "product_of_rank1"):
        return k, n
    if k.startswith("I2"):
        rest = k[2:]
        return "I2", int(rest) if rest else n
    if k and k[0] in "ABD":
        rest = k[1:]
        return k[0], int(rest) if rest else n
    raise RootSystemError(f"unknown root system kind {kind!r}")


def _assemble(kind, dim, roots, multiplicities, exact, label) -> RootSystem:
    if not exact:
        roots = tuple(tuple(float(c) for c in a) for a in roots)
    classes = _orbit_classes(roots, exact)
    if isinstance(multiplicities, (int, float, Fraction, str)):
        multiplicities = (multiplicities,)
    values = [as_multiplicity(v) for v in multiplicities]
    if len(values) != len(classes):
        raise RootSystemError(
            f"{label}: {len(classes)} orbit(s) of roots but {len(values)} multiplicity value(s)"
        )
    k = [Fraction(0)] * len(roots)
    for cls, v in zip(classes, values):
        for i in cls:
            k[i] = v
    return RootSystem(kind, dim, tuple(roots), tuple(k), tuple(classes), exact, label)


def _dot(a, b):
    s = a[0] * b[0]
    for x, y in zip(a[1:], b[1:]):
        s = s + x * y
    return s


def _reflect_vec(alpha, x):
    p = _dot(alpha, x)
    return tuple(xi - p * ai for xi, ai in zip(x, alpha))


def _same(u, v, exact) -> bool:
    if exact:
        return tuple(u) == tuple(v)
    return bool(np.allclose(np.asarray(u, float), np.asarray(v, float), atol=1e-12))


def _root_index(roots, v, exact) -> tuple[int, int] | None:
    """(index, sign) with v = sign * roots[index], or None."""
    neg = tuple(-c for c in v)
    for i, a in enumerate(roots):
        if _same(a, v, exact):
            return i, 1
        if _same(a, neg, exact):
            return i, -1
    return None


def _orbit_classes(roots, exact) -> list[tuple[int, ...]]:
    parent = list(range(len(roots)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a in roots:
        for j, b in enumerate(roots):
            hit = _root_index(roots, _reflect_vec(a, b), exact)
            if hit is None:
                raise RootSystemError("positive roots are not closed under reflections")
            ra, rb = find(j), find(hit[0])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(len(roots)):
        groups.setdefault(find(i), []).append(i)
    return [tuple(g) for _, g in sorted(groups.items())]


# ---------------------------------------------------------------------------
# queries


def _coerce_vec(rs: RootSystem, x):
    x = tuple(x) if np.ndim(x) else (x,)
    if len(x) != rs.dim:
        raise RootSystemError(f"expected a vector of length {rs.dim}, got {len(x)}")
    if rs.exact and all(not isinstance(c, (float, np.floating)) for c in x):
        return tuple(QSqrt2.coerce(c) for c in x)
    return tuple(float(c) for c in x)


def pairing(rs: RootSystem, root_index: int, x):
    """<alpha, x>; exact when ``x`` has rational (or Q(sqrt2)) entries."""
    return _dot(rs.positive_roots[root_index], _coerce_vec(rs, x))


def reflect(rs: RootSystem, root_index: int, x):
    """sigma_alpha(x) = x - <alpha, x> alpha."""
    return _reflect_vec(rs.positive_roots[root_index], _coerce_vec(rs, x))


def is_root(rs: RootSystem, v) -> bool:
    return _root_index(rs.positive_roots, tuple(v), rs.exact) is not None


def chamber_project(rs: RootSystem, x):
    """The W-orbit representative of ``x`` in the closed fundamental chamber.

    Reflects in the first root with negative pairing until none remains; each
    step strictly increases <x, rho>, rho the half sum of positive roots, so
    the loop terminates without enumerating W.
    """
    x = _coerce_vec(rs, x)
    roots = rs.positive_roots
    for _ in range(100_000):
        for a in roots:
            p = _dot(a, x)
            if p < 0:
                x = tuple(xi - p * ai for xi, ai in zip(x, a))
                break
        else:
            return x
    raise RuntimeError("chamber projection did not terminate")


def chamber_project_array(rs: RootSystem, X: np.ndarray) -> np.ndarray:
    """Vectorised float version of :func:`chamber_project` on rows of ``X``."""
    X = np.array(X, dtype=float, copy=True).reshape(-1, rs.dim)
    A = rs.roots_array
    for _ in range(10_000):
        P = X @ A.T
        neg = P < 0
        rows = np.flatnonzero(neg.any(axis=1))
        if rows.size == 0:
            return X
        first = np.argmax(neg[rows], axis=1)
        X[rows] -= P[rows, first][:, None] * A[first]
    raise RuntimeError("chamber projection did not terminate")


def reflection_matrix(rs: RootSystem, root_index: int) -> np.ndarray:
    a = rs.roots_array[root_index]
    return np.eye(rs.dim) - np.outer(a, a)


def group_elements(rs: RootSystem, cap: int = GROUP_CAP) -> list[np.ndarray]:
    """All elements of W as float matrices, by breadth-first closure.

    Raises if |W| would exceed ``cap``.
    """
    gens = [reflection_matrix(rs, i) for i in range(rs.n_roots)]
    eye = np.eye(rs.dim)
    seen = {_mkey(eye): eye}
    queue = deque([eye])
    while queue:
        g = queue.popleft()
        for s in gens:
            h = s @ g
            key = _mkey(h)
            if key not in seen:
                seen[key] = h
                if len(seen) > cap:
                    raise RootSystemError(f"Weyl group larger than cap {cap}")
                queue.append(h)
    return list(seen.values())


def _mkey(m: np.ndarray):
    return tuple(np.round(m, 9).ravel().tolist())


def random_word_action(rs: RootSystem, x, word: Sequence[int]):
    for i in word:
        x = reflect(rs, i, x)
    return x
