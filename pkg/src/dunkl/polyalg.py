"""Exact multivariate polynomials and the Dunkl differential-difference calculus.

A :class:`Polynomial` has ``dim`` space variables ``x1..xd`` followed by
``ntime`` auxiliary variables (``t`` when there is one, ``u1..un``
otherwise).  Dunkl operators act on the space variables only.
Coefficients are :class:`~dunkl.field.QSqrt2` in exact mode; a single float
coefficient switches the polynomial to float mode.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .field import QSqrt2
from .rootsys import RootSystem

FLOAT_ZERO_RTOL = 1e-12


class InexactDivision(ArithmeticError):
    """A polynomial that should vanish on a hyperplane did not."""


def _coerce(c):
    if isinstance(c, (np.floating,)):
        return float(c)
    if isinstance(c, np.integer):
        return QSqrt2(int(c))
    return QSqrt2.coerce(c)


def _is_zero(c) -> bool:
    return c == 0 if isinstance(c, QSqrt2) else c == 0.0


class Polynomial:
    """Immutable polynomial with exact or float coefficients."""

    __slots__ = ("dim", "ntime", "terms", "_hash")

    def __init__(self, dim: int, terms: Mapping[tuple, object] | None = None, ntime: int = 0):
        self.dim = dim
        self.ntime = ntime
        nv = dim + ntime
        clean: dict[tuple, object] = {}
        floaty = False
        for e, c in (terms or {}).items():
            if len(e) != nv:
                raise ValueError(f"exponent {e} does not match {nv} variables")
            c = _coerce(c)
            if isinstance(c, float):
                floaty = True
            if not _is_zero(c):
                clean[tuple(e)] = c
        if floaty:
            clean = {e: float(c) for e, c in clean.items()}
            if clean:
                scale = max(abs(c) for c in clean.values())
                clean = {e: c for e, c in clean.items() if abs(c) > FLOAT_ZERO_RTOL * scale}
        self.terms = clean
        self._hash = None

    # --- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, dim, ntime=0):
        return cls(dim, {}, ntime)

    @classmethod
    def constant(cls, c, dim, ntime=0):
        return cls(dim, {(0,) * (dim + ntime): c}, ntime)

    @classmethod
    def var(cls, i: int, dim: int, ntime: int = 0):
        """The i-th variable (0-based; indices >= dim are auxiliary)."""
        e = [0] * (dim + ntime)
        e[i] = 1
        return cls(dim, {tuple(e): 1}, ntime)

    @classmethod
    def monomial(cls, nu: Sequence[int], dim: int, ntime: int = 0, coeff=1, time_exps: Sequence[int] = ()):
        e = list(nu) + list(time_exps) + [0] * (ntime - len(time_exps))
        return cls(dim, {tuple(e): coeff}, ntime)

    @classmethod
    def linear_form(cls, a: Sequence, ntime: int = 0):
        dim = len(a)
        terms = {}
        for i, ai in enumerate(a):
            e = [0] * (dim + ntime)
            e[i] = 1
            terms[tuple(e)] = ai
        return cls(dim, terms, ntime)

    # --- basic properties ---------------------------------------------------
    @property
    def is_float(self) -> bool:
        return any(isinstance(c, float) for c in self.terms.values())

    @property
    def is_exact(self) -> bool:
        return not self.is_float

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def space_degree(self) -> int:
        """Maximal total degree in the space variables (-1 for zero)."""
        return max((sum(e[: self.dim]) for e in self.terms), default=-1)

    degree = space_degree

    def time_degree(self) -> int:
        return max((sum(e[self.dim :]) for e in self.terms), default=-1)

    def is_homogeneous(self, n: int | None = None) -> bool:
        degs = {sum(e[: self.dim]) for e in self.terms}
        if not degs:
            return True
        return len(degs) == 1 and (n is None or degs == {n})

    def homogeneous_part(self, n: int) -> "Polynomial":
        return Polynomial(self.dim, {e: c for e, c in self.terms.items() if sum(e[: self.dim]) == n}, self.ntime)

    def coefficient(self, e: Sequence[int]):
        return self.terms.get(tuple(e), QSqrt2(0) if not self.is_float else 0.0)

    def _compat(self, other: "Polynomial"):
        if self.dim != other.dim or self.ntime != other.ntime:
            raise ValueError(
                f"incompatible polynomials: ({self.dim},{self.ntime}) vs ({other.dim},{other.ntime})"
            )

    # --- arithmetic -------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Polynomial):
            self._compat(other)
            return other
        return Polynomial.constant(other, self.dim, self.ntime)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out[e] + c if e in out else c
        return Polynomial(self.dim, out, self.ntime)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {e: -c for e, c in self.terms.items()}, self.ntime)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _coerce(other)
            return Polynomial(self.dim, {e: v * c for e, v in self.terms.items()}, self.ntime)
        self._compat(other)
        out: dict[tuple, object] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = c1 * c2
                out[e] = out[e] + v if e in out else v
        return Polynomial(self.dim, out, self.ntime)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            raise TypeError("use divide_linear for polynomial division")
        c = _coerce(other)
        return self * (1.0 / c if isinstance(c, float) else c.inverse())

    def __pow__(self, n: int):
        out = Polynomial.constant(1, self.dim, self.ntime)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.dim == other.dim and self.ntime == other.ntime and self.terms == other.terms
        try:
            return self == self._lift(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.dim, self.ntime, frozenset(self.terms.items())))
        return self._hash

    def to_float(self) -> "Polynomial":
        return Polynomial(self.dim, {e: float(c) for e, c in self.terms.items()}, self.ntime)

    def max_abs_coefficient(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    def almost_equal(self, other: "Polynomial", tol: float = 1e-10) -> bool:
        d = self - other
        scale = max(self.max_abs_coefficient(), other.max_abs_coefficient(), 1.0)
        return d.max_abs_coefficient() <= tol * scale

    # --- calculus -----------------------------------------------------------
    def diff(self, var: int) -> "Polynomial":
        out = {}
        for e, c in self.terms.items():
            p = e[var]
            if p:
                f = list(e)
                f[var] -= 1
                out[tuple(f)] = c * p
        return Polynomial(self.dim, out, self.ntime)

    def integrate(self, var: int) -> "Polynomial":
        """Antiderivative in ``var`` vanishing at 0."""
        out = {}
        for e, c in self.terms.items():
            f = list(e)
            f[var] += 1
            out[tuple(f)] = c * Fraction(1, f[var]) if not isinstance(c, float) else c / f[var]
        return Polynomial(self.dim, out, self.ntime)

    def laplacian(self) -> "Polynomial":
        out = Polynomial.zero(self.dim, self.ntime)
        for i in range(self.dim):
            out = out + self.diff(i).diff(i)
        return out

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(self.dim)]

    # --- substitution -------------------------------------------------------
    def substitute(self, var: int, value) -> "Polynomial":
        """Replace variable ``var`` by a scalar or a compatible polynomial."""
        if not isinstance(value, Polynomial):
            value = Polynomial.constant(value, self.dim, self.ntime)
        self._compat(value)
        by_power: dict[int, dict[tuple, object]] = {}
        for e, c in self.terms.items():
            f = list(e)
            p = f[var]
            f[var] = 0
            by_power.setdefault(p, {})[tuple(f)] = c
        out = Polynomial.zero(self.dim, self.ntime)
        powers = {0: Polynomial.constant(1, self.dim, self.ntime)}
        for p in sorted(by_power):
            while max(powers) < p:
                m = max(powers)
                powers[m + 1] = powers[m] * value
            out = out + Polynomial(self.dim, by_power[p], self.ntime) * powers[p]
        return out

    def compose_linear(self, matrix: Sequence[Sequence]) -> "Polynomial":
        """p(S x) for a d x d matrix S acting on the space variables."""
        S = tuple(tuple(_coerce(c) for c in row) for row in matrix)
        out: dict[tuple, object] = {}
        for e, c in self.terms.items():
            nu, tail = e[: self.dim], e[self.dim :]
            for g, v in _linear_image(S, nu).items():
                key = g + tail
                w = v * c
                out[key] = out[key] + w if key in out else w
        return Polynomial(self.dim, out, self.ntime)

    def with_time_vars(self, ntime: int, mapping: Sequence[int] | None = None) -> "Polynomial":
        """Re-embed into ``ntime`` auxiliary variables; old var j goes to mapping[j]."""
        mapping = list(mapping) if mapping is not None else list(range(self.ntime))
        if len(mapping) != self.ntime:
            raise ValueError("mapping must cover every auxiliary variable")
        out: dict[tuple, object] = {}
        for e, c in self.terms.items():
            f = list(e[: self.dim]) + [0] * ntime
            for j, p in enumerate(e[self.dim :]):
                if p:
                    f[self.dim + mapping[j]] += p
            key = tuple(f)
            out[key] = out[key] + c if key in out else c
        return Polynomial(self.dim, out, ntime)

    def split_by_time(self) -> dict[tuple, "Polynomial"]:
        """Group terms by auxiliary exponents: {time_exps: space polynomial}."""
        groups: dict[tuple, dict] = {}
        for e, c in self.terms.items():
            groups.setdefault(e[self.dim :], {})[e[: self.dim]] = c
        return {k: Polynomial(self.dim, v) for k, v in groups.items()}

    @classmethod
    def from_time_groups(cls, dim: int, ntime: int, groups: Mapping[tuple, "Polynomial"]) -> "Polynomial":
        out: dict[tuple, object] = {}
        for tail, p in groups.items():
            for e, c in p.terms.items():
                key = tuple(e[:dim]) + tuple(tail)
                out[key] = out[key] + c if key in out else c
        return cls(dim, out, ntime)

    # --- evaluation ---------------------------------------------------------
    def eval(self, x, t=None):
        """Evaluate at a point; exact on rational or Q(sqrt2) inputs.

        ``t`` is a scalar (one auxiliary variable) or a sequence.
        """
        x = [x] if np.ndim(x) == 0 else list(x)
        if len(x) != self.dim:
            raise ValueError(f"expected {self.dim} space coordinates, got {len(x)}")
        if self.ntime:
            if t is None:
                raise ValueError("auxiliary variable values required")
            ts = [t] if np.ndim(t) == 0 else list(t)
            if len(ts) != self.ntime:
                raise ValueError(f"expected {self.ntime} auxiliary values, got {len(ts)}")
        else:
            ts = []
        vals = [_scalar(v) for v in x + ts]
        nv = len(vals)
        # Horner in the last variable over groups keyed by the leading exponents.
        return _horner(self.terms, vals, nv) if self.terms else (QSqrt2(0) if not _any_float(vals) else 0.0)

    def __call__(self, x, t=None):
        return self.eval(x, t)

    def evaluate(self, X: np.ndarray, T=None) -> np.ndarray:
        """Float evaluation at the rows of ``X`` (shape (n, d)); ``T`` (n,) or (n, ntime)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim)
        n = X.shape[0]
        cols = [X[:, i] for i in range(self.dim)]
        if self.ntime:
            T = np.asarray(T, dtype=float)
            if T.ndim == 0:
                T = np.full((n, self.ntime), float(T))
            T = T.reshape(n, self.ntime) if T.ndim == 1 and self.ntime == 1 else T
            cols += [T[:, j] for j in range(self.ntime)]
        out = np.zeros(n)
        cache: dict[tuple[int, int], np.ndarray] = {}
        for e, c in self.terms.items():
            term = np.full(n, float(c))
            for v, p in enumerate(e):
                if p:
                    key = (v, p)
                    if key not in cache:
                        cache[key] = cols[v] ** p
                    term = term * cache[key]
            out += term
        return out

    # --- text ---------------------------------------------------------------
    def var_names(self) -> list[str]:
        names = [f"x{i + 1}" for i in range(self.dim)]
        if self.ntime == 1:
            names.append("t")
        else:
            names += [f"u{j + 1}" for j in range(self.ntime)]
        return names

    def sorted_terms(self) -> list[tuple[tuple, object]]:
        """Terms in graded-lexicographic order (highest first)."""
        return sorted(self.terms.items(), key=lambda ec: (-sum(ec[0]), tuple(-p for p in ec[0])))

    def canonical(self, names: Sequence[str] | None = None) -> str:
        """Byte-stable text form, e.g. ``(3+0*sqrt2)*x1^2*x2 + (-1+0*sqrt2)*t``."""
        if not self.terms:
            return "0"
        names = list(names) if names is not None else self.var_names()
        parts = []
        for e, c in self.sorted_terms():
            coeff = c.canonical() if isinstance(c, QSqrt2) else repr(float(c))
            factors = [f"({coeff})"]
            for name, p in zip(names, e):
                if p == 1:
                    factors.append(name)
                elif p > 1:
                    factors.append(f"{name}^{p}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __repr__(self):
        return f"Polynomial({self.canonical()})"

    def __str__(self):
        return self.canonical()

    @classmethod
    def parse(cls, text: str, dim: int, ntime: int = 0) -> "Polynomial":
        """Inverse of :meth:`canonical`."""
        text = text.strip()
        if text == "0":
            return cls.zero(dim, ntime)
        proto = cls.zero(dim, ntime)
        index = {name: i for i, name in enumerate(proto.var_names())}
        terms: dict[tuple, object] = {}
        for chunk in _split_terms(text):
            m = re.fullmatch(r"\(([^()]*)\)((?:\*[A-Za-z]\w*(?:\^\d+)?)*)", chunk.strip())
            if not m:
                raise ValueError(f"cannot parse term {chunk!r}")
            coeff = _parse_coeff(m.group(1))
            e = [0] * (dim + ntime)
            for f in filter(None, m.group(2).split("*")):
                name, _, p = f.partition("^")
                e[index[name]] += int(p) if p else 1
            terms[tuple(e)] = coeff
        return cls(dim, terms, ntime)


def _split_terms(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if depth == 0 and text.startswith(" + ", i):
            out.append("".join(cur))
            cur = []
            i += 3
            continue
        cur.append(ch)
        i += 1
    out.append("".join(cur))
    return out


def _parse_coeff(s: str):
    m = re.fullmatch(r"(-?[\d/]+)([+-])([\d/]+)\*sqrt2", s)
    if m:
        b = Fraction(m.group(3))
        return QSqrt2(Fraction(m.group(1)), b if m.group(2) == "+" else -b)
    return float(s)


def _scalar(v):
    if isinstance(v, (float, np.floating)):
        return float(v)
    return QSqrt2.coerce(v)


def _any_float(vals) -> bool:
    return any(isinstance(v, float) for v in vals)


def _horner(terms: Mapping[tuple, object], vals: list, nv: int):
    # nested Horner: peel the first variable, recurse on the rest
    if nv == 0:
        return next(iter(terms.values()))
    groups: dict[int, dict[tuple, object]] = {}
    for e, c in terms.items():
        groups.setdefault(e[0], {})[e[1:]] = c
    x = vals[0]
    acc = None
    for p in range(max(groups), -1, -1):
        inner = _horner(groups[p], vals[1:], nv - 1) if p in groups else 0
        acc = inner if acc is None else acc * x + inner
    return acc


@lru_cache(maxsize=200_000)
def _linear_image(S: tuple, nu: tuple) -> dict[tuple, object]:
    """Expansion of prod_j (sum_l S[j][l] x_l)^nu_j as {exps: coeff}."""
    d = len(nu)
    if sum(nu) == 0:
        return {(0,) * d: QSqrt2(1)}
    j = next(i for i, p in enumerate(nu) if p)
    rest = list(nu)
    rest[j] -= 1
    base = _linear_image(S, tuple(rest))
    out: dict[tuple, object] = {}
    for l, s in enumerate(S[j]):
        if s == 0:
            continue
        for e, c in base.items():
            f = list(e)
            f[l] += 1
            key = tuple(f)
            v = c * s
            out[key] = out[key] + v if key in out else v
    return {e: c for e, c in out.items() if not _is_zero(c)}


# ---------------------------------------------------------------------------
# division by a linear form


def divide_linear(p: Polynomial, a: Sequence) -> Polynomial:
    """Exact quotient of ``p`` by the linear form <a, x>.

    Term-wise elimination of a pivot variable, highest power first; a
    nonzero remainder raises :class:`InexactDivision`.
    """
    a = [_coerce(c) for c in a]
    if len(a) != p.dim:
        raise ValueError("linear form dimension mismatch")
    nz = [i for i, c in enumerate(a) if not _is_zero(c)]
    if not nz:
        raise ZeroDivisionError("zero linear form")
    j = nz[-1]
    inv = 1.0 / a[j] if isinstance(a[j], float) else a[j].inverse()
    buckets: dict[int, dict[tuple, object]] = {}
    for e, c in p.terms.items():
        buckets.setdefault(e[j], {})[e] = c
    quot: dict[tuple, object] = {}
    top = max(buckets, default=0)
    for m in range(top, 0, -1):
        for e, c in list(buckets.get(m, {}).items()):
            if _is_zero(c):
                continue
            q = c * inv
            qe = list(e)
            qe[j] -= 1
            qe = tuple(qe)
            quot[qe] = quot[qe] + q if qe in quot else q
            for l in nz:
                if l == j:
                    continue
                f = list(qe)
                f[l] += 1
                f = tuple(f)
                b = buckets.setdefault(m - 1, {})
                w = -(q * a[l])
                b[f] = b[f] + w if f in b else w
        buckets.pop(m, None)
    remainder = Polynomial(p.dim, buckets.get(0, {}), p.ntime)
    if remainder:
        if remainder.is_float:
            scale = max(p.max_abs_coefficient(), 1.0)
            if remainder.max_abs_coefficient() <= 1e-9 * scale:
                return Polynomial(p.dim, quot, p.ntime)
        raise InexactDivision(f"nonzero remainder {remainder.canonical()} dividing by {a}")
    return Polynomial(p.dim, quot, p.ntime)


# ---------------------------------------------------------------------------
# Dunkl calculus


def reflection_matrix_exact(rs: RootSystem, root_index: int) -> tuple:
    a = rs.positive_roots[root_index]
    d = rs.dim
    return tuple(tuple((1 if i == j else 0) - a[i] * a[j] for j in range(d)) for i in range(d))


def reflect_poly(rs: RootSystem, root_index: int, p: Polynomial) -> Polynomial:
    """p composed with sigma_alpha on the space variables."""
    return p.compose_linear(reflection_matrix_exact(rs, root_index))


def divided_difference(rs: RootSystem, root_index: int, p: Polynomial) -> Polynomial:
    """(p - p o sigma_alpha) / <alpha, x>, exactly."""
    return divide_linear(p - reflect_poly(rs, root_index, p), rs.positive_roots[root_index])


def dunkl_T(rs: RootSystem, i: int, p: Polynomial) -> Polynomial:
    """Dunkl operator in direction ``i`` (0-based)."""
    _check_dim(rs, p)
    out = p.diff(i)
    for idx, (alpha, k) in enumerate(zip(rs.positive_roots, rs.multiplicity)):
        if k == 0 or _is_zero(_coerce(alpha[i])):
            continue
        out = out + divided_difference(rs, idx, p) * (alpha[i] * k)
    return out


def dunkl_L(rs: RootSystem, p: Polynomial) -> Polynomial:
    """L_k p = sum_i T_i(T_i p); the process generator is half of this."""
    out = Polynomial.zero(p.dim, p.ntime)
    for i in range(rs.dim):
        out = out + dunkl_T(rs, i, dunkl_T(rs, i, p))
    return out


def dunkl_L_closed(rs: RootSystem, p: Polynomial) -> Polynomial:
    """L_k p from the explicit generator: Laplacian plus drift and jump terms.

    Per root the bracket <grad p, alpha>/<alpha,x> + (p o sigma - p)/<alpha,x>^2
    is assembled over the common denominator <alpha,x>^2 and divided twice.
    """
    _check_dim(rs, p)
    out = p.laplacian()
    grad = p.gradient()
    for idx, (alpha, k) in enumerate(zip(rs.positive_roots, rs.multiplicity)):
        if k == 0:
            continue
        ell = Polynomial.linear_form(alpha, p.ntime)
        directional = Polynomial.zero(p.dim, p.ntime)
        for gi, ai in zip(grad, alpha):
            directional = directional + gi * ai
        numerator = ell * directional + reflect_poly(rs, idx, p) - p
        bracket = divide_linear(divide_linear(numerator, alpha), alpha)
        out = out + bracket * (2 * k)
    return out


def generator(rs: RootSystem, p: Polynomial) -> Polynomial:
    """Half of L_k: the infinitesimal generator of the Dunkl process."""
    return dunkl_L(rs, p) * Fraction(1, 2)


def _check_dim(rs: RootSystem, p: Polynomial):
    if p.dim != rs.dim:
        raise ValueError(f"polynomial in {p.dim} variables, root system in dimension {rs.dim}")


def eval_poly(p: Polynomial, x, t=None):
    return p.eval(x, t)


def monomials_of_degree(d: int, n: int) -> list[tuple[int, ...]]:
    """Exponent tuples of total degree n in d variables, graded-lex descending."""
    if d == 1:
        return [(n,)]
    out = []
    for first in range(n, -1, -1):
        for rest in monomials_of_degree(d - 1, n - first):
            out.append((first,) + rest)
    return out


def square_norm(dim: int, ntime: int = 0) -> Polynomial:
    out = Polynomial.zero(dim, ntime)
    for i in range(dim):
        out = out + Polynomial.var(i, dim, ntime) ** 2
    return out


def random_polynomial(rng: np.random.Generator, dim: int, max_degree: int, n_terms: int = 6, homogeneous: int | None = None) -> Polynomial:
    """Random polynomial with small rational coefficients, for property tests."""
    terms = {}
    for _ in range(n_terms):
        deg = homogeneous if homogeneous is not None else int(rng.integers(0, max_degree + 1))
        cuts = sorted(rng.integers(0, deg + 1, size=dim - 1).tolist())
        parts = [b - a for a, b in zip([0] + cuts, cuts + [deg])]
        num = int(rng.integers(-9, 10))
        den = int(rng.integers(1, 5))
        terms[tuple(parts)] = Fraction(num, den)
    return Polynomial(dim, terms)


def iter_terms(p: Polynomial) -> Iterable[tuple[tuple, object]]:
    return iter(p.sorted_terms())
