"""Intertwining operator, generalized monomials, Dunkl kernel and Dunkl-Hermite polynomials.

V_k is computed degree by degree from T_i(V_k x^nu) = nu_i V_k x^(nu - e_i):
each degree gives an overdetermined linear system for the coefficients of
m_nu = V_k(x^nu), solved by exact Gaussian elimination (or least squares in
float mode) with the unused rows checked for consistency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import gammainc

from .field import QSqrt2, sqrt_rational
from .polyalg import (
    Polynomial,
    divided_difference,
    dunkl_L,
    dunkl_T,
    monomials_of_degree,
)
from .rootsys import RootSystem

DEFAULT_NMAX = 8


class IntertwineError(ArithmeticError):
    """Singular or inconsistent intertwining system (never expected for k >= 0)."""


class KernelTruncationError(ValueError):
    """The kernel series needs more degrees than the table holds."""


# ---------------------------------------------------------------------------
# linear algebra over Q(sqrt2) or floats


def _is_zero(c) -> bool:
    return c == 0


def solve_exact(A: list[list], B: list[list]) -> list[list]:
    """Solve A X = B for an overdetermined, consistent, full-column-rank A.

    Works with any field elements supporting + - * and inverse().
    """
    m = len(A)
    n = len(A[0]) if m else 0
    r = len(B[0]) if B else 0
    M = [list(A[i]) + list(B[i]) for i in range(m)]
    row = 0
    pivots = []
    for col in range(n):
        piv = next((i for i in range(row, m) if not _is_zero(M[i][col])), None)
        if piv is None:
            raise IntertwineError(f"rank deficient at column {col}")
        M[row], M[piv] = M[piv], M[row]
        inv = M[row][col].inverse()
        M[row] = [v * inv for v in M[row]]
        for i in range(m):
            if i != row and not _is_zero(M[i][col]):
                f = M[i][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[row])]
        pivots.append(col)
        row += 1
    for i in range(row, m):
        if any(not _is_zero(v) for v in M[i][n:]):
            raise IntertwineError("inconsistent intertwining system")
    return [M[i][n : n + r] for i in range(n)]


def _solve_float(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    X, _, rank, _ = np.linalg.lstsq(A, B, rcond=None)
    if rank < A.shape[1]:
        raise IntertwineError("rank deficient intertwining system")
    resid = np.abs(A @ X - B).max() if B.size else 0.0
    if resid > 1e-8 * max(1.0, np.abs(B).max()):
        raise IntertwineError(f"inconsistent intertwining system (residual {resid:.2e})")
    return X


# ---------------------------------------------------------------------------


@dataclass
class IntertwineTable:
    """Degree-wise matrices of V_k and the generalized monomials up to ``n_max``."""

    rs: RootSystem
    n_max: int
    exact: bool
    basis: dict[int, list[tuple]] = field(default_factory=dict)
    matrices: dict[int, list[list]] = field(default_factory=dict)
    monomials: dict[tuple, Polynomial] = field(default_factory=dict)
    _inverse: dict[int, object] = field(default_factory=dict, repr=False)
    _kernel_cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.rs.dim

    def m(self, nu: Sequence[int]) -> Polynomial:
        """The generalized monomial m_nu = V_k(x^nu)."""
        nu = tuple(nu)
        if sum(nu) > self.n_max:
            raise KernelTruncationError(f"|nu| = {sum(nu)} exceeds n_max = {self.n_max}")
        return self.monomials[nu]

    def apply(self, p: Polynomial) -> Polynomial:
        """V_k p for a space polynomial (auxiliary variables are carried along)."""
        if p.ntime:
            groups = {tail: self.apply(q) for tail, q in p.split_by_time().items()}
            return Polynomial.from_time_groups(p.dim, p.ntime, groups)
        out = Polynomial.zero(p.dim)
        for e, c in p.terms.items():
            out = out + self.m(e) * c
        return out

    def degree_matrix(self, n: int) -> list[list]:
        """Column j holds the coefficients of m_(basis[n][j]) in the monomial basis."""
        return self.matrices[n]

    def to_generalized(self, p: Polynomial) -> dict[tuple, object]:
        """Coefficients c with p = sum_nu c_nu m_nu (space polynomial)."""
        if p.ntime:
            raise ValueError("to_generalized expects a pure space polynomial")
        out: dict[tuple, object] = {}
        for n in range(p.space_degree() + 1):
            part = p.homogeneous_part(n)
            if not part:
                continue
            if n > self.n_max:
                raise KernelTruncationError(f"degree {n} exceeds n_max = {self.n_max}")
            basis = self.basis[n]
            coords = [part.coefficient(mu) for mu in basis]
            inv = self._inverse_matrix(n)
            if self.exact and not part.is_float:
                sol = [sum((inv[i][j] * coords[j] for j in range(len(basis))), QSqrt2(0)) for i in range(len(basis))]
            else:
                sol = (np.asarray(inv, dtype=float) @ np.array([float(c) for c in coords])).tolist()
            for nu, c in zip(basis, sol):
                if c != 0:
                    out[nu] = c
        return out

    def _inverse_matrix(self, n: int):
        if n not in self._inverse:
            V = self.matrices[n]
            size = len(V)
            if self.exact:
                eye = [[QSqrt2(1 if i == j else 0) for j in range(size)] for i in range(size)]
                self._inverse[n] = solve_exact(V, eye)
            else:
                self._inverse[n] = np.linalg.inv(np.asarray(V, dtype=float))
        return self._inverse[n]

    def is_invertible(self, n: int) -> bool:
        try:
            self._inverse_matrix(n)
        except (IntertwineError, np.linalg.LinAlgError):
            return False
        return True

    # -- kernel ----------------------------------------------------------------
    def _kernel_coefficients(self, x: tuple, n: int) -> list[tuple[list[tuple], np.ndarray]]:
        """Per degree j <= n: (basis, m_nu(x)/nu!) as floats."""
        key = (tuple(float(v) for v in x), n)
        if key not in self._kernel_cache:
            xs = np.asarray(key[0], dtype=float).reshape(1, -1)
            out = []
            for j in range(n + 1):
                basis = self.basis[j]
                vals = np.array(
                    [self.monomials[nu].to_float().evaluate(xs)[0] / _multifactorial(nu) for nu in basis]
                )
                out.append((basis, vals))
            if len(self._kernel_cache) > 64:
                self._kernel_cache.clear()
            self._kernel_cache[key] = out
        return self._kernel_cache[key]


def _multifactorial(nu) -> float:
    return float(math.prod(math.factorial(v) for v in nu))


def build_intertwine(rs: RootSystem, n_max: int = DEFAULT_NMAX, exact: bool | None = None) -> IntertwineTable:
    """Solve for V_k on every homogeneous degree up to ``n_max``."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    exact = rs.exact if exact is None else (exact and rs.exact)
    d = rs.dim
    table = IntertwineTable(rs, n_max, exact)
    zero = (0,) * d
    one = Polynomial.constant(1, d)
    table.basis[0] = [zero]
    table.matrices[0] = [[QSqrt2(1) if exact else 1.0]]
    table.monomials[zero] = one if exact else one.to_float()
    for n in range(1, n_max + 1):
        basis = monomials_of_degree(d, n)
        lower = table.basis[n - 1]
        lower_index = {mu: r for r, mu in enumerate(lower)}
        nrow = d * len(lower)
        # columns: T_i(x^mu) in the degree n-1 basis, stacked over i
        cols = []
        for mu in basis:
            mono = Polynomial.monomial(mu, d)
            if not exact:
                mono = mono.to_float()
            col = [0] * nrow
            for i in range(d):
                for e, c in dunkl_T(rs, i, mono).terms.items():
                    col[i * len(lower) + lower_index[e]] = c
            cols.append(col)
        rhs = []
        for nu in basis:
            col = [0] * nrow
            for i in range(d):
                if nu[i] == 0:
                    continue
                down = list(nu)
                down[i] -= 1
                for e, c in table.monomials[tuple(down)].terms.items():
                    col[i * len(lower) + lower_index[e]] = c * nu[i]
            rhs.append(col)
        if exact:
            A = [[QSqrt2.coerce(cols[j][r]) for j in range(len(basis))] for r in range(nrow)]
            B = [[QSqrt2.coerce(rhs[j][r]) for j in range(len(basis))] for r in range(nrow)]
            X = solve_exact(A, B)
        else:
            A = np.array([[float(cols[j][r]) for j in range(len(basis))] for r in range(nrow)])
            B = np.array([[float(rhs[j][r]) for j in range(len(basis))] for r in range(nrow)])
            X = _solve_float(A, B).tolist()
        table.basis[n] = basis
        table.matrices[n] = X
        for j, nu in enumerate(basis):
            table.monomials[nu] = Polynomial(d, {mu: X[r][j] for r, mu in enumerate(basis)})
    return table


# ---------------------------------------------------------------------------
# Dunkl kernel


def kernel_degree(a: float, tol: float) -> int:
    """Smallest n with sum_{j>n} a^j/j! < tol."""
    if a == 0:
        return 0
    n = 0
    # tail = e^a * P(n+1, a) with P the regularized lower incomplete gamma
    while math.exp(a) * gammainc(n + 1, a) >= tol:
        n += 1
        if n > 10_000:
            raise KernelTruncationError("kernel series does not converge numerically")
    return n


def dunkl_kernel(table: IntertwineTable, x, y, tol: float = 1e-10) -> float:
    """D_k(x, y) by its power series, truncated with the tail bound (|x||y|)^j/j!.

    The bound holds because the degree-j part is V_k(<., y>^j)/j! at x and V_k
    is a probability kernel supported in the convex hull of W x.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    return float(dunkl_kernel_array(table, x, np.atleast_2d(np.asarray(y, dtype=float)), tol)[0])


def dunkl_kernel_array(table: IntertwineTable, x, Y: np.ndarray, tol: float = 1e-10, relative_to_exp: bool = False) -> np.ndarray:
    """Vectorised kernel over the rows of ``Y`` for a fixed ``x``.

    With ``relative_to_exp`` the truncation error is bounded by
    ``tol * exp(|x||y|)`` instead of ``tol``.
    """
    d = table.dim
    x = np.asarray(x, dtype=float).reshape(d)
    Y = np.asarray(Y, dtype=float).reshape(-1, d)
    a = float(np.linalg.norm(x) * np.linalg.norm(Y, axis=1).max()) if len(Y) else 0.0
    if relative_to_exp:
        n = kernel_degree(a, tol * math.exp(a)) if a > 0 else 0
    else:
        n = kernel_degree(a, tol)
    if n > table.n_max:
        raise KernelTruncationError(
            f"kernel needs degree {n} for |x||y| = {a:.3g}, table holds {table.n_max}"
        )
    coeffs = table._kernel_coefficients(tuple(x), n)
    out = np.zeros(len(Y))
    pow_cache = [np.ones((len(Y), d))]
    for j, (basis, vals) in enumerate(coeffs):
        if j > 0:
            pow_cache.append(pow_cache[-1] * Y)
        for nu, c in zip(basis, vals):
            if c == 0:
                continue
            term = np.full(len(Y), c)
            for i, p in enumerate(nu):
                if p:
                    term = term * pow_cache[p][:, i]
            out += term
    return out


def rank1_kernel_closed_form(k: float, x: float, y: float) -> float:
    """Rank-one Dunkl kernel through modified Bessel functions (test oracle).

    D_k(x,y) = Gamma(k+1/2) (z/2)^(1/2-k) [I_(k-1/2)(z) + I_(k+1/2)(z)] with
    z = <sqrt2 x, sqrt2 y>/2 = x y, valid for k > 0 and z != 0.
    """
    from scipy.special import gamma, iv

    z = x * y
    if z == 0:
        return 1.0
    az = abs(z)
    s = 1.0 if z > 0 else -1.0
    return gamma(k + 0.5) * (az / 2) ** (0.5 - k) * (iv(k - 0.5, az) + s * iv(k + 0.5, az))


# ---------------------------------------------------------------------------
# Dunkl-Hermite polynomials


def classical_hermite(n: int) -> Polynomial:
    """Space-time Hermite polynomial H_n(x, t), harmonic for d/dt + (1/2) d^2/dx^2.

    H_n(x, t) = sum_j n! / (j! (n-2j)! 2^j) (-t)^j x^(n-2j);  H_n(x, 0) = x^n,
    so that E(B_t^n | F_s) = H_n(B_s, s - t).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    terms = {}
    for j in range(n // 2 + 1):
        c = Fraction(math.factorial(n), math.factorial(j) * math.factorial(n - 2 * j) * 2**j)
        terms[(n - 2 * j, j)] = c * (-1) ** j
    return Polynomial(1, terms, ntime=1)


def hermite_product(nu: Sequence[int]) -> Polynomial:
    """H_nu(x, t) = prod_i H_(nu_i)(x_i, t) in d space variables and one time."""
    d = len(nu)
    out = Polynomial.constant(1, d, 1)
    for i, n in enumerate(nu):
        h = classical_hermite(n)
        terms = {}
        for (p, j), c in h.terms.items():
            e = [0] * (d + 1)
            e[i] = p
            e[d] = j
            terms[tuple(e)] = c
        out = out * Polynomial(d, terms, 1)
    return out


@dataclass(frozen=True)
class HermiteFamily:
    """Q_nu with its Brownian and jump integrands (all in x and one time t)."""

    nu: tuple
    Q: Polynomial
    continuous: tuple[Polynomial, ...]
    jump_quotients: tuple[Polynomial, ...]
    jump_scales: tuple

    @property
    def jump(self) -> tuple[Polynomial, ...]:
        """sqrt(k(alpha)) (Q - Q o sigma_alpha) / <alpha, x>, per positive root."""
        return tuple(q * s for q, s in zip(self.jump_quotients, self.jump_scales))

    def integrand(self, eps: int) -> Polynomial:
        """Integrand against the noise Z^eps (0-based: Brownian coords then roots)."""
        d = self.Q.dim
        return self.continuous[eps] if eps < d else self.jump[eps - d]


def root_scale(k) -> QSqrt2 | float:
    """sqrt(k) exactly when it lies in Q(sqrt2)."""
    return sqrt_rational(k)


def hermite_Q(table: IntertwineTable, nu: Sequence[int]) -> HermiteFamily:
    """Q_nu = V_k H_nu and the integrands of its martingale representation."""
    nu = tuple(nu)
    if len(nu) != table.dim:
        raise ValueError("multi-index length must equal the dimension")
    if sum(nu) > table.n_max:
        raise KernelTruncationError(f"|nu| = {sum(nu)} exceeds n_max = {table.n_max}")
    Q = table.apply(hermite_product(nu))
    rs = table.rs
    cont = tuple(Q.diff(i) for i in range(rs.dim))
    quots = tuple(divided_difference(rs, a, Q) for a in range(rs.n_roots))
    scales = tuple(root_scale(k) for k in rs.multiplicity)
    return HermiteFamily(nu, Q, cont, quots, scales)


def space_time_lift(table: IntertwineTable, p: Polynomial) -> Polynomial:
    """Harmonic lift H(x, t) with H(x, 0) = p, through the generalized-monomial basis.

    ``p`` may carry auxiliary variables; they are treated as parameters and the
    lift time is appended as a new last auxiliary variable.
    """
    d = p.dim
    nt = p.ntime
    out = Polynomial.zero(d, nt + 1)
    cache: dict[tuple, Polynomial] = {}
    for tail, space in p.split_by_time().items():
        for nu, c in table.to_generalized(space).items():
            if nu not in cache:
                Q = hermite_Q(table, nu).Q if sum(nu) else Polynomial.constant(1, d, 1)
                cache[nu] = Q.with_time_vars(nt + 1, [nt])
            param = Polynomial.monomial((0,) * d, d, nt + 1, coeff=c, time_exps=tuple(tail) + (0,))
            out = out + cache[nu] * param
    return out


def heat_lift(rs: RootSystem, p: Polynomial) -> Polynomial:
    """Same lift computed as exp(-t L_k / 2) p, a finite sum since L_k lowers degree by 2.

    Independent of the intertwining table; used to cross-check :func:`space_time_lift`.
    """
    d, nt = p.dim, p.ntime
    out = Polynomial.zero(d, nt + 1)
    term = p
    j = 0
    while term:
        coeff = Fraction((-1) ** j, math.factorial(j))
        t_pow = Polynomial.monomial((0,) * d, d, nt + 1, coeff=coeff, time_exps=(0,) * nt + (j,))
        out = out + term.with_time_vars(nt + 1) * t_pow
        term = dunkl_L(rs, term) * Fraction(1, 2)
        j += 1
    return out


def time_derivative(Q: Polynomial) -> Polynomial:
    return Q.diff(Q.dim + Q.ntime - 1)


def harmonicity_defect(rs: RootSystem, Q: Polynomial) -> Polynomial:
    """(d/dt + L_k/2) Q, with t the last auxiliary variable."""
    return time_derivative(Q) + dunkl_L(rs, Q) * Fraction(1, 2)


def defining_relation_defect(table: IntertwineTable, nu: Sequence[int], i: int) -> Polynomial:
    """T_i m_nu - V_k(d/dx_i x^nu); zero for a correct table."""
    nu = tuple(nu)
    lhs = dunkl_T(table.rs, i, table.m(nu))
    if nu[i] == 0:
        return lhs
    down = list(nu)
    down[i] -= 1
    return lhs - table.m(tuple(down)) * nu[i]
