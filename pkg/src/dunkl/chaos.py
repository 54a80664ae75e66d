"""Chaos expansion of polynomial functionals of the Dunkl process.

A functional prod_j m_{nu_j}(X_{t_j}) is peeled from the last observation
backwards.  Each polynomial observed at a deadline s is lifted to the
space-time harmonic H(x, v) with H(x, s) = p(x); on [lower, s] it splits into
H(X_lower, lower) plus stochastic integrals of D_eps H(X_v, v) against the
noises (Brownian coordinates, then root martingales).  The integrands are
again polynomials of the process at a (now symbolic) deadline and the same
step recurses until only deterministic integrands remain.

Integration variables are u_1 > u_2 > ... > u_n; each carries a cell
(lo, hi) with fixed lo and either a fixed hi or hi = None, meaning "below the
previous variable".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .field import QSqrt2
from .intertwine import IntertwineTable, hermite_Q, root_scale, space_time_lift
from .pathsim import MartingaleDecomposition, Path
from .polyalg import Polynomial, divided_difference, dunkl_L

MAX_ORDER = 6


class ChaosError(ValueError):
    pass


def _exact_time(t) -> Fraction:
    if isinstance(t, Fraction):
        return t
    if isinstance(t, int):
        return Fraction(t)
    return Fraction(str(t))


@dataclass(frozen=True)
class NoiseIndex:
    """1-based noise label: 1..d are Brownian coordinates, d+1..d+R the roots."""

    value: int
    dim: int
    n_roots: int

    def __post_init__(self):
        if not 1 <= self.value <= self.dim + self.n_roots:
            raise ChaosError(f"noise index {self.value} outside [1, {self.dim + self.n_roots}]")

    @property
    def is_brownian(self) -> bool:
        return self.value <= self.dim

    @property
    def axis(self) -> int:
        return self.value - 1

    @property
    def root(self) -> int:
        return self.value - 1 - self.dim

    def label(self) -> str:
        return f"B{self.value}" if self.is_brownian else f"M{self.root + 1}"


@dataclass(frozen=True)
class FunctionalSpec:
    """Lambda = prod_j m_{nu_j}(X_{t_j}) with 0 <= t_1 < ... < t_l."""

    times: tuple
    nus: tuple

    def __post_init__(self):
        times = tuple(_exact_time(t) for t in self.times)
        nus = tuple(tuple(int(v) for v in nu) for nu in self.nus)
        if len(times) != len(nus) or not times:
            raise ChaosError("need one multi-index per observation time")
        if times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ChaosError("observation times must be nonnegative and strictly increasing")
        if len({len(nu) for nu in nus}) != 1 or any(min(nu) < 0 for nu in nus):
            raise ChaosError("multi-indices must be nonnegative and of equal length")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "nus", nus)

    @property
    def total_degree(self) -> int:
        return sum(sum(nu) for nu in self.nus)

    def evaluate(self, table: IntertwineTable, path: Path) -> np.ndarray:
        """Lambda on every path (float)."""
        out = np.ones(path.n_paths)
        for t, nu in zip(self.times, self.nus):
            j = grid_index(path, t)
            out *= table.m(nu).evaluate(path.states[:, j])
        return out


@dataclass(frozen=True)
class ChaosTerm:
    """Iterated integral against noises ``indices`` (1-based, outermost first).

    ``pieces`` is a tuple of (cells, f) with f a polynomial in u_1..u_n
    (Polynomial of space dimension 0) on the given cells.
    """

    indices: tuple
    pieces: tuple

    @property
    def order(self) -> int:
        return len(self.indices)

    def norm_sq(self):
        """int over the simplex of f^2, exactly when the coefficients are exact."""
        total = 0
        for cells, f in self.pieces:
            total = total + integrate_cells(f * f, cells)
        return total

    def canonical(self) -> str:
        names = [f"u{i + 1}" for i in range(self.order)]
        parts = []
        for cells, f in self.pieces:
            cs = ",".join(_cell_text(c, i) for i, c in enumerate(cells))
            parts.append(f"  cells=[{cs}] f={f.canonical(names)}")
        head = "term eps=(" + ",".join(str(e) for e in self.indices) + ")"
        return "\n".join([head] + parts)


def _cell_text(cell, i) -> str:
    lo, hi = cell
    top = f"u{i}" if hi is None else str(hi)
    return f"({lo},{top})"


@dataclass
class ChaosExpansion:
    spec: FunctionalSpec
    x0: tuple
    constant: object
    terms: list[ChaosTerm]
    first_peel: dict = field(default_factory=dict)

    def variance(self):
        """sum over terms of int f^2 (the variance of Lambda by the isometry)."""
        total = 0
        for term in self.terms:
            total = total + term.norm_sq()
        return total

    def canonical(self) -> str:
        c = self.constant
        head = "constant=" + (c.canonical() if isinstance(c, QSqrt2) else repr(float(c)))
        return "\n".join([head] + [t.canonical() for t in self.terms]) + "\n"

    @property
    def has_float(self) -> bool:
        return isinstance(self.constant, float) or any(f.is_float for t in self.terms for _, f in t.pieces)

    def almost_equal(self, other: "ChaosExpansion", tol: float = 1e-10) -> bool:
        """Same index tuples and cells, coefficients equal up to ``tol``
        (relative); for comparing expansions that carry float coefficients."""
        if abs(float(self.constant) - float(other.constant)) > tol * max(1.0, abs(float(self.constant))):
            return False
        if len(self.terms) != len(other.terms):
            return False
        for a, b in zip(self.terms, other.terms):
            if a.indices != b.indices or [c for c, _ in a.pieces] != [c for c, _ in b.pieces]:
                return False
            if not all(f.almost_equal(g, tol) for (_, f), (_, g) in zip(a.pieces, b.pieces)):
                return False
        return True


# ---------------------------------------------------------------------------
# exact integration over simplex cells


def integrate_cells(f: Polynomial, cells: Sequence[tuple]):
    """int f du_n ... du_1 over the cells, innermost variable first."""
    n = len(cells)
    g = f
    for i in range(n - 1, -1, -1):
        lo, hi = cells[i]
        G = g.integrate(i)
        upper = Polynomial.var(i - 1, 0, g.ntime) if hi is None else hi
        g = G.substitute(i, upper) - G.substitute(i, lo)
    if not g.terms:
        return 0
    return g.terms[(0,) * g.ntime]


# ---------------------------------------------------------------------------
# expansion


class _Expander:
    def __init__(self, table: IntertwineTable, spec: FunctionalSpec, x0, lift: str):
        self.table = table
        self.rs = table.rs
        self.spec = spec
        self.d = self.rs.dim
        self.R = self.rs.n_roots
        self.U = spec.total_degree + 1  # auxiliary slots u_1..u_U
        self.x0 = x0
        self.lift_mode = lift
        self.scales = [root_scale(k) for k in self.rs.multiplicity]
        self.out: dict[tuple, dict[tuple, Polynomial]] = {}
        self.constant = 0
        self.first_peel: dict[int, Polynomial] = {}

    def aux(self, c, slot=None) -> Polynomial:
        if slot is None:
            return Polynomial.constant(c, self.d, self.U)
        return Polynomial.var(self.d + slot, self.d, self.U) * c

    def deadline(self, s) -> Polynomial:
        return self.aux(s) if isinstance(s, Fraction) else self.aux(1, s)

    def lift(self, P: Polynomial, s, vslot: int) -> Polynomial:
        """H(x, v) harmonic with H(x, s) = P, v in auxiliary slot ``vslot``."""
        shift = self.aux(1, vslot) - self.deadline(s)  # v - s
        if self.lift_mode == "heat":
            out = Polynomial.zero(self.d, self.U)
            term = P
            j = 0
            while term:
                out = out + term * ((-shift) ** j) * Fraction(1, math.factorial(j))
                term = dunkl_L(self.rs, term) * Fraction(1, 2)
                j += 1
            return out
        Hl = space_time_lift(self.table, P)  # extra last slot tau
        tau_slot = self.d + self.U
        shifted = Hl.substitute(tau_slot, shift.with_time_vars(self.U + 1))
        return Polynomial(self.d, {e[:-1]: c for e, c in shifted.terms.items()}, self.U)

    def derivative(self, H: Polynomial, eps: int) -> Polynomial:
        if eps < self.d:
            return H.diff(eps)
        r = eps - self.d
        s = self.scales[r]
        if not s:
            return Polynomial.zero(self.d, self.U)
        return divided_difference(self.rs, r, H) * s

    def at_x0(self, P: Polynomial) -> Polynomial:
        for i, v in enumerate(self.x0):
            P = P.substitute(i, v)
        return P

    def peel(self, P: Polynomial, s, j: int, depth: int, cells: tuple, eps: tuple):
        if not P:
            return
        times = self.spec.times
        lower = times[j - 1] if j > 0 else Fraction(0)
        H = self.lift(P, s, depth)
        # H(X_lower, lower): merge with the factor observed at `lower`, or evaluate at x0
        C = H.substitute(self.d + depth, lower)
        if j > 0:
            m = self.table.m(self.spec.nus[j - 1]).with_time_vars(self.U)
            self.peel(C * m, lower, j - 1, depth, cells, eps)
        else:
            self.record(self.at_x0(C), cells, eps)
        hi = s if isinstance(s, Fraction) else None
        if hi is not None and hi == lower:
            return
        if depth >= min(MAX_ORDER, self.U):
            if any(self.derivative(H, e) for e in range(self.d + self.R)):
                raise ChaosError("chaos order cap exceeded")
            return
        for e in range(self.d + self.R):
            G = self.derivative(H, e)
            if not G:
                continue
            if depth == 0 and j == len(times) - 1 and not eps:
                self.first_peel[e + 1] = G
            self.peel(G, depth, j, depth + 1, cells + ((lower, hi),), eps + (e + 1,))

    def record(self, c: Polynomial, cells: tuple, eps: tuple):
        if not c:
            return
        n = len(eps)
        f = Polynomial(0, {e[self.d : self.d + n]: v for e, v in c.terms.items()}, n)
        if any(sum(e[self.d + n :]) for e in c.terms):
            raise ChaosError("integrand depends on an unused variable")
        if n == 0:
            self.constant = self.constant + f.terms.get((), 0)
            return
        bucket = self.out.setdefault(eps, {})
        bucket[cells] = bucket[cells] + f if cells in bucket else f


def chaos_expand(table: IntertwineTable, spec: FunctionalSpec, x0, hermites: dict | None = None, lift: str = "table") -> ChaosExpansion:
    """Finite chaos expansion of ``spec`` for the process started at ``x0``.

    ``lift`` chooses how space-time harmonic lifts are built: ``"table"`` goes
    through generalized monomials and the inverse of V_k, ``"heat"`` sums
    the series exp(-(v-s) L_k / 2).  Both give identical expansions.
    ``hermites`` is accepted for reuse by callers and is not required.
    """
    if spec.total_degree > table.n_max:
        raise ChaosError(f"total degree {spec.total_degree} exceeds n_max = {table.n_max}")
    if len(spec.nus[0]) != table.dim:
        raise ChaosError("multi-index length must match the dimension")
    x0 = tuple(_exact_time(v) if not isinstance(v, QSqrt2) else v for v in np.atleast_1d(np.asarray(x0, dtype=object)))
    ex = _Expander(table, spec, x0, lift)
    l = len(spec.times)
    last = table.m(spec.nus[-1]).with_time_vars(ex.U)
    ex.peel(last, spec.times[-1], l - 1, 0, (), ())
    terms = []
    for eps in sorted(ex.out, key=lambda e: (len(e), e)):
        pieces = tuple(sorted(((c, f) for c, f in ex.out[eps].items() if f), key=lambda cf: _cells_key(cf[0])))
        if pieces:
            terms.append(ChaosTerm(eps, pieces))
    return ChaosExpansion(spec, x0, ex.constant, terms, ex.first_peel)


def _cells_key(cells):
    return tuple((lo, -1 if hi is None else hi) for lo, hi in cells)


def first_peel_reference(table: IntertwineTable, spec: FunctionalSpec, eps: int, hermites: dict | None = None) -> Polynomial:
    """The integrand of the last factor from the Hermite family, Q_{nu,eps}(x, v - t_l),
    in the slot layout used by :func:`chaos_expand` (v is u_1)."""
    nu = spec.nus[-1]
    fam = (hermites or {}).get(nu) or hermite_Q(table, nu)
    g = fam.integrand(eps - 1)
    d = table.dim
    U = spec.total_degree + 1
    shift = Polynomial.var(d, d, U) - Polynomial.constant(spec.times[-1], d, U)
    return _retime(g, shift, U)


def _retime(g: Polynomial, shift: Polynomial, U: int) -> Polynomial:
    d = g.dim
    out = Polynomial.zero(d, U)
    for (tp,), space in g.split_by_time().items():
        out = out + space.with_time_vars(U) * (shift**tp)
    return out


# ---------------------------------------------------------------------------
# Monte Carlo evaluation


def grid_index(path: Path, t) -> int:
    t = float(t)
    j = int(round(t / (path.times[1] - path.times[0]))) if len(path.times) > 1 else 0
    if j < 0 or j >= len(path.times) or abs(path.times[j] - t) > 1e-9 * max(1.0, abs(t)):
        raise ChaosError(f"time {t} is not on the recorded grid")
    return j


class _Increments:
    """Per-interval noise increments weighted by u^a, cached per (noise, a)."""

    def __init__(self, path: Path, dec: MartingaleDecomposition):
        if path.dB is None and dec.dB is None:
            raise ChaosError("path carries no Brownian record")
        self.path = path
        self.dec = dec
        self.left = path.times[:-1]
        self.cache: dict[tuple, np.ndarray] = {}
        n, M = path.states.shape[0], len(path.times) - 1
        self.shape = (n, M)
        self.jump_interval = path.jump_step // path.stride

    def get(self, eps: int, a: int) -> np.ndarray:
        key = (eps, a)
        if key in self.cache:
            return self.cache[key]
        d = self.path.rs.dim
        w = self.left**a
        if eps <= d:
            dB = self.path.dB if self.path.dB is not None else self.dec.dB
            out = dB[:, :, eps - 1] * w
        else:
            r = eps - 1 - d
            out = self.path.comp[:, :, r] * w
            sel = self.path.jump_root == r
            if sel.any():
                vals = self.dec.dM_jump[sel] * self.path.jump_time[sel] ** a
                out = out.copy()
                np.add.at(out, (self.path.jump_path[sel], self.jump_interval[sel]), vals)
        self.cache[key] = out
        return out


def _cell_mask(times: np.ndarray, lo, hi) -> np.ndarray:
    left, right = times[:-1], times[1:]
    mask = left >= float(lo) - 1e-12
    if hi is not None:
        mask &= right <= float(hi) + 1e-12
    return mask


def _monomial_integral(inc: _Increments, eps: tuple, powers: tuple, cells: tuple, convention: str) -> np.ndarray:
    times = inc.path.times
    inner = None  # (n, M) value of the inner integral available on each interval, or (n,) constant
    for m in range(len(eps) - 1, -1, -1):
        lo, hi = cells[m]
        w = inc.get(eps[m], powers[m]) * _cell_mask(times, lo, hi)
        if inner is not None:
            w = w * (inner if inner.ndim == 2 else inner[:, None])
        if m == 0:
            return w.sum(axis=1)
        if cells[m][1] is None:
            c = np.cumsum(w, axis=1)
            if convention == "left":
                c = np.concatenate([np.zeros((w.shape[0], 1)), c[:, :-1]], axis=1)
            inner = c
        else:
            inner = w.sum(axis=1)
    return np.zeros(inc.shape[0])


def iterated_integral(path: Path, decomposition: MartingaleDecomposition, term: ChaosTerm, convention: str = "left", _inc: _Increments | None = None) -> np.ndarray:
    """Nested Riemann-Stieltjes sums of ``term`` on every path.

    ``convention="left"`` evaluates inner integrals strictly before the
    interval of the outer variable (predictable); ``"right"`` includes it, which
    for jump legs picks up same-instant products and is not a martingale.
    """
    if convention not in ("left", "right"):
        raise ChaosError(f"unknown convention {convention!r}")
    inc = _inc or _Increments(path, decomposition)
    for cells, _ in term.pieces:
        for lo, hi in cells:
            grid_index(path, lo)
            if hi is not None:
                grid_index(path, hi)
    out = np.zeros(path.n_paths)
    for cells, f in term.pieces:
        for e, c in f.terms.items():
            out += float(c) * _monomial_integral(inc, term.indices, e, cells, convention)
    return out


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        # no spread estimate from fewer than two samples
        return (float(v[0]) if len(v) else math.nan), math.inf
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def isometry_check(path: Path, decomposition: MartingaleDecomposition, expansion: ChaosExpansion, table: IntertwineTable, convention: str = "left") -> dict:
    """Monte Carlo report on reconstruction, isometry and orthogonality."""
    ok = path.accepted
    inc = _Increments(path, decomposition)
    values = [iterated_integral(path, decomposition, t, convention, inc)[ok] for t in expansion.terms]
    lam = expansion.spec.evaluate(table, path)[ok]
    const = float(expansion.constant)
    recon = lam - const - (np.sum(values, axis=0) if values else 0.0)
    report = {
        "n_paths": int(ok.sum()),
        "constant": const,
        "lambda_mean": _mean_se(lam),
        "lambda_var": float(lam.var(ddof=1)),
        "variance_exact": float(expansion.variance()),
        "residual_mean": _mean_se(recon),
        "residual_second_moment": _mean_se(recon**2),
        "terms": [],
        "pairs": [],
    }
    for t, v in zip(expansion.terms, values):
        report["terms"].append(
            {
                "indices": list(t.indices),
                "mean": _mean_se(v),
                "second_moment": _mean_se(v**2),
                "norm_sq": float(t.norm_sq()),
            }
        )
    for a in range(len(values)):
        for b in range(a + 1, len(values)):
            report["pairs"].append({"a": list(expansion.terms[a].indices), "b": list(expansion.terms[b].indices), "product": _mean_se(values[a] * values[b])})
    return report


def hermite_martingale_check(path: Path, table: IntertwineTable, nu: Sequence[int], s: float, t: float) -> dict:
    """E m_nu(X_t) against Q_nu(x0, -t), and the conditional version at time s
    through E[(m_nu(X_t) - Q_nu(X_s, s - t)) g(X_s)] = 0 for g = 1, x_i, x_i^2."""
    if not s < t:
        raise ChaosError("need s < t")
    nu = tuple(nu)
    fam = hermite_Q(table, nu) if sum(nu) else None
    ok = path.accepted
    it = grid_index(path, t)
    iS = grid_index(path, s)
    Xt = path.states[ok, it]
    Xs = path.states[ok, iS]
    n = Xt.shape[0]
    if fam is None:
        return {"nu": list(nu), "mean": (1.0, 0.0), "target": 1.0, "conditional": []}
    m = table.m(nu).evaluate(Xt)
    x0 = path.x0.reshape(1, -1)
    target = float(fam.Q.evaluate(x0, np.array([-t]))[0])
    resid = m - fam.Q.evaluate(Xs, np.full(n, s - t))
    cond = [("1", _mean_se(resid))]
    for i in range(table.dim):
        cond.append((f"x{i + 1}", _mean_se(resid * Xs[:, i])))
        cond.append((f"x{i + 1}^2", _mean_se(resid * Xs[:, i] ** 2)))
    return {"nu": list(nu), "mean": _mean_se(m), "target": target, "conditional": cond}
