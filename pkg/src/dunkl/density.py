"""Heat kernel of the Dunkl process, its normalising constant and the radial laws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import rootsys
from .intertwine import IntertwineTable, build_intertwine, dunkl_kernel_array
from .polyalg import Polynomial, dunkl_L, square_norm
from .rootsys import RootSystem
from .special import bessel_ive

CK_METHODS = ("closed_form_rank1_product", "closed_form_mehta", "closed_form_laguerre_selberg", "quadrature", "monte_carlo")
CK_MAX_REL_ERROR = 1e-6
KERNEL_TOL = 1e-13


@dataclass(frozen=True)
class CkEstimate:
    value: float
    rel_error: float
    method: str


def weight(rs: RootSystem, y) -> np.ndarray | float:
    """prod_alpha |<alpha, y>|^(2 k(alpha)); rows of ``y`` are evaluated independently."""
    Y = np.asarray(y, dtype=float)
    scalar = Y.ndim <= 1 and (Y.size == rs.dim)
    Y = Y.reshape(-1, rs.dim)
    P = np.abs(Y @ rs.roots_array.T)
    out = np.prod(P ** (2 * rs.k_array), axis=1)
    return float(out[0]) if scalar else out


def _root_span(rs: RootSystem) -> np.ndarray:
    """Orthonormal basis (rows) of the span of the roots."""
    A = rs.roots_array
    if A.size == 0:
        return np.zeros((0, rs.dim))
    _, s, vt = np.linalg.svd(A)
    r = int(np.sum(s > 1e-10))
    return vt[:r]


def _rank1_factor(k: Fraction) -> float:
    k = float(k)
    return math.exp((2 * k + 0.5) * math.log(2) + gammaln(k + 0.5))


def compute_ck(rs: RootSystem, method: str | None = None, n_samples: int = 1_000_000, seed: int = 0) -> CkEstimate:
    """c_k = integral of exp(-|x|^2/2) w_k(x) dx.

    ``closed_form_rank1_product`` applies to rank-one and coordinate product
    systems (and to k = 0); ``quadrature`` integrates the homogeneous weight in
    polar coordinates over the root span (rank <= 2); ``monte_carlo`` averages
    the weight under the standard Gaussian.
    """
    if method is None:
        method = default_ck_method(rs)
    d = rs.dim
    if method == "closed_form_rank1_product":
        if rs.is_trivial:
            return CkEstimate((2 * math.pi) ** (d / 2), 1e-15, method)
        if rs.kind not in ("rank1", "product_of_rank1"):
            raise ValueError(f"no closed form for {rs.label}")
        val = 1.0
        for k in rs.multiplicity:
            val *= _rank1_factor(k)
        return CkEstimate(val, 1e-14, method)
    if method == "closed_form_mehta":
        return _ck_mehta(rs)
    if method == "closed_form_laguerre_selberg":
        return _ck_laguerre_selberg(rs)
    if method == "quadrature":
        return _ck_quadrature(rs)
    if method == "monte_carlo":
        return _ck_monte_carlo(rs, n_samples, seed)
    raise ValueError(f"unknown c_k method {method!r}")


def default_ck_method(rs: RootSystem) -> str:
    if rs.is_trivial or rs.kind in ("rank1", "product_of_rank1"):
        return "closed_form_rank1_product"
    if rs.kind == "B":
        return "closed_form_laguerre_selberg"
    if _mehta_degrees(rs) is not None:
        return "closed_form_mehta"
    if _root_span(rs).shape[0] <= 2:
        return "quadrature"
    return "monte_carlo"


def _mehta_degrees(rs: RootSystem) -> list[int] | None:
    """Degrees of the basic invariants of W, when the multiplicity is constant."""
    if len(set(rs.multiplicity)) != 1:
        return None
    n = rs.dim
    if rs.kind == "rank1":
        return [2]
    if rs.kind == "product_of_rank1":
        return [2] * n
    if rs.kind == "A":
        return list(range(2, n + 1))
    if rs.kind == "B":
        return list(range(2, 2 * n + 1, 2))
    if rs.kind == "D":
        return list(range(2, 2 * n - 1, 2)) + [n]
    if rs.kind == "I2":
        return [2, int(rs.label[3:-1])]
    return None


def _ck_mehta(rs: RootSystem) -> CkEstimate:
    """Macdonald-Mehta integral: c_k = (2 pi)^(d/2) prod_j Gamma(1 + k d_j) / Gamma(1 + k)
    for roots normalised to <alpha, alpha> = 2 and a single multiplicity k."""
    degs = _mehta_degrees(rs)
    if degs is None:
        raise ValueError(f"Macdonald-Mehta form needs a constant multiplicity, got {rs.describe()}")
    k = float(rs.multiplicity[0])
    logv = rs.dim / 2 * math.log(2 * math.pi) + sum(gammaln(1 + k * dj) - gammaln(1 + k) for dj in degs)
    return CkEstimate(math.exp(logv), 1e-13, "closed_form_mehta")


def _ck_laguerre_selberg(rs: RootSystem) -> CkEstimate:
    """B(n) with long multiplicity a and short multiplicity b.

    Substituting y_i = x_i^2 / 2 turns c_k into a Laguerre Selberg integral,
    int prod y^(b - 1/2) e^(-y) |Delta(y)|^(2a) dy = prod_j Gamma(b + 1/2 + j a) Gamma(1 + (j + 1) a) / Gamma(1 + a),
    times 2^(n/2 + a n (n - 1) + 2 b n).
    """
    if rs.kind != "B":
        raise ValueError("Laguerre-Selberg form applies to B(n) only")
    n = rs.dim
    ks = rs.orbit_multiplicities()
    a, b = (float(ks[0]), float(ks[1])) if n > 1 else (0.0, float(ks[0]))
    logv = (n / 2 + a * n * (n - 1) + 2 * b * n) * math.log(2)
    logv += sum(gammaln(b + 0.5 + j * a) + gammaln(1 + (j + 1) * a) - gammaln(1 + a) for j in range(n))
    return CkEstimate(math.exp(logv), 1e-13, "closed_form_laguerre_selberg")


def _ck_quadrature(rs: RootSystem) -> CkEstimate:
    d = rs.dim
    U = _root_span(rs)
    r = U.shape[0]
    gamma = float(rs.gamma)
    free = (2 * math.pi) ** ((d - r) / 2)
    A = rs.roots_array @ U.T  # roots in span coordinates
    k2 = 2 * rs.k_array
    if r == 0:
        return CkEstimate(free, 1e-15, "quadrature")
    if r == 1:
        a = A[:, 0]

        def f(s):
            return math.exp(-s * s / 2) * float(np.prod(np.abs(a * s) ** k2))

        v1, e1 = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=400)
        v2, e2 = integrate.quad(f, -np.inf, 0, epsabs=0, epsrel=1e-13, limit=400)
        val = v1 + v2
        return CkEstimate(free * val, (e1 + e2) / val + 1e-14, "quadrature")
    if r == 2:
        # radial part integrates in closed form: int rho^(2 gamma + 1) e^{-rho^2/2} drho
        radial = math.exp((gamma) * math.log(2) + gammaln(gamma + 1))
        zeros = sorted({(math.atan2(-a[0], a[1]) % math.pi) + s * math.pi for a in A for s in (0, 1)})
        pts = [0.0] + [z for z in zeros if 0 < z < 2 * math.pi] + [2 * math.pi]

        def g(th):
            u = np.array([math.cos(th), math.sin(th)])
            return float(np.prod(np.abs(A @ u) ** k2))

        val = 0.0
        err = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi - lo < 1e-15:
                continue
            v, e = integrate.quad(g, lo, hi, epsabs=0, epsrel=1e-13, limit=400)
            val += v
            err += e
        return CkEstimate(free * radial * val, err / val + 1e-14, "quadrature")
    raise ValueError(f"quadrature for c_k is restricted to root spans of rank <= 2 (got {r})")


def _ck_monte_carlo(rs: RootSystem, n: int, seed: int, n_blocks: int = 50) -> CkEstimate:
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n // 2, rs.dim))
    # antithetic pair (Z, -Z); the weight is even so the pair average equals w(Z)
    w = 0.5 * (weight(rs, Z) + weight(rs, -Z))
    mean = float(w.mean())
    # delete-a-block jackknife
    blocks = np.array_split(w, n_blocks)
    sums = np.array([b.sum() for b in blocks])
    counts = np.array([len(b) for b in blocks])
    loo = (sums.sum() - sums) / (counts.sum() - counts)
    se = math.sqrt((n_blocks - 1) / n_blocks * np.sum((loo - loo.mean()) ** 2))
    scale = (2 * math.pi) ** (rs.dim / 2)
    return CkEstimate(scale * mean, se / mean, "monte_carlo")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityContext:
    rs: RootSystem
    table: IntertwineTable
    ck: float
    ck_rel_error: float
    gamma: Fraction

    def __post_init__(self):
        if not self.ck > 0:
            raise ValueError("c_k must be positive")

    @property
    def bessel_dimension(self) -> Fraction:
        return 2 * self.gamma + self.rs.dim

    @property
    def ck_meets_tolerance(self) -> bool:
        return self.ck_rel_error < CK_MAX_REL_ERROR


def density_context(rs: RootSystem, n_max: int | None = None, ck_method: str | None = None, table: IntertwineTable | None = None) -> DensityContext:
    """Context for density evaluation; the kernel table defaults to a float table
    deep enough for |x||y|/t up to about 12 (rank one) or 6 (d = 2)."""
    if table is None:
        if n_max is None:
            n_max = {1: 90, 2: 45}.get(rs.dim, 16)
        table = build_intertwine(rs, n_max, exact=False)
    est = compute_ck(rs, ck_method)
    return DensityContext(rs, table, est.value, est.rel_error, rs.gamma)


def transition_density(ctx: DensityContext, x, y, t: float) -> np.ndarray | float:
    """p_t(x, y) = exp(-(|x|^2+|y|^2)/2t) D_k(x/sqrt t, y/sqrt t) w_k(y) / (c_k t^(gamma + d/2))."""
    if t <= 0:
        raise ValueError("t must be positive")
    d = ctx.rs.dim
    x = np.asarray(x, dtype=float).reshape(d)
    Y = np.asarray(y, dtype=float)
    scalar = Y.size == d and Y.ndim <= 1
    Y = Y.reshape(-1, d)
    st = math.sqrt(t)
    # kernel error <= tol * e^{|x||y|/t}, which the Gaussian factor more than cancels
    D = dunkl_kernel_array(ctx.table, x / st, Y / st, KERNEL_TOL, relative_to_exp=True)
    g = float(ctx.gamma)
    expo = -(x @ x + np.sum(Y * Y, axis=1)) / (2 * t)
    out = np.exp(expo) * D * weight(ctx.rs, Y) / (ctx.ck * t ** (g + d / 2))
    return float(out[0]) if scalar else out


def heat_kernel(x, y, t: float) -> np.ndarray:
    """Gaussian kernel (2 pi t)^(-d/2) exp(-|x-y|^2 / 2t)."""
    x = np.asarray(x, dtype=float)
    Y = np.asarray(y, dtype=float).reshape(-1, x.size)
    d = x.size
    return (2 * math.pi * t) ** (-d / 2) * np.exp(-np.sum((Y - x) ** 2, axis=1) / (2 * t))


def bessel_density(N: float, r0: float, r, t: float) -> np.ndarray:
    """Transition density of BES(N) from r0 to r over time t."""
    r = np.asarray(r, dtype=float)
    nu = N / 2 - 1
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    if r0 == 0:
        logc = math.log(2) - (N / 2) * math.log(2 * t) - gammaln(N / 2)
        out[pos] = np.exp(logc + (N - 1) * np.log(rp) - rp * rp / (2 * t))
    else:
        z = rp * r0 / t
        # (r/t)(r/r0)^nu exp(-(r0^2+r^2)/2t) I_nu(z), with I_nu scaled by e^{-z}
        out[pos] = (rp / t) * (rp / r0) ** nu * np.exp(-((rp - r0) ** 2) / (2 * t)) * bessel_ive(nu, z)
    if N == 1 and np.any(~pos):
        out[~pos] = radial_limit_at_zero(r0, t)
    return out


def radial_limit_at_zero(r0: float, t: float) -> float:
    # BES(1) is |BM|: density at 0 is 2 * gaussian(r0)
    return 2 * math.exp(-r0 * r0 / (2 * t)) / math.sqrt(2 * math.pi * t)


def radial_density(ctx_or_N, r0: float, r, t: float) -> np.ndarray:
    """Law of |X_t| given |X_0| = r0: the Bessel density of dimension 2 gamma + d."""
    if r0 < 0 or t <= 0:
        raise ValueError("need r0 >= 0 and t > 0")
    N = float(ctx_or_N.bessel_dimension) if hasattr(ctx_or_N, "bessel_dimension") else float(ctx_or_N)
    return bessel_density(N, r0, r, t)


def radial_cdf(N: float, r0: float, t: float, n_grid: int = 40_001):
    """CDF of BES(N) at time t from r0, by cumulative Simpson on a dense grid.

    Returns a vectorised callable suitable for ``scipy.stats.kstest``.
    """
    from scipy.integrate import cumulative_simpson

    hi = r0 + 12 * math.sqrt(t) + math.sqrt(N * t) * 4
    grid = np.linspace(0, hi, n_grid)
    dens = bessel_density(N, r0, grid, t)
    cdf = cumulative_simpson(dens, x=grid, initial=0.0)
    cdf /= cdf[-1]

    def F(r):
        return np.interp(np.asarray(r, dtype=float), grid, cdf, left=0.0, right=1.0)

    return F


def radial_generator_check(rs: RootSystem, G: Sequence) -> dict:
    """Exact check of the generator on u(x) = F(|x|) with F(r) = G(r^2).

    Left: L_k u / 2 computed symbolically.  Right: the Bessel form
    F''/2 + (d-1) F'/(2r) + gamma F'/r, which for F(r) = G(r^2) becomes
    (d + 2 gamma) G'(r^2) + 2 r^2 G''(r^2).
    """
    d = rs.dim
    r2 = square_norm(d)

    def compose(coeffs):
        out = Polynomial.zero(d)
        for j, c in enumerate(coeffs):
            if c:
                out = out + (r2**j) * c
        return out

    G = [Fraction(c) if not isinstance(c, float) else c for c in G]
    dG = [j * G[j] for j in range(1, len(G))]
    d2G = [j * dG[j] for j in range(1, len(dG))]
    u = compose(G)
    lhs = dunkl_L(rs, u) * Fraction(1, 2)
    rhs = compose(dG) * (d + 2 * rs.gamma) + r2 * compose(d2G) * 2
    equal = lhs == rhs if lhs.is_exact and rhs.is_exact else lhs.almost_equal(rhs, 1e-10)
    return {"lhs": lhs, "rhs": rhs, "equal": equal}


def w_radial_density(ctx: DensityContext, x, y, t: float) -> np.ndarray | float:
    """Density of the W-radial part: sum over w in W of p_t(x, w y)."""
    d = ctx.rs.dim
    group = rootsys.group_elements(ctx.rs)
    Y = np.asarray(y, dtype=float)
    scalar = Y.size == d and Y.ndim <= 1
    Y = Y.reshape(-1, d)
    total = np.zeros(len(Y))
    for g in group:
        total += transition_density(ctx, x, Y @ g.T, t)
    return float(total[0]) if scalar else total
