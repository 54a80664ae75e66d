"""Verification checks run by the ``run`` subcommand, with an operation registry.

Every check returns one or more records (name, statistic, standard error or
exact flag, threshold, verdict) and declares which library operations it
exercises, so that ``suite=all`` can prove it touched every one of them.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate, stats

from . import chaos, density, intertwine, pathsim, polyalg, rootsys
from .config import ExperimentConfig
from .field import QSqrt2
from .polyalg import Polynomial

# statistical thresholds, in one place
SE_FACTOR = 4.0
KS_PVALUE = 0.01
FLOAT_TOL = 1e-10
REJECTION_MAX = 0.05

OPERATIONS = {
    "rootsys": ("build", "reflect", "pairing", "chamber_project"),
    "polyalg": ("dunkl_T", "dunkl_L", "divided_difference", "eval"),
    "intertwine": ("build_intertwine", "dunkl_kernel", "hermite_Q", "classical_hermite"),
    "density": ("weight", "compute_ck", "transition_density", "radial_density", "radial_generator_check", "w_radial_density"),
    "pathsim": ("simulate", "simulate_skew_rank1", "extract_martingales", "estimate_jump_functionals", "ito_residual_check"),
    "chaos": ("iterated_integral", "chaos_expand", "isometry_check", "hermite_martingale_check"),
    "cli": ("run_suite", "dump_fixtures", "simulate_cmd"),
}
ALL_OPS = tuple(f"{m}.{op}" for m, ops in OPERATIONS.items() for op in ops)


@dataclass
class Record:
    name: str
    passed: bool
    statistic: object
    threshold: object
    kind: str  # exact | float | statistical
    se: float | None = None
    detail: dict = field(default_factory=dict)

    def as_dict(self, suite: str, ops: tuple) -> dict:
        return {
            "name": self.name,
            "suite": suite,
            "ops": list(ops),
            "kind": self.kind,
            "statistic": self.statistic,
            "se": self.se,
            "threshold": self.threshold,
            "passed": bool(self.passed),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Check:
    name: str
    suite: str
    ops: tuple
    fn: Callable


REGISTRY: list[Check] = []


def check(name: str, suite: str, ops: tuple):
    def deco(fn):
        for op in ops:
            if op not in ALL_OPS:
                raise KeyError(f"unregistered operation {op}")
        REGISTRY.append(Check(name, suite, tuple(ops), fn))
        return fn

    return deco


def exact_record(name, ok: bool, detail=None) -> Record:
    return Record(name, bool(ok), "exact" if ok else "mismatch", "equality", "exact", None, detail or {})


def mean_record(name, mean: float, se: float, target: float = 0.0, detail=None) -> Record:
    z = abs(mean - target) / se if se > 0 else (0.0 if mean == target else math.inf)
    return Record(name, z <= SE_FACTOR, float(mean), f"|stat - {target!r}| <= {SE_FACTOR} se", "statistical", float(se), {"target": target, "z": z, **(detail or {})})


def ks_record(name, pvalue: float, stat: float, detail=None) -> Record:
    return Record(name, pvalue > KS_PVALUE, float(pvalue), f"p > {KS_PVALUE}", "statistical", None, {"ks_statistic": float(stat), **(detail or {})})


def tol_record(name, err: float, tol: float, detail=None) -> Record:
    return Record(name, bool(err <= tol), float(err), tol, "float", None, detail or {})


# ---------------------------------------------------------------------------
# shared state


class Context:
    """Lazily built objects shared by the checks of one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.rs = cfg.root_system()
        self.rng = np.random.default_rng(cfg.seed)

    @cached_property
    def table(self):
        return intertwine.build_intertwine(self.rs, min(self.cfg.n_max, 6 if self.rs.dim <= 2 else 4))

    @cached_property
    def rank1(self):
        """The configured system if rank one, otherwise a rank-one companion with
        the first orbit multiplicity."""
        if self.rs.kind == "rank1":
            return self.rs
        k = self.rs.orbit_multiplicities()[0]
        return rootsys.build("rank1", 1, (k,))

    @cached_property
    def x0(self):
        return np.array(self.cfg.x0, dtype=float)

    def sim(self, dt=None, record=True, **kw):
        cfg = self.cfg
        dt = dt or cfg.dt
        return pathsim.simulate(
            self.rs, self.x0, cfg.T, dt, cfg.seed, cfg.n_paths,
            record_every=1 if record else None, wall_factor=cfg.wall_factor, workers=cfg.workers, **kw,
        )

    @cached_property
    def paths(self):
        return self.sim(record=self.rs.dim <= 2)

    @cached_property
    def paths_half(self):
        return self.sim(dt=self.cfg.dt / 2, record=False)

    @cached_property
    def paths_coarse(self):
        """Recorded paths at 2 dt, for Richardson checks; None when T is not a
        whole number of 2 dt steps."""
        steps = self.cfg.T / (2 * self.cfg.dt)
        if abs(steps - round(steps)) > 1e-9 * steps or self.rs.dim > 2:
            return None
        return self.sim(dt=2 * self.cfg.dt)

    @cached_property
    def decomposition(self):
        return pathsim.extract_martingales(self.rs, self.paths)


def _same(a: Polynomial, b: Polynomial) -> bool:
    """Literal equality for exact polynomials, FLOAT_TOL (relative) otherwise."""
    if a.is_exact and b.is_exact:
        return a == b
    return a.almost_equal(b, FLOAT_TOL)


def _null(p: Polynomial) -> bool:
    return (not p) if p.is_exact else p.max_abs_coefficient() <= FLOAT_TOL


def _monomials(d, max_deg):
    out = []
    for n in range(max_deg + 1):
        out += polyalg.monomials_of_degree(d, n)
    return out


def _sym_degree(ctx):
    return 5 if ctx.rs.dim <= 2 else 4


# ---------------------------------------------------------------------------
# symbolic


@check("rootsys.invariants", "symbolic", ("rootsys.build", "rootsys.reflect", "rootsys.pairing"))
def _rootsys_invariants(ctx):
    rs = ctx.rs
    recs = []
    norm_ok = all(rootsys.pairing(rs, i, a) == 2 if rs.exact else abs(rootsys.pairing(rs, i, a) - 2) < FLOAT_TOL for i, a in enumerate(rs.positive_roots))
    recs.append(exact_record("rootsys.normalisation", norm_ok))
    closed = all(rootsys.is_root(rs, rootsys.reflect(rs, i, b)) for i in range(rs.n_roots) for b in rs.positive_roots)
    recs.append(exact_record("rootsys.closure", closed))
    ok = True
    for _ in range(50):
        x = tuple(Fraction(int(v), 7) for v in ctx.rng.integers(-20, 21, rs.dim))
        for i in range(rs.n_roots):
            y = rootsys.reflect(rs, i, x)
            z = rootsys.reflect(rs, i, y)
            if rs.exact:
                ok &= tuple(z) == tuple(QSqrt2.coerce(v) for v in x)
                ok &= sum((v * v for v in y), QSqrt2(0)) == sum((QSqrt2.coerce(v) ** 2 for v in x), QSqrt2(0))
            else:
                ok &= np.allclose(np.array(z, float), np.array(x, float), atol=FLOAT_TOL)
    recs.append(exact_record("rootsys.reflection_involutive_isometric", ok))
    gam = sum(rs.multiplicity, Fraction(0))
    recs.append(exact_record("rootsys.gamma", gam == rs.gamma and rs.bessel_dimension == 2 * gam + rs.dim, {"gamma": str(gam)}))
    return recs


@check("rootsys.chamber", "symbolic", ("rootsys.chamber_project",))
def _chamber(ctx):
    rs = ctx.rs
    ok = True
    for _ in range(50):
        x = tuple(Fraction(int(v), 5) for v in ctx.rng.integers(-20, 21, rs.dim))
        base = rootsys.chamber_project(rs, x)
        word = ctx.rng.integers(0, rs.n_roots, ctx.rng.integers(0, 7)).tolist()
        other = rootsys.chamber_project(rs, rootsys.random_word_action(rs, x, word))
        ok &= tuple(base) == tuple(other) if rs.exact else np.allclose(np.array(base, float), np.array(other, float), atol=1e-9)
        ok &= all(rootsys.pairing(rs, i, base) >= 0 for i in range(rs.n_roots)) if rs.exact else True
    return [exact_record("rootsys.chamber_projection_invariance", ok)]


@check("polyalg.operators", "symbolic", ("polyalg.dunkl_T", "polyalg.dunkl_L"))
def _operators(ctx):
    rs = ctx.rs
    d = rs.dim
    deg = _sym_degree(ctx)
    monos = [polyalg.Polynomial.monomial(nu, d) for nu in _monomials(d, deg)]
    comm = all(_same(polyalg.dunkl_T(rs, i, polyalg.dunkl_T(rs, j, p)), polyalg.dunkl_T(rs, j, polyalg.dunkl_T(rs, i, p))) for p in monos for i in range(d) for j in range(i + 1, d))
    lower = True
    for p in monos:
        n = p.space_degree()
        for i in range(d):
            q = polyalg.dunkl_T(rs, i, p)
            lower &= (not q) or (n >= 1 and q.is_homogeneous(n - 1))
    two = all(_same(polyalg.dunkl_L(rs, p), polyalg.dunkl_L_closed(rs, p)) for p in monos)
    lin = all(_null(polyalg.dunkl_L(rs, polyalg.Polynomial.linear_form([1 if j == i else 0 for j in range(d)]))) for i in range(d))
    rs0 = rs.with_multiplicities([0] * len(rs.orbit_classes))
    red = all(_same(polyalg.dunkl_T(rs0, i, p), p.diff(i)) for p in monos for i in range(d)) and all(_same(polyalg.dunkl_L(rs0, p), p.laplacian()) for p in monos)
    return [
        exact_record("polyalg.commutation", comm, {"max_degree": deg}),
        exact_record("polyalg.degree_lowering", lower),
        exact_record("polyalg.generator_two_routes", two),
        exact_record("polyalg.linear_killed", lin),
        exact_record("polyalg.classical_limit", red),
    ]


@check("polyalg.divided_difference", "symbolic", ("polyalg.divided_difference", "polyalg.eval"))
def _divdiff(ctx):
    rs = ctx.rs
    d = rs.dim
    ok = True
    for nu in _monomials(d, 4):
        p = polyalg.Polynomial.monomial(nu, d)
        for r in range(rs.n_roots):
            q = polyalg.divided_difference(rs, r, p)
            back = q * polyalg.Polynomial.linear_form(rs.positive_roots[r]) + polyalg.reflect_poly(rs, r, p)
            ok &= _same(back, p)
    x = tuple(Fraction(int(v), 3) for v in ctx.rng.integers(-9, 10, d))
    p = polyalg.Polynomial.monomial((2,) + (0,) * (d - 1), d, 1) + polyalg.Polynomial.monomial((0,) * d, d, 1, time_exps=(1,))
    ev = p.eval(x, Fraction(3)) == x[0] ** 2 + 3
    return [exact_record("polyalg.divided_difference_reconstruction", ok), exact_record("polyalg.eval_exact", ev)]


@check("density.radial_generator", "symbolic", ("density.radial_generator_check",))
def _radial_generator(ctx):
    ok = all(density.radial_generator_check(ctx.rs, G)["equal"] for G in ([1], [0, 1], [0, 0, 1], [2, -1, 3]))
    return [exact_record("density.radial_generator_identity", ok)]


@check("intertwine.table", "symbolic", ("intertwine.build_intertwine",))
def _table(ctx):
    tb = ctx.table
    rs = ctx.rs
    d = rs.dim
    rel = all(_null(intertwine.defining_relation_defect(tb, nu, i)) for nu in tb.monomials for i in range(d))
    inv = all(tb.is_invertible(n) for n in range(tb.n_max + 1))
    equi = True
    for nu in tb.monomials:
        for r in range(rs.n_roots):
            lhs = tb.apply(polyalg.reflect_poly(rs, r, polyalg.Polynomial.monomial(nu, d)))
            rhs = polyalg.reflect_poly(rs, r, tb.m(nu))
            equi &= _same(lhs, rhs)
    return [
        exact_record("intertwine.defining_relation", rel, {"n_max": tb.n_max}),
        exact_record("intertwine.invertible", inv),
        exact_record("intertwine.equivariance", equi),
    ]


@check("intertwine.hermite", "symbolic", ("intertwine.hermite_Q", "intertwine.classical_hermite"))
def _hermite(ctx):
    tb = ctx.table
    rs = ctx.rs
    classical = True
    for n in range(7):
        h = intertwine.classical_hermite(n)
        classical &= not (h.diff(1) + h.diff(0).diff(0) * Fraction(1, 2))
        classical &= h.substitute(1, 0) == polyalg.Polynomial.monomial((n,), 1, 1)
    harm = True
    start = True
    jumps = True
    lifts = True
    for nu in tb.monomials:
        if not sum(nu):
            continue
        fam = intertwine.hermite_Q(tb, nu)
        harm &= _null(intertwine.harmonicity_defect(rs, fam.Q))
        start &= _same(fam.Q.substitute(rs.dim, 0), tb.m(nu).with_time_vars(1))
        for r in range(rs.n_roots):
            back = fam.jump_quotients[r] * polyalg.Polynomial.linear_form(rs.positive_roots[r], 1) + polyalg.reflect_poly(rs, r, fam.Q)
            jumps &= _same(back, fam.Q)
        if sum(nu) <= 4:
            lifts &= _same(intertwine.space_time_lift(tb, tb.m(nu)), intertwine.heat_lift(rs, tb.m(nu)))
    return [
        exact_record("intertwine.classical_hermite_harmonic", classical),
        exact_record("intertwine.hermite_harmonic", harm),
        exact_record("intertwine.hermite_initial_value", start),
        exact_record("intertwine.jump_integrand_identity", jumps),
        exact_record("intertwine.two_lifts_agree", lifts),
    ]


@check("intertwine.kernel", "symbolic", ("intertwine.dunkl_kernel",))
def _kernel(ctx):
    rs = ctx.rs
    tb = intertwine.build_intertwine(rs, 30 if rs.dim == 1 else 16, exact=False)
    tol = 1e-8
    worst = 0.0
    for _ in range(50):
        x = ctx.rng.uniform(-0.7, 0.7, rs.dim)
        y = ctx.rng.uniform(-0.7, 0.7, rs.dim)
        worst = max(worst, abs(intertwine.dunkl_kernel(tb, x, y, tol) - intertwine.dunkl_kernel(tb, y, x, tol)))
    origin = intertwine.dunkl_kernel(tb, np.zeros(rs.dim), ctx.rng.uniform(-1, 1, rs.dim), tol)
    return [tol_record("intertwine.kernel_symmetry", worst, 2 * tol), tol_record("intertwine.kernel_at_origin", abs(origin - 1.0), FLOAT_TOL)]


# ---------------------------------------------------------------------------
# density


@check("density.weight_and_ck", "density", ("density.weight", "density.compute_ck"))
def _weight_ck(ctx):
    rs = ctx.rs
    y = ctx.rng.normal(size=(20, rs.dim))
    hom = np.max(np.abs(density.weight(rs, 2 * y) / density.weight(rs, y) - 2 ** (2 * float(rs.gamma))))
    recs = [tol_record("density.weight_homogeneity", float(hom), 1e-9)]
    primary = density.compute_ck(rs)
    mc = density.compute_ck(rs, "monte_carlo", n_samples=200_000, seed=ctx.cfg.seed)
    recs.append(mean_record("density.ck_methods_agree", mc.value / primary.value - 1.0, mc.rel_error, 0.0, {"method": primary.method, "value": primary.value}))
    recs.append(Record("density.ck_error_estimate", primary.rel_error < density.CK_MAX_REL_ERROR, primary.rel_error, density.CK_MAX_REL_ERROR, "float"))
    if rs.dim <= 2 and primary.method != "quadrature" and not rs.is_trivial:
        q = density.compute_ck(rs, "quadrature")
        recs.append(tol_record("density.ck_closed_form_vs_quadrature", abs(q.value / primary.value - 1), 1e-8))
    return recs


def _rank1_integrals(ctx_d, x, t):
    def f(y):
        return density.transition_density(ctx_d, [x], [y], t)

    lim = abs(x) + 12 * math.sqrt(t)
    norm = integrate.quad(f, -lim, 0)[0] + integrate.quad(f, 0, lim)[0]
    mean = integrate.quad(lambda y: y * f(y), -lim, 0)[0] + integrate.quad(lambda y: y * f(y), 0, lim)[0]
    return norm, mean


@check("density.rank1", "density", ("density.transition_density", "density.radial_density", "density.w_radial_density"))
def _density_rank1(ctx):
    rs = ctx.rank1
    dc = density.density_context(rs)
    x = float(abs(ctx.cfg.x0[0])) or 1.0
    t = float(ctx.cfg.T)
    norm, mean = _rank1_integrals(dc, x, t)
    recs = [tol_record("density.normalisation", abs(norm - 1), 1e-4), tol_record("density.martingale", abs(mean - x), 1e-4)]
    s = t / 2
    y = -0.4 * x
    lim = x + 12 * math.sqrt(t)
    ck = integrate.quad(lambda z: density.transition_density(dc, [x], [z], s) * density.transition_density(dc, [z], [y], s), -lim, lim, points=[0.0], limit=200)[0]
    recs.append(tol_record("density.chapman_kolmogorov", abs(ck - density.transition_density(dc, [x], [y], t)), 1e-3))
    N = float(rs.bessel_dimension)
    worst = 0.0
    for r in (0.3, 1.0, 2.0):
        marg = density.transition_density(dc, [x], [r], t) + density.transition_density(dc, [x], [-r], t)
        worst = max(worst, abs(marg - density.radial_density(N, x, np.array([r]), t)[0]))
    recs.append(tol_record("density.radial_consistency", worst, 1e-4))
    wn = integrate.quad(lambda z: density.w_radial_density(dc, [x], [z], t), 0, lim)[0]
    recs.append(tol_record("density.w_radial_normalisation", abs(wn - 1), 1e-4))
    pts = ctx.rng.uniform(-2, 2, size=(100, 2))
    pos = all(density.transition_density(dc, [a], [b], t) > 0 for a, b in pts)
    recs.append(exact_record("density.positivity", pos))
    return recs


# ---------------------------------------------------------------------------
# paths


@check("pathsim.martingale_and_radial", "paths", ("pathsim.simulate", "density.radial_density"))
def _paths_basic(ctx):
    p = ctx.paths
    ok = p.accepted
    X = p.final[ok]
    recs = []
    for i in range(ctx.rs.dim):
        recs.append(mean_record(f"pathsim.martingale_x{i + 1}", float(X[:, i].mean()), float(X[:, i].std(ddof=1) / math.sqrt(len(X))), float(ctx.x0[i])))
    N = float(ctx.rs.bessel_dimension)
    F = density.radial_cdf(N, float(np.linalg.norm(ctx.x0)), ctx.cfg.T)
    ks = stats.kstest(np.linalg.norm(X, axis=1), F)
    recs.append(ks_record("pathsim.radial_law", ks.pvalue, ks.statistic, {"bessel_dimension": N}))
    recs.append(Record("pathsim.rejection_rate", p.rejection_rate < REJECTION_MAX, p.rejection_rate, REJECTION_MAX, "float"))
    A = ctx.rs.roots_array[p.jump_root]
    post = p.jump_post()
    Pp = np.einsum("jd,jd->j", post, A)
    Pm = np.einsum("jd,jd->j", p.jump_pre, A)
    valid = bool(np.all(np.abs(Pp + Pm) <= 1e-12 * (1 + np.abs(Pm))))
    recs.append(exact_record("pathsim.jump_is_reflection", valid, {"n_jumps": int(len(A))}))
    return recs


@check("pathsim.decomposition", "paths", ("pathsim.extract_martingales",))
def _decomp(ctx):
    dec = ctx.decomposition
    p = ctx.paths
    ok = p.accepted
    recs = []
    for r in range(ctx.rs.n_roots):
        if ctx.rs.k_array[r] == 0:
            continue
        qv = dec.quad_var[ok, r]
        recs.append(mean_record(f"pathsim.quadratic_variation_root{r + 1}", float(qv.mean()), float(qv.std(ddof=1) / math.sqrt(len(qv))), float(ctx.cfg.T)))
    recs.append(exact_record("pathsim.cross_bracket_zero", bool(np.all(dec.cross_bracket == 0.0))))
    half = pathsim.extract_martingales(ctx.rs, ctx.paths_half)
    r1 = float(np.sqrt(np.mean(np.sum(dec.residual[ok, -1] ** 2, axis=1))))
    ok2 = ctx.paths_half.accepted
    r2 = float(np.sqrt(np.mean(np.sum(half.residual[ok2, -1] ** 2, axis=1))))
    if r1 <= FLOAT_TOL:
        # without jumps the scheme reconstructs X exactly, nothing to refine
        recs.append(tol_record("pathsim.reconstruction_exact", r1, FLOAT_TOL, {"rms_half_dt": r2}))
    else:
        recs.append(Record("pathsim.reconstruction_refinement", r1 / r2 >= math.sqrt(2), r1 / r2, "ratio >= sqrt(2)", "statistical", None, {"rms_dt": r1, "rms_half_dt": r2}))
    return recs


@check("pathsim.jump_functionals", "paths", ("pathsim.estimate_jump_functionals",))
def _jumps(ctx):
    rep = pathsim.estimate_jump_functionals(ctx.rs, ctx.paths)
    m, se = rep["count_minus_compensator_total"]
    if ctx.rs.is_trivial:
        return [exact_record("pathsim.no_jumps_without_multiplicity", rep["jump_count_total"][0] == 0)]
    return [mean_record("pathsim.jump_count_vs_compensator", m, se, 0.0, {"jump_count": rep["jump_count_total"][0]})]


@check("pathsim.zero_multiplicity", "paths", ("pathsim.simulate",))
def _zero_k(ctx):
    rs0 = ctx.rs.with_multiplicities([0] * len(ctx.rs.orbit_classes))
    n = min(ctx.cfg.n_paths, 2000)
    p = pathsim.simulate(rs0, ctx.x0, ctx.cfg.T, ctx.cfg.dt, ctx.cfg.seed, n, record_every=None)
    X = p.final - ctx.x0
    worst = float(np.max(np.abs(X.mean(axis=0))))
    return [
        exact_record("pathsim.k0_no_jumps", len(p.jump_path) == 0),
        Record("pathsim.k0_driftless", worst < 4 * math.sqrt(ctx.cfg.T / n), worst, 4 * math.sqrt(ctx.cfg.T / n), "statistical"),
    ]


@check("pathsim.skew_product", "paths", ("pathsim.simulate_skew_rank1",))
def _skew(ctx):
    rs = ctx.rank1
    k = rs.multiplicity[0]
    if k == 0:
        try:
            pathsim.simulate_skew_rank1(k, 1.0, 1.0, 0.5, 0)
        except pathsim.SimulationError:
            return [exact_record("pathsim.skew_rejects_k0", True)]
        return [exact_record("pathsim.skew_rejects_k0", False)]
    x0 = float(ctx.x0[0]) if ctx.rs.kind == "rank1" else 1.0
    n = ctx.cfg.n_paths
    q = pathsim.simulate_skew_rank1(k, x0, ctx.cfg.T, ctx.cfg.dt, ctx.cfg.seed + 1, n, record_every=None, workers=ctx.cfg.workers)
    if ctx.rs.kind == "rank1":
        ref = ctx.paths
    else:
        ref = pathsim.simulate(rs, [x0], ctx.cfg.T, ctx.cfg.dt, ctx.cfg.seed, n, record_every=None, workers=ctx.cfg.workers)
    ks = stats.ks_2samp(ref.final[ref.accepted, 0], q.final[:, 0])
    F = density.radial_cdf(float(rs.bessel_dimension), abs(x0), ctx.cfg.T)
    ks1 = stats.kstest(np.abs(q.final[:, 0]), F)
    return [ks_record("pathsim.skew_vs_euler", ks.pvalue, ks.statistic), ks_record("pathsim.skew_radial_law", ks1.pvalue, ks1.statistic)]


@check("pathsim.ito_residual", "paths", ("pathsim.ito_residual_check",))
def _ito(ctx):
    if ctx.rs.dim > 2:
        return [Record("pathsim.ito_residual_skipped", True, "skipped", "d <= 2", "exact", None, {"reason": "paths not recorded for d > 2"})]
    nu = (1,) + (0,) * (ctx.rs.dim - 1)
    res = pathsim.ito_residual_check(ctx.rs, ctx.table, ctx.paths, nu, ctx.decomposition)[ctx.paths.accepted]
    recon = ctx.decomposition.residual[ctx.paths.accepted, -1, 0] / float(1 + 2 * ctx.rank1.multiplicity[0]) if ctx.rs.kind == "rank1" else None
    detail = {"mean_residual": float(res.mean())}
    if recon is not None:
        gap = float(np.max(np.abs(res - np.abs(recon))))
        return [tol_record("pathsim.ito_linear_equals_reconstruction", gap, 1e-9, detail)]
    return [Record("pathsim.ito_residual_small", float(res.mean()) < 10 * math.sqrt(ctx.cfg.dt), float(res.mean()), 10 * math.sqrt(ctx.cfg.dt), "float", None, detail)]


# ---------------------------------------------------------------------------
# hermite


@check("chaos.hermite_martingale", "hermite", ("chaos.hermite_martingale_check",))
def _hermite_mart(ctx):
    recs = []
    T = ctx.cfg.T
    s = T / 2 if ctx.paths.stride * 2 <= len(ctx.paths.times) else None
    for n in range(1, 3):
        for nu in polyalg.monomials_of_degree(ctx.rs.dim, n):
            if s is None:
                rep = _terminal_hermite(ctx, nu)
            else:
                rep = chaos.hermite_martingale_check(ctx.paths, ctx.table, nu, _grid_time(ctx, s), T)
            m, se = rep["mean"]
            label = "".join(str(v) for v in nu)
            recs.append(mean_record(f"chaos.hermite_mean_nu{label}", m, se, rep["target"]))
            for g, (cm, cse) in rep["conditional"]:
                recs.append(mean_record(f"chaos.hermite_conditional_nu{label}_g{g}", cm, cse, 0.0))
    return recs


def _grid_time(ctx, s):
    h = ctx.paths.times[1] - ctx.paths.times[0]
    return round(s / h) * h


def _terminal_hermite(ctx, nu):
    fam = intertwine.hermite_Q(ctx.table, nu)
    X = ctx.paths.final[ctx.paths.accepted]
    m = ctx.table.m(nu).evaluate(X)
    target = float(fam.Q.evaluate(ctx.x0.reshape(1, -1), np.array([-ctx.cfg.T]))[0])
    return {"mean": (float(m.mean()), float(m.std(ddof=1) / math.sqrt(len(m)))), "target": target, "conditional": []}


# ---------------------------------------------------------------------------
# chaos


def _specs(ctx):
    d = ctx.rs.dim
    e1 = (1,) + (0,) * (d - 1)
    e2 = (2,) + (0,) * (d - 1)
    T = Fraction(str(ctx.cfg.T))
    half = Fraction(str(_grid_time(ctx, ctx.cfg.T / 2))) if ctx.rs.dim <= 2 else T / 2
    return [chaos.FunctionalSpec((T,), (e1,)), chaos.FunctionalSpec((T,), (e2,)), chaos.FunctionalSpec((half, T), (e1, e1))]


@check("chaos.expansion_exact", "chaos", ("chaos.chaos_expand",))
def _chaos_exact(ctx):
    peel = True
    lifts = True
    x0 = [Fraction(str(v)) for v in ctx.cfg.x0]
    for sp in _specs(ctx):
        e = chaos.chaos_expand(ctx.table, sp, x0)
        for eps, G in e.first_peel.items():
            ref = chaos.first_peel_reference(ctx.table, sp, eps)
            peel &= _same(G, ref)
        other = chaos.chaos_expand(ctx.table, sp, x0, lift="heat")
        lifts &= e.canonical() == other.canonical() if ctx.table.exact and not e.has_float else e.almost_equal(other, FLOAT_TOL)
    return [exact_record("chaos.first_peel_matches_hermite_integrands", peel), exact_record("chaos.table_and_heat_lifts_agree", lifts)]


@check("chaos.isometry", "chaos", ("chaos.isometry_check", "chaos.iterated_integral"))
def _chaos_mc(ctx):
    if ctx.rs.dim > 2:
        return [Record("chaos.isometry_skipped", True, "skipped", "d <= 2", "exact", None, {"reason": "paths not recorded for d > 2"})]
    recs = []
    x0 = [Fraction(str(v)) for v in ctx.cfg.x0]
    for sp in _specs(ctx):
        e = chaos.chaos_expand(ctx.table, sp, x0)
        rep = chaos.isometry_check(ctx.paths, ctx.decomposition, e, ctx.table)
        tag = ";".join(f"{t}:{''.join(map(str, nu))}" for t, nu in zip(sp.times, sp.nus))
        recs.append(_reconstruction_record(ctx, f"chaos.reconstruction[{tag}]", e, rep))
        for tr in rep["terms"]:
            idx = ",".join(map(str, tr["indices"]))
            recs.append(mean_record(f"chaos.isometry[{tag}][{idx}]", *tr["second_moment"], tr["norm_sq"]))
            recs.append(mean_record(f"chaos.zero_mean[{tag}][{idx}]", *tr["mean"], 0.0))
        for pr in rep["pairs"]:
            a = ",".join(map(str, pr["a"]))
            b = ",".join(map(str, pr["b"]))
            recs.append(mean_record(f"chaos.orthogonality[{tag}][{a}|{b}]", *pr["product"], 0.0))
    return recs


def _reconstruction_record(ctx, name, expansion, rep) -> Record:
    """Residual mean within 4 SE of zero; failing that, the Richardson
    extrapolation 2 m(dt) - m(2 dt) must be.  The residual carries an O(dt)
    discretisation bias which a wrong expansion would not lose under
    extrapolation."""
    m, se = rep["residual_mean"]
    detail = {"second_moment": rep["residual_second_moment"][0]}
    rec = mean_record(name, m, se, 0.0, detail)
    coarse = ctx.paths_coarse
    if rec.passed or coarse is None or any(not _on_grid(coarse, t) for t in expansion.spec.times):
        return rec
    dec = pathsim.extract_martingales(ctx.rs, coarse)
    m2, se2 = chaos.isometry_check(coarse, dec, expansion, ctx.table)["residual_mean"]
    ext, ext_se = 2 * m - m2, math.sqrt(4 * se**2 + se2**2)
    detail.update({"raw_mean": m, "raw_se": se, "mean_2dt": m2, "se_2dt": se2, "richardson": True})
    return mean_record(name, ext, ext_se, 0.0, detail)


def _on_grid(path, t) -> bool:
    h = path.times[1] - path.times[0]
    return abs(float(t) / h - round(float(t) / h)) < 1e-9


@check("chaos.predictability", "chaos", ("chaos.iterated_integral",))
def _predictable(ctx):
    if ctx.rs.dim > 2 or ctx.rs.is_trivial:
        return [Record("chaos.predictability_skipped", True, "skipped", "jumps present", "exact", None, {})]
    d = ctx.rs.dim
    r = int(np.flatnonzero(ctx.rs.k_array > 0)[0])
    eps = d + r + 1
    T = Fraction(str(ctx.cfg.T))
    one = Polynomial.constant(1, 0, 2)
    term = chaos.ChaosTerm((eps, eps), ((((Fraction(0), T), (Fraction(0), None)), one),))
    ok = ctx.paths.accepted
    left = chaos.iterated_integral(ctx.paths, ctx.decomposition, term)[ok]
    right = chaos.iterated_integral(ctx.paths, ctx.decomposition, term, convention="right")[ok]
    se = float(left.std(ddof=1) / math.sqrt(len(left)))
    rec = mean_record("chaos.left_limit_mean_zero", float(left.mean()), se, 0.0, {"right_convention_mean": float(right.mean())})
    lin = chaos.iterated_integral(ctx.paths, ctx.decomposition, chaos.ChaosTerm((eps, eps), ((term.pieces[0][0], one * 3),)))[ok]
    return [rec, tol_record("chaos.linearity", float(np.max(np.abs(lin - 3 * left))), 1e-9 * (1 + float(np.max(np.abs(left)))))]


# ---------------------------------------------------------------------------
# CLI plumbing (checked through temporary directories)


@check("cli.fixtures_idempotent", "symbolic", ("cli.dump_fixtures",))
def _fixtures(ctx):
    from .cli import dump_fixtures

    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        fa = dump_fixtures(ctx.cfg, a, n_max=3)
        fb = dump_fixtures(ctx.cfg, b, n_max=3)
        same = [open(os.path.join(a, f), "rb").read() == open(os.path.join(b, f), "rb").read() for f in fa]
        return [exact_record("cli.fixtures_idempotent", fa == fb and all(same), {"files": len(fa)})]


@check("cli.simulate_outputs", "paths", ("cli.simulate_cmd",))
def _simulate_cmd(ctx):
    from .cli import PATH_HEADER, simulate_cmd

    cfg = ctx.cfg
    small = type(cfg)(**{**cfg.__dict__, "n_paths": 1})
    with tempfile.TemporaryDirectory() as a:
        files = simulate_cmd(small, a)
        with open(os.path.join(a, files[0])) as fh:
            head = fh.readline().strip()
    expected = ",".join(PATH_HEADER(ctx.rs.dim))
    return [exact_record("cli.path_csv_header", head == expected, {"header": head})]


def checks_for(suite: str) -> list[Check]:
    if suite == "all":
        return list(REGISTRY)
    return [c for c in REGISTRY if c.suite == suite]
