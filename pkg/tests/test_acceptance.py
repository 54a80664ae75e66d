"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one PASS/FAIL line; conftest prints them in the terminal
summary. Running this file as a script prints the same lines.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import integrate, stats

from dunkl import chaos, checks, cli, density, intertwine, pathsim, polyalg, rootsys
from dunkl.config import ExperimentConfig
from dunkl.field import QSqrt2
from dunkl.polyalg import Polynomial

try:
    from conftest import CRITERIA
except ImportError:  # run as a script
    CRITERIA = {}

SE = checks.SE_FACTOR
KS_P = checks.KS_PVALUE
N_PATHS = 10_000

SYMBOLIC_SYSTEMS = [
    ("rank1", 1, (1,)),
    ("rank1", 1, (F(3, 5),)),
    ("product_of_rank1", 2, (1, F(1, 2))),
    ("product_of_rank1", 3, (1, 2, F(1, 3))),
    ("A2", None, (F(1, 2),)),
    ("B", 2, (1, F(1, 2))),
]


def record(n: int, ok: bool, summary: str, t0: float) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {summary}  [{time.perf_counter() - t0:.1f} s]"
    CRITERIA[n] = line
    print(line)


def z(mean, se, target=0.0):
    return abs(mean - target) / se if se > 0 else (0.0 if mean == target else math.inf)


def monomials(d, n_max):
    return [Polynomial.monomial(nu, d) for n in range(n_max + 1) for nu in polyalg.monomials_of_degree(d, n)]


# ---------------------------------------------------------------------------


def test_criterion_01_exact_operators():
    t0 = time.perf_counter()
    failures = []
    for kind, dim, ks in SYMBOLIC_SYSTEMS:
        rs = rootsys.build(kind, dim, ks)
        assert rs.exact
        d = rs.dim
        rs0 = rs.with_multiplicities([0] * len(rs.orbit_classes))
        for p in monomials(d, 5):
            T = [polyalg.dunkl_T(rs, i, p) for i in range(d)]
            for i in range(d):
                for j in range(i + 1, d):
                    if polyalg.dunkl_T(rs, i, T[j]) != polyalg.dunkl_T(rs, j, T[i]):
                        failures.append((rs.describe(), "commute", p))
                n = p.space_degree()
                if T[i] and not (n >= 1 and T[i].is_homogeneous(n - 1)):
                    failures.append((rs.describe(), "degree", p))
                if polyalg.dunkl_T(rs0, i, p) != p.diff(i):
                    failures.append((rs.describe(), "k=0", p))
            if polyalg.dunkl_L(rs, p) != polyalg.dunkl_L_closed(rs, p):
                failures.append((rs.describe(), "two L", p))
            if polyalg.dunkl_L(rs0, p) != p.laplacian():
                failures.append((rs.describe(), "k=0 L", p))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10
    record(1, ok, f"{len(SYMBOLIC_SYSTEMS)} systems, degrees <= 5, {len(failures)} exact mismatches", t0)
    assert not failures, failures[:5]
    assert elapsed < 10


def test_criterion_02_intertwining():
    t0 = time.perf_counter()
    bad = []
    for kind, dim, ks, n_max in (("rank1", 1, (1,), 8), ("rank1", 1, (F(3, 5),), 8), ("B", 2, (1, F(1, 2)), 5), ("B", 2, (1, 1), 5)):
        rs = rootsys.build(kind, dim, ks)
        tb = intertwine.build_intertwine(rs, n_max)
        assert tb.exact
        for nu in tb.monomials:
            for i in range(rs.dim):
                if intertwine.defining_relation_defect(tb, nu, i):
                    bad.append((rs.describe(), nu, i))
        bad += [(rs.describe(), "singular", n) for n in range(n_max + 1) if not tb.is_invertible(n)]
    for k in (F(1), F(3, 5), F(2), F(1, 2)):
        tb = intertwine.build_intertwine(rootsys.build("rank1", 1, (k,)), 2)
        x = Polynomial.var(0, 1)
        if tb.m((1,)) != x * (1 / (1 + 2 * k)) or tb.m((2,)) != x * x * (1 / (1 + 2 * k)):
            bad.append(("rank1 values", k))
    elapsed = time.perf_counter() - t0
    record(2, not bad and elapsed < 60, f"defining relation, invertibility and rank-1 values; {len(bad)} failures", t0)
    assert not bad, bad[:5]
    assert elapsed < 60


def test_criterion_03_harmonicity():
    t0 = time.perf_counter()
    bad = []
    count = 0
    for kind, dim, ks in SYMBOLIC_SYSTEMS:
        rs = rootsys.build(kind, dim, ks)
        tb = intertwine.build_intertwine(rs, 8 if rs.dim == 1 else 5 if rs.dim == 2 else 4)
        for nu in tb.monomials:
            Q = intertwine.hermite_Q(tb, nu).Q
            count += 1
            if intertwine.harmonicity_defect(rs, Q):
                bad.append((rs.describe(), nu))
    elapsed = time.perf_counter() - t0
    record(3, not bad and elapsed < 30, f"(d/dt + L_k/2) Q_nu = 0 for {count} (system, nu) pairs; {len(bad)} failures", t0)
    assert not bad, bad[:5]
    assert elapsed < 30


def test_criterion_04_density():
    t0 = time.perf_counter()
    rows = []
    ok = True
    x, t = 1.0, 1.0
    for k in (F(3, 5), F(1), F(2)):
        rs = rootsys.build("rank1", 1, (k,))
        ctx = density.density_context(rs)

        def p(y, s=t, x=x):
            return density.transition_density(ctx, [x], [y], s)

        L = 9.0  # Gaussian tail beyond is below 1e-13
        norm = integrate.quad(p, -L, 0, epsabs=1e-13)[0] + integrate.quad(p, 0, L, epsabs=1e-13)[0]
        mean = integrate.quad(lambda y: y * p(y), -L, 0, epsabs=1e-13)[0] + integrate.quad(lambda y: y * p(y), 0, L, epsabs=1e-13)[0]
        ck_err = 0.0
        for yy in (-1.3, 0.4, 2.0):
            inner = integrate.quad(lambda z: p(z, 0.4) * density.transition_density(ctx, [z], [yy], 0.6), -L, L, points=[0.0], limit=200, epsabs=1e-12)[0]
            ck_err = max(ck_err, abs(inner - p(yy)))
        closed = density.compute_ck(rs, "closed_form_rank1_product").value
        quad = density.compute_ck(rs, "quadrature").value
        c_rel = abs(closed / quad - 1)
        good = abs(norm - 1) < 1e-4 and abs(mean - x) < 1e-4 and ck_err < 1e-3 and c_rel < 1e-8
        ok &= good
        rows.append(f"k={k}: |norm-1|={abs(norm - 1):.1e} |mean-x|={abs(mean - x):.1e} CK={ck_err:.1e} c_k={c_rel:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    record(4, ok, "; ".join(rows), t0)
    assert ok


RADIAL_CASES = [
    ("rank1", 1, (F(3, 5),), (1.0,)),
    ("rank1", 1, (1,), (1.0,)),
    ("rank1", 1, (2,), (1.0,)),
    ("product_of_rank1", 2, (1, 1), (1.0, -0.5)),
    ("B", 2, (1, 1), (1.0, 0.5)),
]


def test_criterion_05_radial_law():
    t0 = time.perf_counter()
    rows, ok = [], True
    for i, (kind, dim, ks, x0) in enumerate(RADIAL_CASES):
        rs = rootsys.build(kind, dim, ks)
        path = pathsim.simulate(rs, x0, 1.0, 5e-4, 20_000 + i, N_PATHS, record_every=None, workers=4)
        r = np.linalg.norm(path.final[path.accepted], axis=1)
        cdf = density.radial_cdf(float(rs.bessel_dimension), float(np.linalg.norm(x0)), 1.0)
        p = stats.kstest(r, cdf).pvalue
        ok &= p > KS_P
        rows.append(f"{rs.describe()} p={p:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    record(5, ok, "KS |X_1| vs BES(2 gamma + d): " + ", ".join(rows), t0)
    assert ok


def test_criterion_06_martingale_decomposition():
    t0 = time.perf_counter()
    rows, ok = [], True
    for kind, dim, ks, x0 in (("rank1", 1, (1,), (1.0,)), ("B", 2, (1, 1), (1.0, 0.5))):
        rs = rootsys.build(kind, dim, ks)
        rms = []
        for dt in (1e-3, 5e-4):
            path = pathsim.simulate(rs, x0, 1.0, dt, 606, N_PATHS, record_every=None, workers=4)
            dec = pathsim.extract_martingales(rs, path)
            acc = path.accepted
            rms.append(float(np.sqrt(np.mean(np.sum(dec.residual[acc, -1] ** 2, axis=1)))))
            if dt == 1e-3:
                X = path.final[acc]
                zs = [z(X[:, i].mean(), X[:, i].std(ddof=1) / math.sqrt(len(X)), x0[i]) for i in range(rs.dim)]
                qv = dec.quad_var[acc]
                zq = [z(qv[:, r].mean(), qv[:, r].std(ddof=1) / math.sqrt(len(qv)), 1.0) for r in range(rs.n_roots)]
                cross = float(np.max(np.abs(dec.cross_bracket))) if dec.cross_bracket.size else 0.0
        ratio = rms[0] / rms[1]
        good = max(zs) <= SE and max(zq) <= SE and cross == 0.0 and ratio >= math.sqrt(2)
        ok &= good
        rows.append(f"{rs.describe()}: max z(E X)={max(zs):.2f}, max z(QV)={max(zq):.2f}, cross={cross}, residual ratio={ratio:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    record(6, ok, "; ".join(rows), t0)
    assert ok


def test_criterion_07_skew_product():
    t0 = time.perf_counter()
    rows, ok = [], True
    for i, k in enumerate((F(3, 5), F(1), F(2))):
        rs = rootsys.build("rank1", 1, (k,))
        a = pathsim.simulate(rs, [1.0], 1.0, 5e-4, 700 + i, N_PATHS, record_every=None, workers=4)
        b = pathsim.simulate_skew_rank1(k, 1.0, 1.0, 5e-4, 710 + i, N_PATHS, record_every=None, workers=4)
        p = stats.ks_2samp(a.final[a.accepted, 0], b.final[:, 0]).pvalue
        ok &= p > KS_P
        rows.append(f"k={k} p={p:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    record(7, ok, "two-sample KS generic vs skew product: " + ", ".join(rows), t0)
    assert ok


def test_criterion_08_jump_functionals():
    t0 = time.perf_counter()
    rs1 = rootsys.build("rank1", 1, (1,))
    study = pathsim.refinement_study(rs1, [1.0], 1.0, 2e-3, 808, N_PATHS, levels=2, workers=4)
    last = study["reports"][-1]["roots"][0]
    m, se = last["count_minus_compensator"]
    zc = z(m, se)
    row = study["roots"][0]
    stable = row["inv_abs"]["stable"] and row["inv_sq"]["stable"]
    rs4 = rootsys.build("rank1", 1, (F(1, 4),))
    low = pathsim.refinement_study(rs4, [1.0], 1.0, 2e-3, 809, 4000, levels=3, workers=4, on_collapse="clip", max_depth=6)
    lrow = low["roots"][0]["inv_sq"]
    grows = (not lrow["stable"]) and all(b > a for a, b in zip(lrow["values"], lrow["values"][1:]))
    ok = zc <= SE and stable and grows
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    summary = (
        f"k=1: z(count - compensator)={zc:.2f}, rel change int 1/|P| {row['inv_abs']['rel_change']:.3f}, int 1/P^2 {row['inv_sq']['rel_change']:.3f}; "
        f"k=1/4: int 1/P^2 = {', '.join(f'{v:.2f}' for v in lrow['values'])} (last change {lrow['rel_change']:.2f})"
    )
    record(8, ok, summary, t0)
    assert ok


def test_criterion_09_hermite_martingale():
    t0 = time.perf_counter()
    rows, ok, worst = [], True, 0.0
    target_42 = None
    for i, (kind, dim, ks, x0) in enumerate((("rank1", 1, (1,), (1.0,)), ("product_of_rank1", 2, (1, 1), (1.0, -0.5)))):
        rs = rootsys.build(kind, dim, ks)
        tb = intertwine.build_intertwine(rs, 3)
        path = pathsim.simulate(rs, x0, 1.0, 5e-4, 900 + i, N_PATHS, record_every=1000, workers=4)
        for nu in tb.monomials:
            if not sum(nu):
                continue
            rep = chaos.hermite_martingale_check(path, tb, nu, 0.5, 1.0)
            zz = z(*rep["mean"], rep["target"])
            worst = max(worst, zz)
            ok &= zz <= SE
            if rs.kind == "rank1" and nu == (2,):
                target_42 = rep["target"]
                rows.append(f"rank1 k=1 nu=(2): mean {rep['mean'][0]:.4f} +- {rep['mean'][1]:.4f}, target {rep['target']:.6f}")
    ok &= target_42 is not None and abs(target_42 - 4 / 3) < 1e-12
    exact = intertwine.hermite_Q(intertwine.build_intertwine(rootsys.build("rank1", 1, (1,)), 2), (2,)).Q.eval((F(1),), F(-1))
    ok &= exact == F(4, 3)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    rows.append(f"max z over |nu| <= 3 = {worst:.2f}; exact Q_(2)(1,-1) = {exact}")
    record(9, ok, "; ".join(rows), t0)
    assert ok


def test_criterion_10_chaos():
    t0 = time.perf_counter()
    rs = rootsys.build("rank1", 1, (1,))
    tb = intertwine.build_intertwine(rs, 4)
    specs = [
        chaos.FunctionalSpec((F(1),), ((1,),)),
        chaos.FunctionalSpec((F(1),), ((2,),)),
        chaos.FunctionalSpec((F(1, 2), F(1)), ((1,), (1,))),
    ]
    paths = {dt: pathsim.simulate(rs, [1.0], 1.0, dt, 1010, N_PATHS, workers=4) for dt in (1e-3, 5e-4)}
    decs = {dt: pathsim.extract_martingales(rs, p) for dt, p in paths.items()}
    rows, ok, worst = [], True, 0.0
    for sp in specs:
        e = chaos.chaos_expand(tb, sp, [F(1)])
        peel = all(G == chaos.first_peel_reference(tb, sp, eps) for eps, G in e.first_peel.items())
        reps = {dt: chaos.isometry_check(paths[dt], decs[dt], e, tb) for dt in paths}
        rep = reps[5e-4]
        zr = z(*rep["residual_mean"])
        m2 = [reps[dt]["residual_second_moment"][0] for dt in (1e-3, 5e-4)]
        zi = max(z(*t["second_moment"], t["norm_sq"]) for t in rep["terms"])
        zo = max((z(*p["product"]) for p in rep["pairs"]), default=0.0)
        worst = max(worst, zr, zi, zo)
        good = peel and zr <= SE and m2[1] < m2[0] and zi <= SE and zo <= SE
        ok &= good
        tag = ",".join(f"{t}:{nu[0]}" for t, nu in zip(sp.times, sp.nus))
        rows.append(f"[{tag}] {len(e.terms)} terms, E res^2 {m2[0]:.1e}->{m2[1]:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    record(10, ok, "; ".join(rows) + f"; max z = {worst:.2f}; first peel exact", t0)
    assert ok


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    base = dict(kind="rank1", dim=1, multiplicities=(F(1),), x0=(1.0,), T=1.0, dt=0.01, n_paths=2000, seed=1111)
    texts = []
    for workers, out in ((1, "a"), (3, "b")):
        cfg = ExperimentConfig(**base, workers=workers, output_dir=str(tmp_path / out))
        report, _ = cli.run_suite(cfg, "all")
        texts.append(cli.dumps_json(report))
    same = texts[0] == texts[1]
    record(11, same, f"suite=all twice (1 and 3 workers): byte-identical reports = {same}, {len(texts[0])} bytes", t0)
    assert same


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn(Path(tempfile.mkdtemp())) if "tmp_path" in fn.__code__.co_varnames else fn()
            except AssertionError:
                pass
