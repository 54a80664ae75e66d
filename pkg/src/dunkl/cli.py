"""Command line entry points: run, fixtures, simulate, density, expand, verify.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors. ``DUNKL_OUTPUT_DIR`` overrides the configured output
directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from dataclasses import replace
from fractions import Fraction
from importlib import metadata

import numpy as np

from . import chaos, checks, density, intertwine, pathsim, polyalg
from .config import SUITES, ConfigError, ExperimentConfig, load

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
REPORT_NAME = "report.json"
TIMINGS_NAME = "timings.json"


def PATH_HEADER(d: int) -> list[str]:
    return ["t"] + [f"x{i + 1}" for i in range(d)] + ["jump_flag", "jump_root"]


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, Fraction):
        return str(v)
    if v is None or isinstance(v, str):
        return v
    return str(v)


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# run


def run_suite(cfg: ExperimentConfig, suite: str = "all") -> tuple[dict, dict]:
    """Execute the checks of ``suite``; returns (report, timings).

    The report holds no wall-clock data so that it is byte-reproducible;
    per-check timings go to a separate dictionary.
    """
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}")
    ctx = checks.Context(cfg)
    records, timings, touched = [], {}, set()
    for c in checks.checks_for(suite):
        t0 = time.perf_counter()
        try:
            out = c.fn(ctx)
        except Exception as exc:  # a crashing check is a failing check
            out = [checks.Record(c.name, False, "error", "no exception", "exact", None, {"error": f"{type(exc).__name__}: {exc}"})]
        timings[c.name] = time.perf_counter() - t0
        touched.update(c.ops)
        records += [r.as_dict(c.suite, c.ops) for r in out]
    if suite == "all":
        touched.add("cli.run_suite")
        missing = sorted(set(checks.ALL_OPS) - touched)
        rec = checks.exact_record("registry.coverage", not missing, {"missing": missing, "n_ops": len(checks.ALL_OPS)})
        records.append(rec.as_dict("all", ("cli.run_suite",)))
    names = [r["name"] for r in records]
    if len(names) != len(set(names)):
        raise RuntimeError("duplicate check names in report")
    n_failed = sum(not r["passed"] for r in records)
    report = {
        "fingerprint": {"seed": cfg.seed, "version": version(), "config_digest": cfg.digest(), "suite": suite},
        "config": replace(cfg, output_dir="-", workers=1).dumps(),
        "checks": records,
        "n_checks": len(records),
        "n_failed": n_failed,
        "passed": n_failed == 0,
    }
    env = {"python": platform.python_version(), "numpy": np.__version__, "total_seconds": sum(timings.values())}
    return report, {"checks": timings, "environment": env}


def _cmd_run(args) -> int:
    cfg = load(args.config)
    out = _ensure_dir(cfg.resolved_output_dir)
    suites = [args.suite] if args.suite else list(cfg.suites)
    ok = True
    for s in suites:
        report, timings = run_suite(cfg, s)
        name = REPORT_NAME if len(suites) == 1 else f"report_{s}.json"
        _write(os.path.join(out, name), dumps_json(report))
        _write(os.path.join(out, name.replace("report", "timings")), dumps_json(timings))
        for r in report["checks"]:
            if not args.quiet or not r["passed"]:
                print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}  stat={_jsonable(r['statistic'])}")
        print(f"suite={s}: {report['n_checks'] - report['n_failed']}/{report['n_checks']} passed")
        ok &= report["passed"]
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# fixtures


def _nu_tag(nu) -> str:
    return "_".join(str(v) for v in nu)


def dump_fixtures(cfg: ExperimentConfig, out_dir: str | None = None, n_max: int | None = None) -> list[str]:
    """Write m_nu, Q_nu and the Hermite integrands for every |nu| <= n_max.

    Files live in ``<out>/fixtures/<system>/`` where the system id includes
    the multiplicities; returns the relative file names in sorted order.
    """
    rs = cfg.root_system()
    n_max = cfg.n_max if n_max is None else n_max
    table = intertwine.build_intertwine(rs, n_max)
    sysid = rs.describe().replace("[", "_").replace("]", "").replace("=", "").replace(",", "-").replace("/", "over")
    base = os.path.join(out_dir or cfg.resolved_output_dir, "fixtures", sysid)
    _ensure_dir(base)
    written = []
    for n in range(n_max + 1):
        for nu in polyalg.monomials_of_degree(rs.dim, n):
            fam = intertwine.hermite_Q(table, nu)
            tag = _nu_tag(nu)
            files = {f"m_{tag}.txt": table.m(nu).canonical(), f"Q_{tag}.txt": fam.Q.canonical()}
            for e in range(rs.dim + rs.n_roots):
                files[f"dQ_{tag}_eps{e + 1}.txt"] = fam.integrand(e).canonical()
            for name, text in files.items():
                _write(os.path.join(base, name), text + "\n")
                written.append(os.path.join("fixtures", sysid, name))
    return sorted(written)


def _cmd_fixtures(args) -> int:
    cfg = load(args.config)
    files = dump_fixtures(cfg, n_max=args.n_max)
    print(f"wrote {len(files)} fixture files under {os.path.join(cfg.resolved_output_dir, os.path.dirname(files[0]))}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def simulate_cmd(cfg: ExperimentConfig, out_dir: str | None = None, n_dump: int = 10) -> list[str]:
    """Simulate ``cfg.n_paths`` paths; write up to ``n_dump`` path and
    decomposition CSVs, the jump log and a summary."""
    rs = cfg.root_system()
    out = _ensure_dir(out_dir or cfg.resolved_output_dir)
    path = pathsim.simulate(rs, np.array(cfg.x0), cfg.T, cfg.dt, cfg.seed, cfg.n_paths, wall_factor=cfg.wall_factor, workers=cfg.workers)
    dec = pathsim.extract_martingales(rs, path)
    files = []
    for i in range(min(n_dump, path.n_paths)):
        name = f"path_{i:05d}.csv"
        pathsim.write_path_csv(path, i, os.path.join(out, name))
        files.append(name)
        name = f"decomposition_{i:05d}.csv"
        pathsim.write_decomposition_csv(path, dec, i, os.path.join(out, name))
        files.append(name)
    pathsim.write_jump_log_csv(path, os.path.join(out, "jumps.csv"))
    files.append("jumps.csv")
    summary = {
        "fingerprint": {"seed": cfg.seed, "version": version(), "config_digest": cfg.digest()},
        "n_paths": path.n_paths,
        "rejected": int(path.rejected.sum()),
        "clipped_steps": int(np.sum(path.clipped)),
        "jump_count_total": int(len(path.jump_path)),
        "functionals": pathsim.estimate_jump_functionals(rs, path),
    }
    _write(os.path.join(out, "simulation.json"), dumps_json(summary))
    files.append("simulation.json")
    return files


def _cmd_simulate(args) -> int:
    cfg = load(args.config)
    files = simulate_cmd(cfg, n_dump=args.dump)
    print(f"wrote {len(files)} files to {cfg.resolved_output_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# density


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def density_grid(cfg: ExperimentConfig, x, t: float, n: int = 201, half_width: float | None = None) -> tuple[list[str], np.ndarray]:
    rs = cfg.root_system()
    x = np.asarray(x, float)
    if x.shape != (rs.dim,):
        raise ConfigError(f"--x needs {rs.dim} coordinates")
    if t <= 0:
        raise ConfigError("--t must be positive")
    if rs.dim > 2:
        raise ConfigError("density grids are written for d <= 2 only")
    L = half_width or float(np.max(np.abs(x))) + 5 * math.sqrt(t)
    ctx = density.density_context(rs)
    g = np.linspace(-L, L, n)
    if rs.dim == 1:
        Y = g[:, None]
        head = ["y1", "p"]
    else:
        Y = np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T
        head = ["y1", "y2", "p"]
    p = np.array([density.transition_density(ctx, x, y, t) for y in Y])
    return head, np.column_stack([Y, p])


def _cmd_density(args) -> int:
    cfg = load(args.config)
    head, rows = density_grid(cfg, _floats(args.x), float(args.t), args.n, args.half_width)
    out = _ensure_dir(cfg.resolved_output_dir)
    name = os.path.join(out, "density.csv")
    with open(name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    print(f"wrote {len(rows)} rows to {name}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# expand and verify chaos


def _spec_from_args(cfg: ExperimentConfig, nus: list[str], times: str | None) -> chaos.FunctionalSpec:
    d = cfg.root_system().dim
    parsed = []
    for s in nus:
        try:
            nu = tuple(int(v) for v in s.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad multi-index {s!r}") from exc
        if len(nu) != d:
            raise ConfigError(f"multi-index {s!r} needs {d} entries")
        parsed.append(nu)
    ts = [Fraction(v.strip()) for v in times.split(",")] if times else [Fraction(str(cfg.T))]
    if len(ts) != len(parsed):
        raise ConfigError("--times needs one time per --nu")
    try:
        return chaos.FunctionalSpec(tuple(ts), tuple(parsed))
    except chaos.ChaosError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_expand(args) -> int:
    cfg = load(args.config)
    spec = _spec_from_args(cfg, args.nu, args.times)
    table = intertwine.build_intertwine(cfg.root_system(), max(spec.total_degree, 1))
    exp = chaos.chaos_expand(table, spec, [Fraction(str(v)) for v in cfg.x0])
    text = exp.canonical()
    print(text)
    out = _ensure_dir(cfg.resolved_output_dir)
    _write(os.path.join(out, "expansion.txt"), text + "\n")
    return EXIT_OK


def verify_chaos(cfg: ExperimentConfig, spec: chaos.FunctionalSpec | None = None) -> dict:
    """Isometry and orthogonality report for one spec, or the default specs."""
    ctx = checks.Context(cfg)
    specs = [spec] if spec is not None else checks._specs(ctx)
    x0 = [Fraction(str(v)) for v in cfg.x0]
    out = []
    for sp in specs:
        table = intertwine.build_intertwine(ctx.rs, max(sp.total_degree, 1))
        exp = chaos.chaos_expand(table, sp, x0)
        rep = chaos.isometry_check(ctx.paths, ctx.decomposition, exp, table)
        out.append({"times": [str(t) for t in sp.times], "nus": [list(nu) for nu in sp.nus], "report": rep})
    return {"fingerprint": {"seed": cfg.seed, "version": version(), "config_digest": cfg.digest()}, "specs": out}


def _cmd_verify(args) -> int:
    cfg = load(args.config)
    spec = _spec_from_args(cfg, args.nu, args.times) if args.nu else None
    text = dumps_json(verify_chaos(cfg, spec))
    out = _ensure_dir(cfg.resolved_output_dir)
    _write(os.path.join(out, "chaos_report.json"), text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dunkl", description="Dunkl process toolkit and verification suites")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a verification suite and write report.json")
    r.add_argument("--config", required=True)
    r.add_argument("--suite", choices=SUITES, default=None, help="defaults to the suites listed in the config")
    r.add_argument("--quiet", action="store_true", help="print failing checks only")
    r.set_defaults(fn=_cmd_run)

    f = sub.add_parser("fixtures", help="dump m_nu, Q_nu and integrand polynomials")
    f.add_argument("--config", required=True)
    f.add_argument("--n-max", type=int, default=None)
    f.set_defaults(fn=_cmd_fixtures)

    s = sub.add_parser("simulate", help="simulate paths and write CSV series")
    s.add_argument("--config", required=True)
    s.add_argument("--dump", type=int, default=10, help="number of paths written as CSV")
    s.set_defaults(fn=_cmd_simulate)

    d = sub.add_parser("density", help="write a transition density grid as CSV")
    d.add_argument("--config", required=True)
    d.add_argument("--x", required=True, help="start point, comma separated")
    d.add_argument("--t", required=True, type=float)
    d.add_argument("--n", type=int, default=201, help="grid points per axis")
    d.add_argument("--half-width", type=float, default=None)
    d.set_defaults(fn=_cmd_density)

    e = sub.add_parser("expand", help="print the chaos expansion of a polynomial functional")
    e.add_argument("--config", required=True)
    e.add_argument("--nu", action="append", required=True, help="multi-index, comma separated; repeat per time")
    e.add_argument("--times", default=None, help="observation times, comma separated (default T)")
    e.set_defaults(fn=_cmd_expand)

    v = sub.add_parser("verify", help="emit a verification report as JSON")
    v.add_argument("target", choices=["chaos"])
    v.add_argument("--config", required=True)
    v.add_argument("--nu", action="append", default=None)
    v.add_argument("--times", default=None)
    v.set_defaults(fn=_cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
