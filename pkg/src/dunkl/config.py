"""Experiment configuration: an INI file with fixed sections and a canonical form.

Grammar (every key optional except ``kind``)::

    [rootsystem]
    kind = rank1            ; rank1 | product_of_rank1 | A | B | D | I2 (or B2, A(2), I2(5))
    dim = 1
    multiplicities = 1      ; comma separated, one per orbit; rationals like 3/5 allowed

    [process]
    x0 = 1                  ; comma separated coordinates
    T = 1
    dt = 0.001
    n_paths = 10000
    wall_factor = 1

    [intertwine]
    n_max = 8

    [run]
    seed = 12345
    suites = all
    output_dir = out
    workers = 1

The canonical serialisation writes every key, in this order, with floats in
``repr`` form; its SHA-256 is the config digest used in reports.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, replace
from fractions import Fraction

from . import rootsys

OUTPUT_ENV = "DUNKL_OUTPUT_DIR"
SUITES = ("symbolic", "density", "paths", "hermite", "chaos", "all")


class ConfigError(ValueError):
    pass


def _frac_text(v: Fraction) -> str:
    return str(v)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "rank1"
    dim: int | None = 1
    multiplicities: tuple = (Fraction(1),)
    x0: tuple = (1.0,)
    T: float = 1.0
    dt: float = 1e-3
    n_paths: int = 10_000
    wall_factor: float = 1.0
    n_max: int = 8
    seed: int = 12345
    suites: tuple = ("all",)
    output_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.T <= 0 or self.dt <= 0:
            raise ConfigError("T and dt must be positive")
        if self.n_paths < 1 or self.n_max < 0 or self.workers < 1:
            raise ConfigError("n_paths and workers must be positive, n_max nonnegative")
        if self.wall_factor <= 0:
            raise ConfigError("wall_factor must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        for s in self.suites:
            if s not in SUITES:
                raise ConfigError(f"unknown suite {s!r}")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError("T must be a whole number of steps dt")
        rs = self.root_system()
        if len(self.x0) != rs.dim:
            raise ConfigError(f"x0 has {len(self.x0)} coordinates, the root system lives in dimension {rs.dim}")
        P = rs.roots_array @ [float(v) for v in self.x0]
        if any(abs(p) < 1e-12 and k > 0 for p, k in zip(P, rs.k_array)):
            raise ConfigError("x0 lies on a hyperplane of a root with k > 0")

    def root_system(self) -> rootsys.RootSystem:
        try:
            return rootsys.build(self.kind, self.dim, self.multiplicities)
        except rootsys.RootSystemError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def resolved_output_dir(self) -> str:
        return os.environ.get(OUTPUT_ENV) or self.output_dir

    def dumps(self) -> str:
        lines = [
            "[rootsystem]",
            f"kind = {self.kind}",
            f"dim = {'' if self.dim is None else self.dim}",
            "multiplicities = " + ", ".join(_frac_text(Fraction(m)) for m in self.multiplicities),
            "",
            "[process]",
            "x0 = " + ", ".join(repr(float(v)) for v in self.x0),
            f"T = {float(self.T)!r}",
            f"dt = {float(self.dt)!r}",
            f"n_paths = {self.n_paths}",
            f"wall_factor = {float(self.wall_factor)!r}",
            "",
            "[intertwine]",
            f"n_max = {self.n_max}",
            "",
            "[run]",
            f"seed = {self.seed}",
            "suites = " + ", ".join(self.suites),
            f"output_dir = {self.output_dir}",
            f"workers = {self.workers}",
            "",
        ]
        return "\n".join(lines)

    def digest(self) -> str:
        """SHA-256 of the canonical form, excluding the output directory and worker count
        (neither affects results)."""
        core = replace(self, output_dir="-", workers=1)
        return hashlib.sha256(core.dumps().encode()).hexdigest()


def _get(cp, section, key, default):
    if cp.has_option(section, key):
        v = cp.get(section, key).strip()
        return v if v != "" else default
    return default


def loads(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    known = {"rootsystem", "process", "intertwine", "run"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    if not cp.has_option("rootsystem", "kind"):
        raise ConfigError("[rootsystem] kind is required")
    try:
        dim_s = _get(cp, "rootsystem", "dim", None)
        kw = dict(
            kind=cp.get("rootsystem", "kind").strip(),
            dim=int(dim_s) if dim_s is not None else None,
            multiplicities=tuple(Fraction(s.strip()) for s in _get(cp, "rootsystem", "multiplicities", "0").split(",")),
            x0=tuple(float(s) for s in _get(cp, "process", "x0", "1").split(",")),
            T=float(_get(cp, "process", "T", 1.0)),
            dt=float(_get(cp, "process", "dt", 1e-3)),
            n_paths=int(_get(cp, "process", "n_paths", 10_000)),
            wall_factor=float(_get(cp, "process", "wall_factor", 1.0)),
            n_max=int(_get(cp, "intertwine", "n_max", 8)),
            seed=int(_get(cp, "run", "seed", 12345)),
            suites=tuple(s.strip() for s in _get(cp, "run", "suites", "all").split(",")),
            output_dir=_get(cp, "run", "output_dir", "out"),
            workers=int(_get(cp, "run", "workers", 1)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad value in config: {exc}") from exc
    return ExperimentConfig(**kw)


def load(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
