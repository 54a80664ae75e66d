"""Path simulation of the Dunkl process, martingale extraction and jump statistics.

The generic scheme is Euler for the singular drift plus reflection jumps.  On
each leaf substep the jump rates are frozen at the left point: the number of
jumps is Poisson in the (Weyl-invariant) total rate, jump times are uniform
order statistics, and each root is chosen in proportion to its rate, with the
pairings reflected after every jump.  Brownian increments live on a dyadic tree per grid step
(Brownian-bridge refinement), so refining a step near a wall keeps the driving
path and only resolves the drift more finely.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaincinv
from scipy.stats import poisson

from . import rootsys
from .intertwine import IntertwineTable, hermite_Q
from .rng import CounterStream
from .rootsys import RootSystem

MAX_DEPTH = 12
WALL_FACTOR = 1.0
BATCH_SIZE = 2500
_MAX_JUMPS = 64  # per leaf substep; the counter slot packs heap and jump number

# counter "purpose" words; each addresses a family of independent draws
_NOISE = 0
_BRIDGE = 16
_JUMP = 32  # 32 the count, 33 the jump times and roots
_SKEW_NORMAL = 48
_SKEW_GAMMA = 49
_SKEW_EVENT = 50


def _mm(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    """X @ M as a fixed-order sum of elementwise products.

    BLAS picks kernels by shape, which changes the last bit of a row's result
    with the batch size; this keeps every path independent of its batch.
    """
    out = X[..., 0, None] * M[0]
    for i in range(1, M.shape[0]):
        out = out + X[..., i, None] * M[i]
    return out


def _rowdot(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = X[..., 0] * Y[..., 0]
    for i in range(1, X.shape[-1]):
        out = out + X[..., i] * Y[..., i]
    return out


class SimulationError(ValueError):
    pass


@dataclass
class Path:
    """A batch of simulated paths on a common recorded grid.

    ``states`` is (n, M+1, d) at ``times``; ``dB`` (n, M, d) the Brownian
    increments per recorded interval (None for the skew product);
    ``comp`` (n, M, R) the compensator increments int sqrt(k)/<alpha, X> ds.
    Jumps are listed in the parallel ``jump_*`` arrays; a jump during internal
    step m belongs to recorded interval m // stride.
    """

    rs: RootSystem
    x0: np.ndarray
    T: float
    dt: float
    seed: int
    method: str
    times: np.ndarray
    states: np.ndarray
    dB: np.ndarray | None
    comp: np.ndarray
    inv_sq: np.ndarray
    inv_abs: np.ndarray
    jump_path: np.ndarray
    jump_time: np.ndarray
    jump_root: np.ndarray
    jump_pre: np.ndarray
    jump_step: np.ndarray
    rejected: np.ndarray
    clipped: np.ndarray
    stride: int
    n_substeps: int = 0
    path_ids: np.ndarray = field(default=None)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[:, -1, :]

    @property
    def accepted(self) -> np.ndarray:
        return ~self.rejected

    @property
    def rejection_rate(self) -> float:
        return float(self.rejected.mean()) if self.n_paths else 0.0

    def jump_counts(self) -> np.ndarray:
        """(n, R) number of jumps per path and root."""
        out = np.zeros((self.n_paths, self.rs.n_roots), dtype=np.int64)
        np.add.at(out, (self.jump_path, self.jump_root), 1)
        return out

    def jump_amplitude(self) -> np.ndarray:
        """Sum of |Delta X| per path; each jump moves by |<alpha, X->| * |alpha|."""
        A = self.rs.roots_array
        size = np.abs(_rowdot(self.jump_pre, A[self.jump_root])) * math.sqrt(2.0)
        out = np.zeros(self.n_paths)
        np.add.at(out, self.jump_path, size)
        return out

    def jump_post(self) -> np.ndarray:
        A = self.rs.roots_array[self.jump_root]
        P = _rowdot(self.jump_pre, A)
        return self.jump_pre - P[:, None] * A


# ---------------------------------------------------------------------------
# generic scheme


class _Batch:
    def __init__(self, rs, x0, dt, stream, ids, n_rec, stride, wall_factor, max_depth, on_collapse="reject"):
        n = len(ids)
        d, R = rs.dim, rs.n_roots
        self.A = rs.roots_array
        self.k = rs.k_array
        self.sk = np.sqrt(self.k)
        self.kpos = self.k > 0
        self.stream = stream
        self.ids = np.asarray(ids, dtype=np.uint64)
        self.dt = dt
        self.c = wall_factor
        self.max_depth = max_depth
        self.stride = stride
        self.X = np.tile(np.asarray(x0, dtype=float), (n, 1))
        self.on_collapse = on_collapse
        self.rejected = np.zeros(n, dtype=bool)
        self.clipped = np.zeros(n, dtype=np.int64)
        self.states = np.empty((n, n_rec + 1, d))
        self.states[:, 0] = self.X
        self.dB = np.zeros((n, n_rec, d))
        self.comp = np.zeros((n, n_rec, R))
        self.inv_sq = np.zeros((n, R))
        self.inv_abs = np.zeros((n, R))
        self.jumps: list[tuple] = []
        self.n_substeps = 0
        self.m = 0

    def drift(self, P):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(self.kpos, self.k / P, 0.0)
        return _mm(w, self.A)

    def step(self, m: int):
        self.m = m
        live = np.flatnonzero(~self.rejected)
        h = self.dt
        dW = math.sqrt(h) * self.stream.normals(self.ids[live], m, 1, _NOISE, self.A.shape[1])
        self.dB[live, m // self.stride] += dW
        self._advance(live, h, 1, 0, m * h, dW)

    def _advance(self, idx, h, heap, depth, t0, dW):
        if idx.size == 0:
            return
        x = self.X[idx]
        P = _mm(x, self.A.T)
        x_end = x + self.drift(P) * h + dW
        P_end = _mm(x_end, self.A.T)
        floor = self.c * math.sqrt(h)
        kp = self.kpos
        bad = ((np.abs(P[:, kp]) < floor) | (np.abs(P_end[:, kp]) < floor) | (np.sign(P[:, kp]) != np.sign(P_end[:, kp]))).any(axis=1)
        if bad.any():
            sub = idx[bad]
            if depth < self.max_depth:
                z = self.stream.normals(self.ids[sub], self.m, heap, _BRIDGE, self.A.shape[1])
                half = dW[bad] / 2
                spread = 0.5 * math.sqrt(h) * z
                self._advance(sub, h / 2, 2 * heap, depth + 1, t0, half + spread)
                self._advance(sub[~self.rejected[sub]], h / 2, 2 * heap + 1, depth + 1, t0 + h / 2, (half - spread)[~self.rejected[sub]])
            elif self.on_collapse == "clip":
                self.clipped[sub] += 1
                self._leaf(sub, h, heap, t0, *self._clipped_step(self.X[sub], dW[bad], h))
            else:
                self.rejected[sub] = True
            good = ~bad
            idx, P, P_end, x_end = idx[good], P[good], P_end[good], x_end[good]
            if idx.size == 0:
                return
        self._leaf(idx, h, heap, t0, P, P_end, x_end)

    def _clipped_step(self, x, dW, h):
        # pairings floored at the band width; the drift uses the floored values too
        floor = self.c * math.sqrt(h)

        def clip(P):
            return np.where(P >= 0, 1.0, -1.0) * np.maximum(np.abs(P), floor)

        P = clip(_mm(x, self.A.T))
        x_end = x + self.drift(P) * h + dW
        return P, clip(_mm(x_end, self.A.T)), x_end

    def _leaf(self, idx, h, heap, t0, P, P_end, x_end):
        self.n_substeps += idx.size
        kp = self.kpos
        rec = self.m // self.stride
        with np.errstate(divide="ignore"):
            g0 = np.where(kp, self.sk / P, 0.0)
            g1 = np.where(kp, self.sk / P_end, 0.0)
            self.comp[idx, rec] += 0.5 * h * (g0 + g1)
        if not kp.any():
            with np.errstate(divide="ignore"):
                self.inv_sq[idx] += h / P**2
                self.inv_abs[idx] += h / np.abs(P)
            self.X[idx] = x_end
            return
        self._jumps(idx, h, heap, t0, P, x_end)
        self.X[idx] = x_end

    def _jumps(self, idx, h, heap, t0, P, x_end):
        """Reflection jumps over one leaf substep with the intensity frozen at
        the left point.

        The left point y is reflected along with each jump, so the rates form
        an exact pure-jump chain on the substep; the total rate
        sum_alpha k/<alpha, y>^2 is W-invariant, hence the count is
        Poisson(total * h) and the jump times are uniform order statistics.
        Per-root occupation integrals int ds/<alpha, y_s>^2 are accumulated
        piecewise, which makes count minus compensator an exact martingale of
        the scheme.  Reflections act on the end point ``x_end`` in place.
        """
        A, k, kp = self.A, self.k, self.kpos
        R = A.shape[0]
        with np.errstate(divide="ignore"):
            lam = np.where(kp, k / P**2, 0.0)
        total = lam.sum(axis=1) * h
        u = self.stream.uniforms(self.ids[idx], self.m, heap, _JUMP)[0]
        count = np.zeros(idx.size, dtype=np.int64)
        some = np.flatnonzero(u >= np.exp(-total))
        if some.size:
            count[some] = poisson.ppf(u[some], total[some]).astype(np.int64)
        rows = np.flatnonzero(count)
        if rows.size == 0:
            with np.errstate(divide="ignore"):
                self.inv_sq[idx] += h / P**2
                self.inv_abs[idx] += h / np.abs(P)
            return
        quiet = np.flatnonzero(count == 0)
        with np.errstate(divide="ignore"):
            self.inv_sq[idx[quiet]] += h / P[quiet] ** 2
            self.inv_abs[idx[quiet]] += h / np.abs(P[quiet])
        n = count[rows]
        nmax = int(n.max())
        if nmax >= _MAX_JUMPS:
            raise SimulationError(f"{nmax} jumps in one substep; lower dt or raise wall_factor")
        ids = self.ids[idx[rows]]
        times = np.full((rows.size, nmax), np.inf)
        pick = np.empty((rows.size, nmax))
        for j in range(nmax):
            ut, ur = self.stream.uniforms(ids, self.m, heap * _MAX_JUMPS + j, _JUMP + 1)
            times[:, j] = np.where(j < n, ut, np.inf)
            pick[:, j] = ur
        times.sort(axis=1)
        y = P[rows].copy()  # pairings of the reflected left point
        ye = x_end[rows].copy()
        last = np.zeros(rows.size)
        occ_sq = np.zeros((rows.size, R))
        occ_abs = np.zeros((rows.size, R))
        for j in range(nmax):
            live = np.flatnonzero(j < n)
            tau = times[live, j]
            yl = y[live]
            with np.errstate(divide="ignore"):
                occ_sq[live] += ((tau - last[live]) * h)[:, None] / yl**2
                occ_abs[live] += ((tau - last[live]) * h)[:, None] / np.abs(yl)
            last[live] = tau
            with np.errstate(divide="ignore"):
                w = np.where(kp, k / yl**2, 0.0)
            cum = np.cumsum(w, axis=1)
            cum /= cum[:, -1:]
            root = np.argmax(pick[live, j][:, None] < cum, axis=1)
            a = A[root]
            # reflect the left point: pairings transform by <beta, s_a y> = <beta, y> - <a, y><beta, a>
            pa = yl[np.arange(live.size), root]
            y[live] = yl - pa[:, None] * _mm(a, A.T)
            pre = ye[live].copy()
            pe = _rowdot(pre, a)
            ye[live] = pre - pe[:, None] * a
            self.jumps.append((idx[rows[live]], t0 + tau * h, root, pre, np.full(live.size, self.m)))
        with np.errstate(divide="ignore"):
            occ_sq += ((1 - last) * h)[:, None] / y**2
            occ_abs += ((1 - last) * h)[:, None] / np.abs(y)
        self.inv_sq[idx[rows]] += occ_sq
        self.inv_abs[idx[rows]] += occ_abs
        x_end[rows] = ye

    def record(self, m: int):
        if (m + 1) % self.stride == 0:
            self.states[:, (m + 1) // self.stride] = self.X


def _n_steps(T, dt):
    M = int(round(T / dt))
    if M < 1 or abs(M * dt - T) > 1e-9 * T:
        raise SimulationError(f"T = {T} is not a whole number of steps dt = {dt}")
    return M


def _stride(M, record_every):
    if record_every is None:
        return M
    if M % record_every:
        raise SimulationError("record_every must divide the number of steps")
    return record_every


def _check_start(rs: RootSystem, x0):
    x0 = np.asarray(x0, dtype=float).reshape(rs.dim)
    P = rs.roots_array @ x0
    if np.any((np.abs(P) < 1e-12) & (rs.k_array > 0)):
        raise SimulationError("x0 lies on a hyperplane of a root with k > 0")
    return x0


def _merge_jumps(parts, d, offset=0):
    if not parts:
        return (np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros((0, d)), np.zeros(0, dtype=np.int64))
    p = np.concatenate([a[0] for a in parts]).astype(np.int64) + offset
    t = np.concatenate([a[1] for a in parts])
    r = np.concatenate([a[2] for a in parts]).astype(np.int64)
    x = np.concatenate([a[3] for a in parts])
    s = np.concatenate([a[4] for a in parts]).astype(np.int64)
    order = np.lexsort((t, p))
    return p[order], t[order], r[order], x[order], s[order]


def _run_batches(fn, n_paths, batch_size, workers):
    starts = list(range(0, n_paths, batch_size))
    spans = [(s, min(s + batch_size, n_paths)) for s in starts]
    if workers and workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda sp: fn(*sp), spans))
    return [fn(*sp) for sp in spans]


def _concat(rs, x0, T, dt, seed, method, times, stride, results):
    states = np.concatenate([r["states"] for r in results])
    dB = None if results[0]["dB"] is None else np.concatenate([r["dB"] for r in results])
    jumps = []
    for r in results:
        jumps.append(r["jumps"])
    jp = np.concatenate([j[0] for j in jumps])
    order = np.lexsort((np.concatenate([j[1] for j in jumps]), jp))
    return Path(
        rs=rs,
        x0=x0,
        T=T,
        dt=dt,
        seed=seed,
        method=method,
        times=times,
        states=states,
        dB=dB,
        comp=np.concatenate([r["comp"] for r in results]),
        inv_sq=np.concatenate([r["inv_sq"] for r in results]),
        inv_abs=np.concatenate([r["inv_abs"] for r in results]),
        jump_path=jp[order],
        jump_time=np.concatenate([j[1] for j in jumps])[order],
        jump_root=np.concatenate([j[2] for j in jumps])[order],
        jump_pre=np.concatenate([j[3] for j in jumps])[order],
        jump_step=np.concatenate([j[4] for j in jumps])[order],
        rejected=np.concatenate([r["rejected"] for r in results]),
        clipped=np.concatenate([r["clipped"] for r in results]),
        stride=stride,
        n_substeps=sum(r["n_substeps"] for r in results),
        path_ids=np.concatenate([r["ids"] for r in results]),
    )


def simulate(
    rs: RootSystem,
    x0,
    T: float,
    dt: float,
    rng_seed: int,
    n_paths: int = 1,
    record_every: int | None = 1,
    wall_factor: float = WALL_FACTOR,
    max_depth: int = MAX_DEPTH,
    on_collapse: str = "reject",
    first_path: int = 0,
    batch_size: int = BATCH_SIZE,
    workers: int = 1,
) -> Path:
    """Euler scheme with reflection jumps for ``n_paths`` independent paths.

    A substep of length h is halved (up to ``max_depth`` times) while any root
    with k > 0 has |<alpha, x>| < wall_factor * sqrt(h) at either end of the
    step, or changes sign over it.  Paths still violating this at the deepest
    level are flagged in ``rejected`` and frozen.  ``record_every`` sets the
    recorded grid (in steps; None keeps only t = 0 and t = T).  Path i uses
    the RNG stream of global index ``first_path + i``, so results do not depend
    on ``batch_size`` or ``workers``.

    ``on_collapse="clip"`` instead takes the deepest step with every pairing
    floored at the band width (drift, intensity and integrals alike) and counts
    it in ``clipped``.  Rejection conditions on staying away from the walls,
    which hides the blow-up of int ds/<alpha,X>^2 when k(alpha) <= 1/2.
    """
    if on_collapse not in ("reject", "clip"):
        raise SimulationError(f"unknown collapse policy {on_collapse!r}")
    if T <= 0 or dt <= 0:
        raise SimulationError("T and dt must be positive")
    x0 = _check_start(rs, x0)
    M = _n_steps(T, dt)
    stride = _stride(M, record_every)
    n_rec = M // stride
    stream = CounterStream(rng_seed)
    d = rs.dim

    def run(lo, hi):
        ids = np.arange(first_path + lo, first_path + hi)
        b = _Batch(rs, x0, dt, stream, ids, n_rec, stride, wall_factor, max_depth, on_collapse)
        for m in range(M):
            b.step(m)
            b.record(m)
        return {
            "states": b.states,
            "dB": b.dB,
            "comp": b.comp,
            "inv_sq": b.inv_sq,
            "inv_abs": b.inv_abs,
            "jumps": _merge_jumps(b.jumps, d, lo),
            "rejected": b.rejected,
            "clipped": b.clipped,
            "n_substeps": b.n_substeps,
            "ids": ids,
        }

    results = _run_batches(run, n_paths, batch_size, workers)
    times = np.arange(n_rec + 1) * (stride * dt)
    return _concat(rs, x0, T, dt, rng_seed, "euler", times, stride, results)


# ---------------------------------------------------------------------------
# rank-one skew product


def simulate_skew_rank1(
    k,
    x0: float,
    T: float,
    dt: float,
    rng_seed: int,
    n_paths: int = 1,
    record_every: int | None = 1,
    first_path: int = 0,
    batch_size: int = BATCH_SIZE,
    workers: int = 1,
) -> Path:
    """X_t = |X_t| (-1)^N(A_t) with |X| a BES(1+2k) and A_t = int ds / |X_s|^2.

    X^2 is stepped with exact squared-Bessel transitions,
    Y' = (sqrt(Y) + sqrt(h) Z)^2 + 2 h G with G ~ Gamma(k), and the sign flips
    at the events of a rate-k/2 Poisson process run on the clock A (trapezoid
    rule on the grid).  Events are placed by linear interpolation of A.
    """
    rs = rootsys.build("rank1", 1, (k,))
    kf = float(rs.multiplicity[0])
    if kf <= 0:
        raise SimulationError("the skew product needs k > 0")
    x0 = float(np.asarray(x0, dtype=float).reshape(-1)[0])
    if x0 == 0:
        raise SimulationError("x0 must be nonzero")
    M = _n_steps(T, dt)
    stride = _stride(M, record_every)
    n_rec = M // stride
    stream = CounterStream(rng_seed)
    rate = kf / 2
    a = float(rs.roots_array[0, 0])
    sqk = math.sqrt(kf)

    def run(lo, hi):
        ids = np.arange(first_path + lo, first_path + hi)
        uid = ids.astype(np.uint64)
        n = hi - lo
        Y = np.full(n, x0 * x0)
        sign = np.full(n, 1.0 if x0 > 0 else -1.0)
        n_events = np.zeros(n, dtype=np.uint64)
        left = -np.log(stream.uniforms(uid, n_events, 0, _SKEW_EVENT)[0]) / rate
        states = np.empty((n, n_rec + 1, 1))
        states[:, 0, 0] = sign * np.sqrt(Y)
        comp = np.zeros((n, n_rec, 1))
        inv_sq = np.zeros((n, 1))
        inv_abs = np.zeros((n, 1))
        jumps = []
        for m in range(M):
            z = stream.normals(uid, m, 0, _SKEW_NORMAL, 1)[:, 0]
            u = stream.uniforms(uid, m, 0, _SKEW_GAMMA)[0]
            Y1 = (np.sqrt(Y) + math.sqrt(dt) * z) ** 2 + 2 * dt * gammaincinv(kf, u)
            dA = 0.5 * dt * (1 / Y + 1 / Y1)
            dI = 0.5 * dt * (1 / np.sqrt(Y) + 1 / np.sqrt(Y1))
            inv_sq[:, 0] += dA / 2
            inv_abs[:, 0] += dI / abs(a)
            # signed compensator: split the step at the flip times
            signed = np.zeros(n)
            used = np.zeros(n)  # fraction of the step already accounted for
            while True:
                hit = np.flatnonzero(left <= dA * (1 - used))
                if hit.size == 0:
                    break
                frac = used[hit] + left[hit] / dA[hit]
                signed[hit] += sign[hit] * (frac - used[hit])
                yi = Y[hit] + (Y1[hit] - Y[hit]) * frac
                pre = sign[hit] * np.sqrt(yi)
                jumps.append((hit, m * dt + frac * dt, np.zeros(hit.size, dtype=np.int64), pre[:, None], np.full(hit.size, m)))
                sign[hit] = -sign[hit]
                used[hit] = frac
                n_events[hit] += 1
                left[hit] = -np.log(stream.uniforms(uid[hit], n_events[hit], 0, _SKEW_EVENT)[0]) / rate
            left -= dA * (1 - used)
            signed += sign * (1 - used)
            comp[:, m // stride, 0] += sqk / a * signed * dI
            Y = Y1
            if (m + 1) % stride == 0:
                states[:, (m + 1) // stride, 0] = sign * np.sqrt(Y)
        return {
            "states": states,
            "dB": None,
            "comp": comp,
            "inv_sq": inv_sq,
            "inv_abs": inv_abs,
            "jumps": _merge_jumps(jumps, 1, lo),
            "rejected": np.zeros(n, dtype=bool),
            "clipped": np.zeros(n, dtype=np.int64),
            "n_substeps": n * M,
            "ids": ids,
        }

    results = _run_batches(run, n_paths, batch_size, workers)
    times = np.arange(n_rec + 1) * (stride * dt)
    return _concat(rs, np.array([x0]), T, dt, rng_seed, "skew", times, stride, results)


# ---------------------------------------------------------------------------
# martingale decomposition


@dataclass
class MartingaleDecomposition:
    """B, M^alpha and eta = sum sqrt(k) M^alpha alpha on the recorded grid."""

    times: np.ndarray
    B: np.ndarray  # (n, M+1, d)
    M: np.ndarray  # (n, M+1, R)
    C: np.ndarray  # (n, M+1, R) compensator part of M
    eta: np.ndarray  # (n, M+1, d)
    dM_jump: np.ndarray  # jump sizes of M, parallel to the path's jump log
    quad_var: np.ndarray  # (n, R): sum of squared jumps of M^alpha over [0, T]
    cross_bracket: np.ndarray  # (n, R, R): sum of Delta M^a Delta M^b for a != b
    residual: np.ndarray | None  # X - x - B_recorded - eta, when increments were recorded

    @property
    def dM(self) -> np.ndarray:
        return np.diff(self.M, axis=1)

    @property
    def dB(self) -> np.ndarray:
        return np.diff(self.B, axis=1)


def extract_martingales(rs: RootSystem, path: Path) -> MartingaleDecomposition:
    """Read off M^alpha (jump sums plus compensator) and B = X - x - eta."""
    n, n1, d = path.states.shape
    R = rs.n_roots
    A = rs.roots_array
    k = rs.k_array
    sk = np.sqrt(k)
    C = np.zeros((n, n1, R))
    C[:, 1:] = np.cumsum(path.comp, axis=1)
    P = _rowdot(path.jump_pre, A[path.jump_root])
    with np.errstate(divide="ignore", invalid="ignore"):
        dMj = np.where(sk[path.jump_root] > 0, -P / sk[path.jump_root], 0.0)
    J = np.zeros((n, n1, R))
    rec = path.jump_step // path.stride + 1
    np.add.at(J, (path.jump_path, rec, path.jump_root), dMj)
    M = C + np.cumsum(J, axis=1)
    eta = _mm(M, sk[:, None] * A)
    x0 = path.x0.reshape(1, 1, d)
    B = path.states - x0 - eta
    qv = np.zeros((n, R))
    np.add.at(qv, (path.jump_path, path.jump_root), dMj**2)
    cross = _cross_bracket(path, dMj, n, R)
    residual = None
    if path.dB is not None:
        Brec = np.zeros_like(B)
        Brec[:, 1:] = np.cumsum(path.dB, axis=1)
        residual = path.states - x0 - Brec - eta
        B = Brec
    return MartingaleDecomposition(path.times, B, M, C, eta, dMj, qv, cross, residual)


def _cross_bracket(path: Path, dMj: np.ndarray, n: int, R: int) -> np.ndarray:
    """Pathwise sum of Delta M^a Delta M^b (a != b) over jumps at the same instant."""
    out = np.zeros((n, R, R))
    if dMj.size < 2:
        return out
    same = (path.jump_path[1:] == path.jump_path[:-1]) & (path.jump_time[1:] == path.jump_time[:-1])
    for j in np.flatnonzero(same):
        a, b = path.jump_root[j], path.jump_root[j + 1]
        if a != b:
            p = path.jump_path[j]
            out[p, a, b] += dMj[j] * dMj[j + 1]
            out[p, b, a] += dMj[j] * dMj[j + 1]
    return out


# ---------------------------------------------------------------------------
# jump functionals


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        # no spread estimate from fewer than two samples
        return (float(v[0]) if len(v) else math.nan), math.inf
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def estimate_jump_functionals(rs: RootSystem, path: Path) -> dict:
    """Monte Carlo estimates (mean, standard error) of the jump-related integrals.

    Per root: int ds/|<alpha,X>|, int ds/<alpha,X>^2, the jump count and its
    compensator k(alpha) int ds/<alpha,X>^2; plus the total jump amplitude.
    Rejected paths are excluded and counted.
    """
    ok = path.accepted
    counts = path.jump_counts()[ok]
    comp = path.inv_sq[ok] * rs.k_array
    amp = path.jump_amplitude()[ok]
    roots = []
    for r in range(rs.n_roots):
        kr = float(rs.multiplicity[r])
        entry = {
            "root": r,
            "k": kr,
            "inv_abs": _mean_se(path.inv_abs[ok, r]),
            "inv_sq": _mean_se(path.inv_sq[ok, r]),
            "jump_count": _mean_se(counts[:, r]),
            "compensator": _mean_se(comp[:, r]),
            "count_minus_compensator": _mean_se(counts[:, r] - comp[:, r]),
            "precondition_inv_abs": kr > 0,
            "precondition_inv_sq": kr > 0.5,
        }
        roots.append(entry)
    total = counts.sum(axis=1) - comp.sum(axis=1)
    return {
        "n_paths": int(ok.sum()),
        "rejected": int((~ok).sum()),
        "clipped_steps": int(path.clipped.sum()),
        "roots": roots,
        "jump_count_total": _mean_se(counts.sum(axis=1)),
        "count_minus_compensator_total": _mean_se(total),
        "amplitude": _mean_se(amp),
    }


def refinement_study(rs: RootSystem, x0, T: float, dt: float, rng_seed: int, n_paths: int, levels: int = 2, tol: float = 0.05, **kw) -> dict:
    """Re-estimate the jump functionals at dt, dt/2, ... with the same seed.

    An estimate is called stable when its relative change over the last
    halving is below ``tol``.
    """
    reports = []
    h = dt
    for _ in range(levels):
        p = simulate(rs, x0, T, h, rng_seed, n_paths, record_every=None, **kw)
        reports.append((h, estimate_jump_functionals(rs, p)))
        h /= 2
    out = {"dts": [h for h, _ in reports], "roots": []}
    for r in range(rs.n_roots):
        row = {"root": r}
        for key in ("inv_abs", "inv_sq", "jump_count"):
            vals = [rep["roots"][r][key][0] for _, rep in reports]
            change = abs(vals[-1] - vals[-2]) / abs(vals[-2]) if vals[-2] else math.inf
            row[key] = {"values": vals, "rel_change": change, "stable": change < tol}
        out["roots"].append(row)
    amps = [rep["amplitude"][0] for _, rep in reports]
    out["amplitude"] = {"values": amps, "rel_change": abs(amps[-1] - amps[-2]) / abs(amps[-2])}
    out["amplitude"]["stable"] = out["amplitude"]["rel_change"] < tol
    out["reports"] = [rep for _, rep in reports]
    return out


# ---------------------------------------------------------------------------
# Ito formula residual


def ito_residual_check(rs: RootSystem, table: IntertwineTable, path: Path, nu: Sequence[int], decomposition: MartingaleDecomposition | None = None) -> np.ndarray:
    """|F(X_T) - F(x) - int grad F dB - sum int D_alpha F dM^alpha| per path,
    with F(x, s) = Q_nu(x, s - T).  The ds-term vanishes by harmonicity, so the
    residual measures discretisation error only.  Needs the Brownian record.
    """
    if path.dB is None:
        raise SimulationError("the Ito residual needs recorded Brownian increments")
    fam = hermite_Q(table, nu)
    dec = decomposition or extract_martingales(rs, path)
    n, n1, d = path.states.shape
    T = path.T
    tau = path.times - T
    Xl = path.states[:, :-1].reshape(-1, d)
    Tl = np.repeat(tau[None, :-1], n, axis=0).reshape(-1)
    lhs = fam.Q.evaluate(path.states[:, -1], np.zeros(n)) - fam.Q.evaluate(path.states[:, 0], np.full(n, tau[0]))
    rhs = np.zeros(n)
    for i in range(d):
        g = fam.continuous[i].evaluate(Xl, Tl).reshape(n, n1 - 1)
        rhs += np.sum(g * path.dB[:, :, i], axis=1)
    scales = [float(s) for s in fam.jump_scales]
    for r in range(rs.n_roots):
        if scales[r] == 0:
            continue
        q = fam.jump_quotients[r]
        g = q.evaluate(Xl, Tl).reshape(n, n1 - 1) * scales[r]
        rhs += np.sum(g * path.comp[:, :, r], axis=1)
        sel = path.jump_root == r
        if sel.any():
            gj = q.evaluate(path.jump_pre[sel], path.jump_time[sel] - T) * scales[r]
            np.add.at(rhs, path.jump_path[sel], gj * dec.dM_jump[sel])
    return np.abs(lhs - rhs)


# ---------------------------------------------------------------------------
# CSV dumps


def write_path_csv(path: Path, index: int, filename) -> None:
    """Columns t, x1..xd, jump_flag, jump_root on the recorded grid.

    jump_flag counts jumps in (t_{j-1}, t_j]; jump_root lists their roots
    separated by ';' and is empty when there were none.
    """
    d = path.rs.dim
    sel = path.jump_path == index
    rec = path.jump_step[sel] // path.stride + 1
    roots = path.jump_root[sel]
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(d)] + ["jump_flag", "jump_root"])
        for j, t in enumerate(path.times):
            here = roots[rec == j]
            w.writerow([repr(float(t))] + [repr(float(v)) for v in path.states[index, j]] + [len(here), ";".join(str(int(r)) for r in here)])


def write_jump_log_csv(path: Path, filename) -> None:
    d = path.rs.dim
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "s", "root_index"] + [f"pre{i + 1}" for i in range(d)])
        for p, s, r, x in zip(path.jump_path, path.jump_time, path.jump_root, path.jump_pre):
            w.writerow([int(p), repr(float(s)), int(r)] + [repr(float(v)) for v in x])


def write_decomposition_csv(path: Path, dec: MartingaleDecomposition, index: int, filename) -> None:
    d, R = path.rs.dim, path.rs.n_roots
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"B{i + 1}" for i in range(d)] + [f"M{r + 1}" for r in range(R)] + [f"eta{i + 1}" for i in range(d)])
        for j, t in enumerate(dec.times):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in dec.B[index, j]]
            row += [repr(float(v)) for v in dec.M[index, j]]
            row += [repr(float(v)) for v in dec.eta[index, j]]
            w.writerow(row)
