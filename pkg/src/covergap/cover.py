"""Monte Carlo cover-time estimation, Matthews-style bounds, concentration
diagnostics, and the grid-torus parameter sweep.

Simulation walks the jump chain by inverse-CDF sampling of sparse rows and
accrues i.i.d. mean-1 exponential holds for the continuous clock. Every
trial owns a counter-based RNG stream keyed by (seed, start state, trial
index), so results are bit-identical under any scheduling or worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit

from .chain import ChainSpec
from .errors import BadParams, BoundViolated, RunawayTrial
from .hitting import HittingData
from .spectral import SpectralData

_CHUNK = 16384
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class CoverConfig:
    trials: int = 10_000
    seed: int = 0
    starts: Union[str, tuple[int, ...]] = "single"  # "all" | "single" | explicit
    time_mode: str = "continuous"  # or "discrete-steps"
    max_time_factor: float = 64.0

    def __post_init__(self):
        if self.trials < 1:
            raise BadParams("trials must be >= 1")
        if self.max_time_factor < 2:
            raise BadParams("max_time_factor must be >= 2")
        if self.time_mode not in ("continuous", "discrete-steps"):
            raise BadParams("time_mode must be 'continuous' or 'discrete-steps'")


@dataclass(frozen=True)
class CoverStats:
    starts: tuple[int, ...]
    per_start_mean: np.ndarray
    per_start_stderr: np.ndarray
    tcov_hat: float
    tcov_stderr: float
    argmax_start: int
    cv: float
    quantiles: tuple[float, float, float]  # 5 / 50 / 95 percent
    trials: int
    time_mode: str
    samples: dict = field(repr=False)
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MatthewsBounds:
    upper: float
    lower: float
    lower_set: tuple[int, ...]
    spectral_lower_transitive: float
    spectral_lower_general: float
    transitive_vacuous: bool
    general_vacuous: bool


@njit(cache=True, nogil=True)
def _walk_chunk(indptr, indices, cumprob, u, state, visited, nvisited, t_acc, steps, n, step_cap):
    """Advance one trial through a chunk of uniforms.

    u has two columns per step: holding time, then neighbor choice.
    Returns (state, nvisited, t_acc, steps, done, runaway).
    """
    L = u.shape[0]
    for k in range(L):
        t_acc += -np.log1p(-u[k, 0])
        lo = indptr[state]
        hi = indptr[state + 1] - 1
        r = u[k, 1]
        while lo < hi:
            mid = (lo + hi) >> 1
            if r <= cumprob[mid]:
                hi = mid
            else:
                lo = mid + 1
        state = indices[lo]
        steps += 1
        if not visited[state]:
            visited[state] = True
            nvisited += 1
            if nvisited == n:
                return state, nvisited, t_acc, steps, True, False
        if steps > step_cap:
            return state, nvisited, t_acc, steps, False, True
    return state, nvisited, t_acc, steps, False, False


def _row_sampler(P: np.ndarray):
    """CSR-style row cumulative tables for inverse-CDF sampling."""
    n = P.shape[0]
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices_list = []
    cumprob_list = []
    for i in range(n):
        nz = np.flatnonzero(P[i] > 0.0)
        c = np.cumsum(P[i, nz])
        c[-1] = 1.0  # kill float drift so the last slot always catches r = 1-
        indices_list.append(nz.astype(np.int64))
        cumprob_list.append(c)
        indptr[i + 1] = indptr[i] + len(nz)
    return indptr, np.concatenate(indices_list), np.concatenate(cumprob_list)


def _trial_key(seed: int, start: int, trial: int) -> int:
    """128-bit Philox key: 64 bits of seed, 32 of start state, 32 of trial."""
    return (seed & _MASK64) | ((start & 0xFFFFFFFF) << 64) | ((trial & 0xFFFFFFFF) << 96)


_PHILOX_TEMPLATE = np.random.Philox(key=0).state


class _TrialRunner:
    """One worker's reusable machinery for counter-based per-trial streams.

    Re-keying a single Philox through its state dict is bit-identical to
    constructing a fresh one per trial and an order of magnitude cheaper,
    which matters when trials are short.
    """

    def __init__(self, n: int, sampler, step_cap: int):
        self.n = n
        self.indptr, self.indices, self.cumprob = sampler
        self.step_cap = step_cap
        self.bg = np.random.Philox(key=0)
        self.gen = np.random.Generator(self.bg)
        self.visited = np.zeros(n, dtype=np.bool_)
        # first chunk sized to the coupon-collector scale, then geometric
        self.chunk0 = min(_CHUNK, max(32, 2 * n * (int(math.log(n)) + 1))) if n > 1 else 1

    def _rekey(self, key: int) -> None:
        st = dict(_PHILOX_TEMPLATE)
        st["state"] = {
            "counter": np.zeros(4, dtype=np.uint64),
            "key": np.array([key & _MASK64, (key >> 64) & _MASK64], dtype=np.uint64),
        }
        st["buffer_pos"] = 4
        self.bg.state = st

    def run(self, key: int, start: int):
        n = self.n
        if n == 1:
            return 0.0, 0
        self._rekey(key)
        visited = self.visited
        visited[:] = False
        visited[start] = True
        state, nvisited, t_acc, steps = start, 1, 0.0, 0
        chunk = self.chunk0
        while True:
            u = self.gen.random((chunk, 2))
            state, nvisited, t_acc, steps, done, runaway = _walk_chunk(
                self.indptr, self.indices, self.cumprob, u,
                state, visited, nvisited, t_acc, steps, n, self.step_cap,
            )
            if done:
                return t_acc, steps
            if runaway:
                raise RunawayTrial(
                    f"trial key {key} from start {start} passed {self.step_cap} "
                    "steps without covering; the cap is a theorem, so this is a bug"
                )
            chunk = min(4 * chunk, _CHUNK)


def worker_count() -> int:
    env = os.environ.get("COVERGAP_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def resolve_starts(spec: ChainSpec, starts) -> tuple[int, ...]:
    if isinstance(starts, str):
        if starts == "all":
            return tuple(range(spec.n))
        if starts == "single":
            return (0,)
        raise BadParams(f"unknown starts selector {starts!r}")
    return tuple(int(s) for s in starts)


def simulate_cover(
    spec: ChainSpec,
    cfg: CoverConfig,
    step_cap: Optional[int] = None,
) -> dict:
    """Cover-time samples per start, on cfg.time_mode's clock.

    step_cap, when given, is the runaway threshold in jump steps
    (callers derive it from max_time_factor times the Matthews upper
    bound); without it trials run uncapped.
    """
    starts = resolve_starts(spec, cfg.starts)
    sampler = _row_sampler(spec.P)
    cap = int(step_cap) if step_cap is not None else np.iinfo(np.int64).max // 2
    out = {s: np.empty(cfg.trials, dtype=np.float64) for s in starts}
    continuous = cfg.time_mode == "continuous"

    def run_block(start, j0, j1):
        col = out[start]
        runner = _TrialRunner(spec.n, sampler, cap)
        for j in range(j0, j1):
            t_acc, steps = runner.run(_trial_key(cfg.seed, start, j), start)
            col[j] = t_acc if continuous else float(steps)

    # short trials are GIL-bound (stream keying + draws), so a pool only
    # helps once the nogil walking kernel dominates; below that, contention
    # makes threads strictly slower
    workers = 1 if spec.n < 512 else worker_count()
    blocks_per_start = max(1, (4 * workers) // len(starts))
    block = -(-cfg.trials // blocks_per_start)
    plan = [
        (s, j0, min(j0 + block, cfg.trials))
        for s in starts
        for j0 in range(0, cfg.trials, block)
    ]
    # results land in per-trial slots, so any scheduling yields identical output
    if workers == 1 or len(plan) == 1:
        for s, j0, j1 in plan:
            run_block(s, j0, j1)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            jobs = [pool.submit(run_block, s, j0, j1) for s, j0, j1 in plan]
            for job in jobs:
                job.result()
    return out


def exact_cover_times(spec: ChainSpec) -> np.ndarray:
    """E[cover time] from every start by a linear solve on (state, visited-set).

    Exponential in n; guarded to n <= 16. Expected jump counts equal
    expected continuous times because holds have mean one.
    """
    n = spec.n
    if n > 16:
        raise BadParams("exact cover oracle is limited to n <= 16")
    P = spec.P
    full = (1 << n) - 1
    E = {}  # (mask) -> vector over states in mask
    masks_by_pop = sorted(range(1, full + 1), key=lambda m: -bin(m).count("1"))
    for mask in masks_by_pop:
        states = [x for x in range(n) if (mask >> x) & 1]
        k = len(states)
        if mask == full:
            E[mask] = {x: 0.0 for x in states}
            continue
        idx = {x: i for i, x in enumerate(states)}
        A = np.eye(k)
        b = np.ones(k)
        for x in states:
            for y in range(n):
                p = P[x, y]
                if p == 0.0:
                    continue
                if (mask >> y) & 1:
                    A[idx[x], idx[y]] -= p
                else:
                    b[idx[x]] += p * E[mask | (1 << y)][y]
        sol = np.linalg.solve(A, b)
        E[mask] = {x: float(sol[idx[x]]) for x in states}
    if n == 1:
        return np.zeros(1)
    return np.array([E[1 << x][x] for x in range(n)])


def estimate_tcov(
    spec: ChainSpec,
    cfg: CoverConfig,
    hd: Optional[HittingData] = None,
    sd: Optional[SpectralData] = None,
) -> CoverStats:
    """Per-start cover means with standard errors; tcov_hat is their max.

    The CV and quantiles come from the maximizing start's samples. When
    hitting data is available the Matthews upper bound supplies the
    runaway cap and the tcov_hat/H diagnostic.
    """
    step_cap = None
    if hd is not None and spec.n > 1:
        step_cap = int(math.ceil(cfg.max_time_factor * hd.H * (math.log(spec.n) + 1.0)))
    samples = simulate_cover(spec, cfg, step_cap=step_cap)
    starts = tuple(samples.keys())
    means = np.array([samples[s].mean() for s in starts])
    if cfg.trials > 1:
        stderrs = np.array(
            [samples[s].std(ddof=1) / math.sqrt(cfg.trials) for s in starts]
        )
    else:
        stderrs = np.zeros(len(starts))
    k = int(np.argmax(means))
    argmax_samples = samples[starts[k]]
    mean_k = float(means[k])
    cv = float(argmax_samples.std(ddof=1) / mean_k) if cfg.trials > 1 and mean_k > 0 else 0.0
    q05, q50, q95 = (
        (0.0, 0.0, 0.0)
        if spec.n == 1
        else tuple(float(q) for q in np.quantile(argmax_samples, [0.05, 0.5, 0.95]))
    )
    diagnostics = {}
    if sd is not None:
        diagnostics["gap_times_tcov"] = sd.gap * mean_k
    if hd is not None and hd.H > 0:
        diagnostics["tcov_over_H"] = mean_k / hd.H
    return CoverStats(
        starts=starts,
        per_start_mean=means,
        per_start_stderr=stderrs,
        tcov_hat=mean_k,
        tcov_stderr=float(stderrs[k]),
        argmax_start=starts[k],
        cv=cv,
        quantiles=(q05, q50, q95),
        trials=cfg.trials,
        time_mode=cfg.time_mode,
        samples=samples,
        diagnostics=diagnostics,
    )


def spread_constant(a: float, b: float, c: float) -> float:
    """The cover lower-bound argument (1/(4a)) / (c + 8log(8a)/(8log(8a)+b))."""
    L = 8.0 * math.log(8.0 * a)
    return (1.0 / (4.0 * a)) / (c + L / (L + b))


def matthews_bounds(hd: HittingData, sd: SpectralData) -> MatthewsBounds:
    """Upper/lower cover bounds from hitting times and the spectral gap.

    Lower-bound candidate sets are built greedily: states sorted by
    alpha_z descending, admitted when their min pairwise hitting time to
    and from the current set clears a threshold, swept over alpha * {1/4,
    1/2, 3/4}. Spectral lower bounds clamp at zero when their log argument
    is at most 1 (vacuous regime).
    """
    n = len(hd.alpha_x)
    upper = hd.H * (math.log(n) + 1.0)
    order = np.argsort(-hd.alpha_x, kind="stable")
    best = 0.0
    best_set: tuple[int, ...] = ()
    for frac in (0.25, 0.5, 0.75):
        thresh = frac * hd.alpha
        chosen: list[int] = []
        for z in order:
            z = int(z)
            if all(
                min(hd.ET[z, b], hd.ET[b, z]) > thresh for b in chosen
            ):
                chosen.append(z)
        if len(chosen) >= 2:
            sub = np.ix_(chosen, chosen)
            M = np.minimum(hd.ET[sub], hd.ET[sub].T)
            np.fill_diagonal(M, np.inf)
            val = float(M.min()) * math.log(len(chosen))
            if val > best:
                best = val
                best_set = tuple(chosen)

    arg_t = sd.gap * hd.H / 14.0
    trans_vac = arg_t <= 1.0
    lower_t = 0.0 if trans_vac else 0.25 * hd.H * math.log(arg_t)
    arg_g = spread_constant(hd.H / hd.alpha, hd.alpha * sd.gap, hd.pi_star)
    gen_vac = arg_g <= 1.0
    lower_g = 0.0 if gen_vac else 0.25 * hd.alpha * math.log(arg_g)

    if best > 0 and upper < best - 1e-9 * max(upper, 1.0):
        raise BoundViolated(f"Matthews lower {best} exceeds upper {upper}")
    return MatthewsBounds(
        upper=float(upper),
        lower=float(best),
        lower_set=best_set,
        spectral_lower_transitive=float(lower_t),
        spectral_lower_general=float(lower_g),
        transitive_vacuous=bool(trans_vac),
        general_vacuous=bool(gen_vac),
    )


def concentration_report(
    stats: CoverStats,
    sd: SpectralData,
    hd: HittingData,
    cv_threshold: float = 0.35,
    gap_tcov_threshold: float = 5.0,
) -> dict:
    """Finite-n concentration diagnostics; the thresholds are report
    parameters, not derived constants."""
    gap_tcov = sd.gap * stats.tcov_hat
    tcov_over_h = stats.tcov_hat / hd.H if hd.H > 0 else math.inf
    q05, _, q95 = stats.quantiles
    verdict = (
        "concentrating-trend"
        if (stats.cv < cv_threshold and gap_tcov > gap_tcov_threshold)
        else "non-concentrating"
    )
    return {
        "gap_times_tcov": float(gap_tcov),
        "tcov_over_H": float(tcov_over_h),
        "cv": float(stats.cv),
        "quantile_ratio": float(q95 / q05) if q05 > 0 else math.inf,
        "cv_threshold": cv_threshold,
        "gap_tcov_threshold": gap_tcov_threshold,
        "verdict": verdict,
    }


def _cv_stderr(cv: float, trials: int) -> float:
    # delta-method scale for the sampling noise of a CV estimate
    return cv * math.sqrt((1.0 + 2.0 * cv * cv) / (2.0 * max(trials - 1, 1)))


def torus_sweep(
    n: int,
    m_list: Sequence[int],
    cfg: CoverConfig,
    cap: int = 8192,
    assert_trends: bool = True,
) -> list[dict]:
    """One row per torus width m: exact spectral/hitting columns plus MC
    cover statistics, with the monotone concentration-trend checks.

    gap * tcov_hat must be non-decreasing and CV non-increasing in m, both
    up to 3-sigma MC bands.
    """
    from .chain import grid_torus
    from .hitting import hitting_times
    from .spectral import decompose

    rows = []
    for m in m_list:
        if n * m > cap:
            raise BadParams(f"n*m = {n*m} exceeds the sweep cap {cap}")
        spec = grid_torus(n, m)
        sd = decompose(spec)
        hd = hitting_times(spec)
        stats = estimate_tcov(spec, cfg, hd=hd, sd=sd)
        rows.append(
            {
                "n": n,
                "m": m,
                "gap": sd.gap,
                "alpha": hd.alpha,
                "H": hd.H,
                "tcov_hat": stats.tcov_hat,
                "tcov_stderr": stats.tcov_stderr,
                "cv": stats.cv,
                "gap_times_tcov": sd.gap * stats.tcov_hat,
                "tcov_over_H": stats.tcov_hat / hd.H,
            }
        )
    if assert_trends:
        for a, b in zip(rows, rows[1:]):
            band = 3.0 * (a["gap"] * a["tcov_stderr"] + b["gap"] * b["tcov_stderr"])
            if b["gap_times_tcov"] < a["gap_times_tcov"] - band:
                raise BoundViolated(
                    f"gap*tcov decreased from m={a['m']} to m={b['m']} beyond MC error"
                )
            cv_band = 3.0 * (
                _cv_stderr(a["cv"], cfg.trials) + _cv_stderr(b["cv"], cfg.trials)
            )
            if b["cv"] > a["cv"] + cv_band:
                raise BoundViolated(
                    f"CV increased from m={a['m']} to m={b['m']} beyond MC error"
                )
    return rows
