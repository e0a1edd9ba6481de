"""Mixing times (TV, L2, L-infinity, average-L2, separation) and the
gap-based upper bounds with their optimization oracle.

Distance profiles are evaluated exactly from the spectral data, then
inverted by bisection; no sampling enters this module. TV profiles need
whole kernel rows, so transitive chains are evaluated from a single
representative start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec
from .errors import BoundViolated, RegimeViolation
from .spectral import (
    SpectralData,
    d2x_squared_all,
    d_inf,
    ave_l2_mix_time,
    heat_kernel_rows,
    solve_profile_time,
)

DEFAULT_EPS_GRID = (0.5, 0.25, 0.1, 0.05)


@dataclass(frozen=True)
class MixingProfile:
    """Mixing times on a declared epsilon grid (plus separation)."""

    eps_grid: tuple[float, ...]
    t_tv: tuple[float, ...]
    t_2: tuple[float, ...]
    t_inf: tuple[float, ...]
    t_ave_2: tuple[float, ...]
    t_sep: tuple[float, ...]


def _tv_rows(spec: ChainSpec) -> np.ndarray:
    # one representative start suffices on (evidence-checked) transitive chains
    if spec.is_transitive_hint:
        return np.array([0], dtype=np.int64)
    return np.arange(spec.n, dtype=np.int64)


def _d1(spec: ChainSpec, sd: SpectralData, t: float, rows: np.ndarray) -> float:
    """Worst-start L1 distance (twice the total-variation distance)."""
    Hrows = heat_kernel_rows(sd, t, rows)
    return float(np.abs(Hrows - sd.pi[None, :]).sum(axis=1).max())


def mix_time(spec: ChainSpec, sd: SpectralData, p: str, eps: float) -> float:
    """min{t : d_p(t) <= eps}; for p='tv' this is t_mix^{(1)}(2 eps).

    d_2 and d_inf come from diagonal spectral sums; the L1/TV profile is
    assembled from exact kernel rows over all starts.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if p == "2":
        level = eps * eps
        return solve_profile_time(
            lambda t: float(d2x_squared_all(sd, t).max()), level, sd.t_rel
        )
    if p == "inf":
        return solve_profile_time(lambda t: d_inf(sd, t), eps, sd.t_rel)
    if p == "tv":
        rows = _tv_rows(spec)
        return solve_profile_time(
            lambda t: _d1(spec, sd, t, rows), 2.0 * eps, sd.t_rel
        )
    raise ValueError("p must be one of 'tv', '2', 'inf'")


def mix_time_from_x(spec: ChainSpec, sd: SpectralData, x: int, eps: float) -> float:
    """min{t : d_{2,x}(t) <= eps} for a single start."""
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    sq = sd.sq_eigvecs[x]
    lam = sd.lambdas[1:]
    return solve_profile_time(
        lambda t: float(sq @ np.exp(-2.0 * lam * t)), eps * eps, sd.t_rel
    )


def sep_time(spec: ChainSpec, sd: SpectralData, eps: float) -> float:
    """Separation time: first t with H_t(x,y) >= (1-eps) pi(y) everywhere."""
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    rows = _tv_rows(spec)

    def sep(t: float) -> float:
        Hrows = heat_kernel_rows(sd, t, rows)
        return float((1.0 - Hrows / sd.pi[None, :]).max())

    t = solve_profile_time(sep, eps, sd.t_rel)
    t_inf = mix_time(spec, sd, "inf", eps)
    if t > t_inf + 3e-9 * sd.t_rel:
        raise BoundViolated(f"t_sep({eps}) = {t} exceeds t_mix_inf({eps}) = {t_inf}")
    return t


def compute_profile(
    spec: ChainSpec, sd: SpectralData, eps_grid=DEFAULT_EPS_GRID
) -> MixingProfile:
    """All mixing notions on one epsilon grid, with the contract checks.

    Verifies t_2(eps) = t_inf(eps^2)/2 (the reversible L2/L-infinity
    identity), monotonicity in eps, and t_tv <= t_2 on the shared grid.
    """
    eps_grid = tuple(sorted(eps_grid, reverse=True))
    tv = tuple(mix_time(spec, sd, "tv", e) for e in eps_grid)
    l2 = tuple(mix_time(spec, sd, "2", e) for e in eps_grid)
    linf = tuple(mix_time(spec, sd, "inf", e) for e in eps_grid)
    ave2 = tuple(ave_l2_mix_time(sd, e) for e in eps_grid)
    sep = tuple(sep_time(spec, sd, e) for e in eps_grid)
    tol = 4e-9 * sd.t_rel
    for i, e in enumerate(eps_grid):
        half_inf = 0.5 * mix_time(spec, sd, "inf", e * e)
        if abs(l2[i] - half_inf) > tol + 1e-12:
            raise BoundViolated(
                f"L2/L-inf identity fails at eps={e}: {l2[i]} vs {half_inf}"
            )
        if tv[i] > l2[i] + tol:
            raise BoundViolated(f"t_tv > t_2 at eps={e}")
    for seq in (tv, l2, linf, ave2, sep):
        diffs = np.diff(seq)
        if (diffs < -tol).any():
            raise BoundViolated("mixing time not non-decreasing as eps shrinks")
    return MixingProfile(
        eps_grid=eps_grid, t_tv=tv, t_2=l2, t_inf=linf, t_ave_2=ave2, t_sep=sep
    )


def gap_upper_bounds(
    spec: ChainSpec, sd, hd, x: int, eps: float = 0.5
) -> dict:
    """Gap-based upper bounds on the average-L2 and the per-start L2
    mixing times, asserted against the exact values.

    bound_ave = log(4 alpha gap) / (2 gap); bound_x splits on whether
    alpha_x * gap >= e * eps^2, with the otherwise-branch taking the min
    with alpha_x / (2 eps^2).
    """
    if not (0.0 < eps <= 0.5):
        raise ValueError("eps must lie in (0, 1/2]")
    gap = sd.gap
    alpha, alpha_x = hd.alpha, float(hd.alpha_x[x])
    bound_ave = math.log(4.0 * alpha * gap) / (2.0 * gap)
    if alpha_x * gap >= math.e * eps * eps:
        bound_x = math.log(alpha_x * gap / (eps * eps)) / (2.0 * gap)
    else:
        bound_x = min(
            math.log(alpha * gap / (eps * eps)) / (2.0 * gap),
            alpha_x / (2.0 * eps * eps),
        )
    t_ave = ave_l2_mix_time(sd, 0.5)
    t_x = mix_time_from_x(spec, sd, x, eps)
    tol = 3e-9 * sd.t_rel
    if t_ave > bound_ave + tol:
        raise BoundViolated(f"average-L2 bound fails: {t_ave} > {bound_ave}")
    if t_x > bound_x + tol:
        raise BoundViolated(f"per-start L2 bound fails at x={x}: {t_x} > {bound_x}")
    return {
        "bound_ave": bound_ave,
        "t_ave_mix_2_half": t_ave,
        "bound_x": bound_x,
        "t_mix_2_from_x": t_x,
    }


def opt_oracle_max(
    alpha_budget: float, lambda2: float, t: float, grid: int = 256
) -> dict:
    """Grid-search oracle for the constrained spectral-weight maximization.

    Maximize sum a_i exp(-2 b_i t) subject to sum a_i / b_i = budget,
    a_i >= 0, b_i >= lambda2. Single-rate candidates a = budget * b are
    scanned over a geometric grid; in the regime t >= 1/(2 lambda2) the
    maximizer must be the endpoint b = lambda2 with value
    budget * lambda2 * exp(-2 lambda2 t).
    """
    if grid < 100:
        raise ValueError("grid must have at least 100 points")
    if alpha_budget <= 0 or lambda2 <= 0:
        raise ValueError("budget and lambda2 must be positive")
    if t < 1.0 / (2.0 * lambda2):
        raise RegimeViolation(
            f"t = {t} < 1/(2 lambda2) = {1.0/(2.0*lambda2)}: "
            "the single-rate envelope is not monotone here"
        )
    # scan far enough that exp(-2 b t) has died off relative to the endpoint
    b_hi = max(10.0 * lambda2, 50.0 / t)
    betas = np.geomspace(lambda2, b_hi, grid)
    betas[0] = lambda2
    values = alpha_budget * betas * np.exp(-2.0 * betas * t)
    k = int(np.argmax(values))
    endpoint = alpha_budget * lambda2 * math.exp(-2.0 * lambda2 * t)
    if k != 0 or abs(values[0] - endpoint) > 1e-12 * max(endpoint, 1e-300):
        raise BoundViolated(
            f"optimization oracle: maximizer at beta={betas[k]}, not the "
            f"endpoint lambda2={lambda2}"
        )
    return {"max_value": float(values[0]), "argmax_beta": float(betas[k])}


def hierarchy_report(
    spec: ChainSpec,
    sd: SpectralData,
    hd,
    mp: MixingProfile,
    cover_stats=None,
    inf_const_tol: float = 0.0,
    strict: bool = True,
) -> list[dict]:
    """The chain of inequalities tying relaxation, mixing, hitting and cover.

    Per grid epsilon:  t_rel |log eps| <= t_tv(eps/2) <= t_2(eps)
    <= t_rel |log(eps min pi)| / 2.  Once: t_inf/9 <= H, and when a cover
    estimate is supplied, H <= tcov_hat + 3 se and tcov_hat - 3 se <=
    H (log n + 1). ``inf_const_tol`` loosens only the 1/9 row (escape
    hatch for time-convention mismatches; default off).
    """
    rows: list[dict] = []
    tol = 4e-9 * sd.t_rel

    def add(check_id, lhs, rhs, slack_tol=tol):
        ok = lhs <= rhs + slack_tol
        rows.append(
            {
                "id": check_id,
                "lhs": float(lhs),
                "rhs": float(rhs),
                "slack": float(rhs - lhs),
                "verdict": "pass" if ok else "FAIL",
            }
        )

    pmin = float(sd.pi.min())
    for e in mp.eps_grid:
        t_tv_half = mix_time(spec, sd, "tv", e / 2.0)
        t_2 = mix_time(spec, sd, "2", e)
        add(f"hierarchy-lower[eps={e}]", sd.t_rel * abs(math.log(e)), t_tv_half)
        add(f"hierarchy-tv-le-l2[eps={e}]", t_tv_half, t_2)
        # the eps^2 inside the log is what the L2/L-infinity identity
        # actually yields; with plain eps the bound fails on generic chains
        add(
            f"hierarchy-upper[eps={e}]",
            t_2,
            0.5 * sd.t_rel * abs(math.log(e * e * pmin)),
        )
    t_inf_half = mix_time(spec, sd, "inf", 0.5)
    add("inf-mix-le-hit", t_inf_half / 9.0, hd.H, tol + inf_const_tol)
    if cover_stats is not None:
        band = 3.0 * cover_stats.tcov_stderr
        add("hit-le-cover", hd.H, cover_stats.tcov_hat + band)
        add(
            "cover-le-matthews",
            cover_stats.tcov_hat - band,
            hd.H * (math.log(spec.n) + 1.0),
        )
    failed = [r for r in rows if r["verdict"] == "FAIL"]
    if strict and failed:
        f = failed[0]
        raise BoundViolated(f"{f['id']}: lhs={f['lhs']} rhs={f['rhs']}")
    return rows
