"""One-shot inequality battery over every theorem-backed check.

Produces one row per inequality instance: {id, lhs, rhs, slack, verdict}.
Verdicts are pass / FAIL / skip / report; the battery succeeds iff no row
FAILs. Transitive-only checks are gated on hitting-time symmetry evidence,
not on the hint alone.
"""

from __future__ import annotations

import math

import numpy as np

from .chain import ChainSpec, validate
from .cover import CoverConfig, estimate_tcov, exact_cover_times, matthews_bounds
from .errors import BoundViolated, NotTransitiveEvidence
from .hitting import (
    hitting_times,
    near_set_general,
    near_set_transitive,
    slow_point_mass_check,
    tail_integral_bound_check,
    transitive_ratio_check,
    z_identity_deviation,
)
from .mixing import (
    compute_profile,
    gap_upper_bounds,
    hierarchy_report,
    opt_oracle_max,
)
from .spectral import decompose, eigentime_alpha
from .tails import (
    conditioned_local_time_check,
    hit_prob_sandwich,
    hit_tail_bounds,
    induced_hit_identity_check,
    kernel_diag_dominance_check,
    quasistationary_bounds_report,
    sep_tail_check,
)

DEFAULT_EPS_GRID = (0.5, 0.25, 0.1)
_STEP_BUDGET = 4.0e8  # MC step budget per verify run; trials shrink to fit


def _row(check_id, lhs, rhs, ok, note=""):
    return {
        "id": check_id,
        "lhs": float(lhs),
        "rhs": float(rhs),
        "slack": float(rhs - lhs),
        "verdict": "pass" if ok else "FAIL",
        "note": note,
    }


def _skip(check_id, note):
    return {"id": check_id, "lhs": 0.0, "rhs": 0.0, "slack": 0.0,
            "verdict": "skip", "note": note}


def _effective_trials(requested: int, upper: float) -> int:
    cap = int(_STEP_BUDGET / max(upper, 1.0))
    return max(300, min(requested, cap))


def run_verify(
    spec: ChainSpec,
    seed: int = 0,
    trials: int = 10_000,
    eps_grid=DEFAULT_EPS_GRID,
    sd=None,
    hd=None,
) -> list[dict]:
    """Run every inequality check against one chain; returns the rows."""
    rows: list[dict] = []
    sd = decompose(spec) if sd is None else sd
    hd = hitting_times(spec) if hd is None else hd
    n = spec.n

    diag = validate(spec, hd.ET)
    rows.append(
        _row("chain-valid", max(diag.max_row_dev, diag.max_stationarity_dev,
                                diag.max_detailed_balance_dev), 1e-10, diag.ok)
    )

    alpha_s = eigentime_alpha(sd)
    rows.append(
        _row("eigentime-identity", abs(alpha_s - hd.alpha), 1e-8 * hd.alpha,
             abs(alpha_s - hd.alpha) < 1e-8 * hd.alpha)
    )
    zdev = z_identity_deviation(hd)
    rows.append(_row("z-identity", zdev, 1e-8 * hd.alpha, zdev < 1e-8 * hd.alpha))

    transitive = False
    if spec.is_transitive_hint:
        try:
            info = transitive_ratio_check(hd)
            transitive = True
            rows.append(
                _row("ratio-transitive", info["ratio"], 2.0 + 1e-9, True,
                     note=f"symmetry_dev={info['symmetry_dev']:.3e}")
            )
        except (NotTransitiveEvidence, BoundViolated) as exc:
            rows.append(_row("ratio-transitive", math.inf, 2.0, False, note=str(exc)))
    else:
        rows.append(_skip("ratio-transitive", "no transitivity hint"))

    for eps in (0.25, 0.5):
        if transitive:
            try:
                res = near_set_transitive(spec, hd, sd, 0, eps)
                rows.append(
                    _row(f"near-set-count-transitive[eps={eps}]",
                         res["size"], res["bound_count"], True)
                )
            except BoundViolated as exc:
                rows.append(_row(f"near-set-count-transitive[eps={eps}]",
                                 1.0, 0.0, False, note=str(exc)))
        else:
            rows.append(_skip(f"near-set-count-transitive[eps={eps}]",
                              "transitive chains only"))
        try:
            res = near_set_general(spec, hd, sd, 0, eps)
            rows.append(
                _row(f"near-set-mass-general[eps={eps}]",
                     res["mass"], res["bound_mass"], True)
            )
        except BoundViolated as exc:
            rows.append(_row(f"near-set-mass-general[eps={eps}]",
                             1.0, 0.0, False, note=str(exc)))

    try:
        res = slow_point_mass_check(hd)
        rows.append(_row("slow-point-mass", res["floor"], res["mass"], True))
    except BoundViolated as exc:
        rows.append(_row("slow-point-mass", 1.0, 0.0, False, note=str(exc)))

    pairs = [(0, n - 1), (0, n // 2), (n // 3, 2 * n // 3)] if n > 1 else []
    s_vals = [0.0, 0.5 * sd.t_rel, 2.0 * sd.t_rel,5.0 * sd.t_rel]
    try:
        worst = tail_integral_bound_check(sd, hd, pairs, s_vals)
        rows.append(_row("tail-integral-bound", -worst, 0.0, True))
    except BoundViolated as exc:
        rows.append(_row("tail-integral-bound", 1.0, 0.0, False, note=str(exc)))

    if n > 1:
        try:
            gb = gap_upper_bounds(spec, sd, hd, x=0, eps=0.5)
            rows.append(_row("ave-l2-gap-bound", gb["t_ave_mix_2_half"],
                             gb["bound_ave"], True))
            rows.append(_row("l2-from-x-gap-bound", gb["t_mix_2_from_x"],
                             gb["bound_x"], True))
        except BoundViolated as exc:
            rows.append(_row("ave-l2-gap-bound", 1.0, 0.0, False, note=str(exc)))

        try:
            res = opt_oracle_max(hd.alpha, sd.gap, 1.0 / sd.gap)
            rows.append(_row("opt-oracle-endpoint", res["argmax_beta"], sd.gap, True))
        except BoundViolated as exc:
            rows.append(_row("opt-oracle-endpoint", 1.0, 0.0, False, note=str(exc)))

    # Monte Carlo cover estimate: worst-case start handling per evidence
    mb = matthews_bounds(hd, sd)
    eff_trials = _effective_trials(trials, mb.upper)
    if transitive:
        starts = (0,)
    elif n <= 8:
        starts = "all"  # full budget per start: the exact oracle needs it
    elif n <= 128:
        starts = "all"
        eff_trials = max(400, eff_trials // n)
    else:
        starts = (int(np.argmax(hd.ET.max(axis=1))), 0)
    cfg = CoverConfig(trials=eff_trials, seed=seed, starts=starts)
    stats = estimate_tcov(spec, cfg, hd=hd, sd=sd)
    band = 3.0 * stats.tcov_stderr

    if n <= 8:
        exact = exact_cover_times(spec)
        worst_dev = 0.0
        for i, s in enumerate(stats.starts):
            se = max(float(stats.per_start_stderr[i]), 1e-12)
            worst_dev = max(worst_dev, abs(stats.per_start_mean[i] - exact[s]) / (3 * se))
        rows.append(_row("cover-mean-vs-exact", worst_dev, 1.0, worst_dev <= 1.0,
                         note=f"{len(stats.starts)} starts, 3-sigma units"))

    rows.append(_row("hit-le-cover", hd.H, stats.tcov_hat + band,
                     hd.H <= stats.tcov_hat + band))
    rows.append(_row("cover-le-matthews", stats.tcov_hat - band, mb.upper,
                     stats.tcov_hat - band <= mb.upper))
    rows.append(_row("matthews-lower-le-cover", mb.lower, stats.tcov_hat + band,
                     mb.lower <= stats.tcov_hat + band))
    if transitive:
        note = "vacuous (clamped to 0)" if mb.transitive_vacuous else ""
        rows.append(
            _row("cover-lower-spectral-transitive",
                 mb.spectral_lower_transitive, stats.tcov_hat - band,
                 mb.spectral_lower_transitive <= stats.tcov_hat - band, note=note)
        )
    else:
        rows.append(_skip("cover-lower-spectral-transitive", "transitive chains only"))
    note = "vacuous (clamped to 0)" if mb.general_vacuous else ""
    rows.append(
        _row("cover-lower-spectral-general",
             mb.spectral_lower_general, stats.tcov_hat - band,
             mb.spectral_lower_general <= stats.tcov_hat - band, note=note)
    )
    if isinstance(starts, str) and starts == "all":
        aldous = float(stats.per_start_mean.min()) + hd.H
        rows.append(_row("cover-start-decomposition", stats.tcov_hat - band, aldous,
                         stats.tcov_hat - band <= aldous))

    if n > 1:
        mp = compute_profile(spec, sd, eps_grid)
        rows.extend(hierarchy_report(spec, sd, hd, mp, cover_stats=stats, strict=False))

    # killed-chain batteries on two deterministic target sets
    target_sets = [(n - 1,)]
    if n >= 4:
        target_sets.append(tuple(range(max(1, n // 4))))
    for A in target_sets:
        tag = f"|A|={len(A)}"
        sub = quasistationary_bounds_report(spec, sd, A, strict=False)
        for r in sub:
            r["id"] = f"{r['id']}[{tag}]"
        rows.extend(sub)

    if n > 2:
        x = 0
        y = int(np.argmax(hd.ET[:, x]))
        rows.extend(
            hit_tail_bounds(spec, sd, hd, x, y, eps=0.25,
                            transitive=transitive, strict=False)
        )
        rows.extend(sep_tail_check(spec, sd, x, y, eps=0.25, strict=False))
        st_grid = [(0.0, hd.alpha), (0.5 * sd.t_rel, hd.alpha),
                   (2.0 * sd.t_rel, 0.5 * hd.alpha)]
        rows.extend(
            conditioned_local_time_check(spec, sd, x, st_grid,
                                         assert_bound=transitive, strict=False)
        )
        for (t, s) in [(0.5 * hd.alpha, 0.5 * hd.alpha), (hd.alpha, 2.0 * hd.alpha)]:
            try:
                res = hit_prob_sandwich(spec, sd, y, x, t, s)
                rows.append(_row(f"visit-ratio-sandwich[t={t:.6g},s={s:.6g}]",
                                 res["lower"], res["upper"], True,
                                 note=f"exact={res['exact']:.12g}"))
            except BoundViolated as exc:
                rows.append(_row(f"visit-ratio-sandwich[t={t:.6g},s={s:.6g}]",
                                 1.0, 0.0, False, note=str(exc)))

    if transitive:
        try:
            kernel_diag_dominance_check(sd, [0.1 * sd.t_rel, sd.t_rel, 5.0 * sd.t_rel])
            rows.append(_row("kernel-diagonal-dominance", 0.0, 1e-12, True))
        except BoundViolated as exc:
            rows.append(_row("kernel-diagonal-dominance", 1.0, 0.0, False, note=str(exc)))
    else:
        rows.append(_skip("kernel-diagonal-dominance", "transitive chains only"))

    if spec.name.startswith("grid_torus") and ",1)" not in spec.name and n > 4:
        m = n // int(spec.name.split("(")[1].split(",")[0])
        try:
            res = induced_hit_identity_check(spec, hd, tuple(range(m)))
            rows.append(_row("watched-strip-hit-identity", res["max_rel_dev"], 1e-6,
                             True, note=f"M_induced={res['M_induced']:.6g}"))
        except BoundViolated as exc:
            rows.append(_row("watched-strip-hit-identity", 1.0, 0.0, False,
                             note=str(exc)))

    return rows


def verify_ok(rows: list[dict]) -> bool:
    return not any(r["verdict"] == "FAIL" for r in rows)
