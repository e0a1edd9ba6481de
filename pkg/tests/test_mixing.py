import math

import numpy as np
import pytest

from covergap.chain import complete, cycle, grid_torus, hypercube, random_reversible, two_state
from covergap.cover import CoverConfig, estimate_tcov
from covergap.errors import RegimeViolation
from covergap.hitting import hitting_times
from covergap.mixing import (
    compute_profile,
    gap_upper_bounds,
    hierarchy_report,
    mix_time,
    mix_time_from_x,
    opt_oracle_max,
    sep_time,
)
from covergap.spectral import ave_l2_mix_time, decompose


def test_two_state_l2_mix():
    spec = two_state(0.5, 0.5)
    sd = decompose(spec)
    assert mix_time(spec, sd, "2", 0.5) == pytest.approx(math.log(2), abs=1e-9)


def test_l2_linf_identity_two_state():
    spec = two_state(0.5, 0.5)
    sd = decompose(spec)
    assert mix_time(spec, sd, "inf", 0.25) == pytest.approx(
        2.0 * mix_time(spec, sd, "2", 0.5), abs=3e-9
    )


def test_complete3_tv_closed_form_and_scan():
    # K3 rows: H_t(x,.) = pi + (delta - pi) e^{-1.5 t}, so TV = (2/3) e^{-1.5 t}
    spec = complete(3)
    sd = decompose(spec)
    for eps in (0.5, 0.25, 0.1):
        t = mix_time(spec, sd, "tv", eps)
        closed = math.log((2 / 3) / eps) / 1.5
        assert t == pytest.approx(closed, abs=1e-8)
        # dense grid-scan oracle
        step = sd.t_rel / 1000.0
        u = 0.0
        while (2 / 3) * math.exp(-1.5 * u) > eps:
            u += step
        assert abs(t - u) <= step + 1e-9


def test_mix_time_from_x_two_state():
    spec = two_state(0.5, 0.5)
    sd = decompose(spec)
    assert mix_time_from_x(spec, sd, 0, 0.5) == pytest.approx(math.log(2), abs=1e-9)


def test_sep_time_two_state():
    spec = two_state(0.5, 0.5)
    sd = decompose(spec)
    assert sep_time(spec, sd, 0.5) == pytest.approx(math.log(2), abs=1e-9)
    assert sep_time(spec, sd, 0.999) < 2e-3


def test_sep_below_inf_on_grid():
    spec = grid_torus(8, 8)
    sd = decompose(spec)
    for eps in (0.5, 0.25, 0.1):
        assert sep_time(spec, sd, eps) <= mix_time(spec, sd, "inf", eps) + 3e-9 * sd.t_rel


@pytest.mark.parametrize("spec", [cycle(12), random_reversible(20, 3)],
                         ids=lambda s: s.name)
def test_profile_contracts(spec):
    sd = decompose(spec)
    mp = compute_profile(spec, sd, (0.5, 0.25, 0.1))
    assert mp.t_tv[0] <= mp.t_2[0] + 1e-8
    assert all(a <= b + 1e-8 for a, b in zip(mp.t_2, mp.t_2[1:]))


def test_tv_bisection_matches_dense_scan_all_starts():
    # non-transitive chain: profile evaluated over every start
    from covergap.mixing import _d1

    spec = random_reversible(9, 12)
    sd = decompose(spec)
    eps = 0.3
    t_bis = mix_time(spec, sd, "tv", eps)
    rows = np.arange(spec.n)
    step = sd.t_rel / 1000.0
    t = 0.0
    while _d1(spec, sd, t, rows) > 2 * eps:
        t += step
    assert abs(t_bis - t) <= step + 1e-9 * sd.t_rel


def test_gap_bounds_two_state_equality():
    spec = two_state(0.5, 0.5)
    sd = decompose(spec)
    hd = hitting_times(spec)
    res = gap_upper_bounds(spec, sd, hd, x=0, eps=0.5)
    assert res["bound_ave"] == pytest.approx(math.log(2), abs=1e-12)
    assert res["t_ave_mix_2_half"] == pytest.approx(res["bound_ave"], abs=1e-9)
    # alpha_x * gap = 1 >= e/4, so the first branch applies with bound ln 2
    assert res["bound_x"] == pytest.approx(math.log(2), abs=1e-12)
    assert res["t_mix_2_from_x"] == pytest.approx(res["bound_x"], abs=1e-9)


@pytest.mark.parametrize("spec", [random_reversible(40, 3), hypercube(5), cycle(24)],
                         ids=lambda s: s.name)
def test_gap_bounds_hold_with_slack(spec):
    sd = decompose(spec)
    hd = hitting_times(spec)
    for eps in (0.5, 0.25):
        res = gap_upper_bounds(spec, sd, hd, x=0, eps=eps)
        assert res["t_mix_2_from_x"] <= res["bound_x"] + 3e-9 * sd.t_rel


def test_opt_oracle_basic():
    res = opt_oracle_max(1.0, 1.0, 1.0)
    assert res["max_value"] == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert res["argmax_beta"] == 1.0


def test_opt_oracle_regime_gate():
    with pytest.raises(RegimeViolation):
        opt_oracle_max(1.0, 1.0, 0.4)


def test_opt_oracle_plugin_value():
    # budget 5/2, lambda2 = 1, t = log(4 * 5/2) / 2 gives max exactly 1/4
    t = 0.5 * math.log(10.0)
    res = opt_oracle_max(2.5, 1.0, t)
    assert res["max_value"] == pytest.approx(0.25, rel=1e-12)


def test_opt_oracle_random_triples():
    rng = np.random.Generator(np.random.Philox(key=2024))
    for _ in range(20):
        budget = float(rng.uniform(0.1, 50.0))
        lam2 = float(rng.uniform(0.01, 3.0))
        t = float(rng.uniform(1.0, 8.0)) / (2.0 * lam2)
        res = opt_oracle_max(budget, lam2, t)
        target = budget * lam2 * math.exp(-2.0 * lam2 * t)
        assert res["max_value"] == pytest.approx(target, rel=1e-6)


def test_hierarchy_cycle32():
    spec = cycle(32)
    sd = decompose(spec)
    hd = hitting_times(spec)
    mp = compute_profile(spec, sd, (0.5, 0.25, 0.1))
    rows = hierarchy_report(spec, sd, hd, mp)
    assert all(r["verdict"] == "pass" for r in rows)


def test_hierarchy_two_state_lower_anchor():
    spec = two_state(0.5, 0.5)
    sd = decompose(spec)
    t_tv = mix_time(spec, sd, "tv", 0.25)
    assert sd.t_rel * math.log(2) <= t_tv + 1e-9


def test_hierarchy_with_cover_hypercube():
    spec = hypercube(6)
    sd = decompose(spec)
    hd = hitting_times(spec)
    mp = compute_profile(spec, sd, (0.5,))
    stats = estimate_tcov(spec, CoverConfig(trials=3000, seed=5, starts="single"),
                          hd=hd, sd=sd)
    rows = hierarchy_report(spec, sd, hd, mp, cover_stats=stats)
    ids = {r["id"] for r in rows}
    assert "hit-le-cover" in ids and "cover-le-matthews" in ids
    assert all(r["verdict"] == "pass" for r in rows)
    # Matthews upper strictly exceeds the MC mean by more than 3 sigma here
    assert hd.H * (math.log(spec.n) + 1) > stats.tcov_hat + 3 * stats.tcov_stderr


def test_ratio_comovement_across_torus_widths():
    # exact-only finite-n trend: t_rel/H and t_inf/H move together in m
    r_rel, r_inf = [], []
    for m in (1, 2, 4, 8, 16):
        spec = grid_torus(16, m)
        sd = decompose(spec)
        hd = hitting_times(spec)
        r_rel.append(sd.t_rel / hd.H)
        r_inf.append(mix_time(spec, sd, "inf", 0.5) / hd.H)
    d1 = np.diff(r_rel)
    d2 = np.diff(r_inf)
    assert (d1 * d2 >= -1e-12).all()
