"""Acceptance suite: one test per criterion, one printed verdict line each.

The corpus (every family member at or under 1024 states plus 50 random
reversible chains) is built once per session; criterion 1 owns the
construction budget, later criteria reuse the prebuilt data.
"""

import json
import math
import os
import subprocess
import sys
import time
from dataclasses import dataclass

import numpy as np
import pytest

from covergap.chain import ChainSpec, complete, cycle, grid_torus, hypercube, random_reversible, two_state
from covergap.cover import CoverConfig, estimate_tcov, exact_cover_times, simulate_cover, torus_sweep
from covergap.hitting import HittingData, hitting_times, transitive_ratio_check
from covergap.mixing import gap_upper_bounds, mix_time, opt_oracle_max
from covergap.spectral import SpectralData, ave_l2_mix_time, decompose, eigentime_alpha
from covergap.verify import run_verify, verify_ok


@dataclass
class Entry:
    spec: ChainSpec
    sd: SpectralData
    hd: HittingData


@dataclass
class Corpus:
    entries: list
    build_seconds: float


def _members():
    for n in (4, 16, 64, 256, 1024):
        yield cycle(n)
    for n, m in ((4, 4), (8, 8), (16, 4), (16, 16), (32, 32), (64, 16)):
        yield grid_torus(n, m)
    for d in (3, 4, 6, 8, 10):
        yield hypercube(d)
    for n in (3, 4, 5, 32, 256):
        yield complete(n)
    yield two_state(0.5, 0.5)
    for i in range(50):
        yield random_reversible(2 + (7 * i) % 59, seed=1000 + i)


@pytest.fixture(scope="session")
def corpus():
    t0 = time.time()
    entries = [Entry(spec, decompose(spec), hitting_times(spec)) for spec in _members()]
    return Corpus(entries=entries, build_seconds=time.time() - t0)


def _verdict(k, ok, detail):
    line = f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def test_criterion_1_eigentime_identity(corpus):
    t0 = time.time()
    worst = 0.0
    for e in corpus.entries:
        dev = abs(eigentime_alpha(e.sd) - e.hd.alpha) / (1e-8 * e.hd.alpha)
        worst = max(worst, dev)
        assert dev < 1.0, e.spec.name
    elapsed = corpus.build_seconds + (time.time() - t0)
    _verdict(
        1,
        worst < 1.0 and elapsed < 30.0,
        f"spectral vs hitting alpha on {len(corpus.entries)} chains, worst "
        f"{worst:.3f} of tolerance, {elapsed:.1f}s (< 30s)",
    )


def test_criterion_2_z_identity(corpus):
    from covergap.hitting import z_identity_deviation

    worst = 0.0
    for e in corpus.entries:
        dev = z_identity_deviation(e.hd) / (1e-8 * e.hd.alpha)
        worst = max(worst, dev)
        assert dev < 1.0, e.spec.name
    _verdict(2, worst < 1.0,
             f"four-way fundamental-matrix identity, worst {worst:.3f} of tolerance")


def test_criterion_3_closed_form_anchors():
    t0 = time.time()
    spec = two_state(0.5, 0.5)
    sd = decompose(spec)
    hd = hitting_times(spec)
    ln2 = math.log(2.0)
    assert sd.gap == pytest.approx(1.0, abs=1e-12)
    assert hd.alpha == pytest.approx(1.0, abs=1e-12)
    assert hd.H == pytest.approx(2.0, abs=1e-12)
    assert mix_time(spec, sd, "2", 0.5) == pytest.approx(ln2, abs=1e-9)
    assert ave_l2_mix_time(sd, 0.5) == pytest.approx(ln2, abs=1e-9)
    gb = gap_upper_bounds(spec, sd, hd, x=0, eps=0.5)
    assert gb["bound_ave"] == pytest.approx(gb["t_ave_mix_2_half"], abs=1e-9)

    sd4 = decompose(cycle(4))
    np.testing.assert_allclose(sd4.lambdas, [0.0, 1.0, 1.0, 2.0], atol=1e-10)
    hd4 = hitting_times(cycle(4))
    assert hd4.ET[0, 1] == pytest.approx(3.0, abs=1e-9)
    assert hd4.ET[0, 2] == pytest.approx(4.0, abs=1e-9)

    k3 = complete(3)
    hd3 = hitting_times(k3)
    assert hd3.alpha == pytest.approx(4.0 / 3.0, abs=1e-10)
    exact = exact_cover_times(k3)
    np.testing.assert_allclose(exact, 3.0, atol=1e-10)
    samples = simulate_cover(k3, CoverConfig(trials=100_000, seed=2026, starts=(0,)))[0]
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    mc_ok = abs(samples.mean() - 3.0) <= 3.0 * se
    elapsed = time.time() - t0
    _verdict(
        3,
        mc_ok and elapsed < 5.0,
        f"two_state/cycle(4)/complete(3) anchors; MC cover {samples.mean():.4f} "
        f"vs exact 3 within 3se ({3*se:.4f}), {elapsed:.1f}s (< 5s)",
    )


def test_criterion_4_theorem_oracle_suites(corpus):
    t0 = time.time()
    n_rows = 0
    n_fail = 0
    first_fail = ""
    for e in corpus.entries:
        rows = run_verify(e.spec, seed=7, trials=10_000, sd=e.sd, hd=e.hd)
        n_rows += len(rows)
        bad = [r for r in rows if r["verdict"] == "FAIL"]
        if bad and not first_fail:
            first_fail = f"{e.spec.name}: {bad[0]['id']}"
        n_fail += len(bad)
    elapsed = time.time() - t0
    _verdict(
        4,
        n_fail == 0 and elapsed < 300.0,
        f"{n_rows} inequality rows over {len(corpus.entries)} chains, "
        f"{n_fail} violations{' (' + first_fail + ')' if first_fail else ''}, "
        f"{elapsed:.1f}s (< 300s)",
    )


def test_criterion_5_cover_exact_oracle(corpus):
    checked = 0
    worst = 0.0
    for e in corpus.entries:
        if e.spec.n > 8:
            continue
        exact = exact_cover_times(e.spec)
        samples = simulate_cover(
            e.spec, CoverConfig(trials=10_000, seed=31, starts="all")
        )
        for s, arr in samples.items():
            se = arr.std(ddof=1) / math.sqrt(len(arr))
            dev = abs(arr.mean() - exact[s]) / max(3.0 * se, 1e-12)
            worst = max(worst, dev)
            assert dev <= 1.0, f"{e.spec.name} start {s}"
        checked += 1
    _verdict(
        5,
        checked >= 5 and worst <= 1.0,
        f"MC cover vs product-chain oracle on {checked} small chains, "
        f"worst {worst:.3f} of the 3-sigma band",
    )


def test_criterion_6_torus_sweep_trend():
    t0 = time.time()
    rows = torus_sweep(
        64, [1, 4, 16, 64], CoverConfig(trials=10_000, seed=64, starts="single")
    )
    gt = [r["gap_times_tcov"] for r in rows]
    cv = [r["cv"] for r in rows]
    strictly_up = all(a < b for a, b in zip(gt, gt[1:]))
    factor = gt[-1] / gt[0]
    cv_halved = cv[-1] <= 0.5 * cv[0]
    base = 1.0 - math.cos(2.0 * math.pi / 64.0)
    gap_ok = all(
        abs(r["gap"] / (base * (1.0 if r["m"] == 1 else 0.5)) - 1.0) <= 0.2
        for r in rows
    )
    elapsed = time.time() - t0
    _verdict(
        6,
        strictly_up and factor >= 5.0 and cv_halved and gap_ok and elapsed < 600.0,
        f"gap*tcov {gt[0]:.2f} -> {gt[-1]:.2f} (x{factor:.1f} >= 5), "
        f"CV {cv[0]:.3f} -> {cv[-1]:.3f} (halved: {cv_halved}), "
        f"gap within 20% of the product formula: {gap_ok}, "
        f"{elapsed:.0f}s (< 600s)",
    )


def test_criterion_7_optimization_oracle():
    rng = np.random.Generator(np.random.Philox(key=7))
    worst = 0.0
    for _ in range(20):
        budget = float(rng.uniform(0.2, 80.0))
        lam2 = float(rng.uniform(0.005, 4.0))
        t = float(rng.uniform(1.0, 10.0)) / (2.0 * lam2)
        res = opt_oracle_max(budget, lam2, t)
        target = budget * lam2 * math.exp(-2.0 * lam2 * t)
        worst = max(worst, abs(res["max_value"] - target) / target)
    _verdict(7, worst <= 1e-6,
             f"endpoint maximizer over 20 random triples, worst rel dev {worst:.2e}")


def test_criterion_8_transitive_ratio(corpus):
    checked = 0
    for e in corpus.entries:
        if not e.spec.is_transitive_hint:
            continue
        r = transitive_ratio_check(e.hd)["ratio"]
        assert 1.0 - 1e-9 <= r <= 2.0 + 1e-9, e.spec.name
        checked += 1
    r2 = transitive_ratio_check(hitting_times(two_state(0.5, 0.5)))["ratio"]
    assert r2 == pytest.approx(2.0, abs=1e-12)
    ratios_ok = all(
        transitive_ratio_check(hitting_times(complete(n)))["ratio"]
        == pytest.approx(n / (n - 1.0), abs=1e-9)
        for n in (3, 4, 5, 32, 256)
    )
    _verdict(
        8,
        checked >= 20 and ratios_ok,
        f"H/alpha in [1,2] on {checked} transitive chains; two_state attains 2; "
        f"complete(n) matches n/(n-1)",
    )


def _run_cli(args, threads):
    env = dict(os.environ)
    env["COVERGAP_THREADS"] = str(threads)
    return subprocess.run(
        [sys.executable, "-m", "covergap.cli", *args],
        capture_output=True, text=True, env=env,
    )


def test_criterion_9_byte_determinism(tmp_path):
    outs = []
    for i, threads in enumerate((1, 2, 6)):
        out = tmp_path / f"v{i}.json"
        res = _run_cli(
            ["verify", "--family", "grid_torus", "--params", "n=8,m=4",
             "--trials", "1500", "--seed", "5", "--out", str(out), "--quiet"],
            threads,
        )
        assert res.returncode == 0
        outs.append(out.read_bytes())
    verify_identical = outs[0] == outs[1] == outs[2]

    outs = []
    for i, threads in enumerate((1, 3, 8)):
        out = tmp_path / f"c{i}.json"
        res = _run_cli(
            ["cover", "--family", "hypercube", "--params", "d=5",
             "--trials", "2000", "--seed", "17", "--starts", "all",
             "--out", str(out), "--quiet"],
            threads,
        )
        assert res.returncode == 0
        outs.append(out.read_bytes())
    cover_identical = outs[0] == outs[1] == outs[2]
    _verdict(
        9,
        verify_identical and cover_identical,
        "verify and cover outputs byte-identical across "
        "COVERGAP_THREADS in {1,2,6} / {1,3,8}",
    )
