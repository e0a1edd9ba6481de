"""Command-line front end: analyze, cover, sweep, verify.

One entry point, no daemon, no network. Reports are emitted in canonical
form (sorted keys, 17-significant-digit floats) so identical runs produce
byte-identical files. COVERGAP_THREADS caps the simulation worker pool
and nothing else.

Exit codes: 0 success, 1 bound violation, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import chain as chainmod
from .chain import ChainSpec, FamilyParams, build_family, load_spec
from .cover import CoverConfig, estimate_tcov, matthews_bounds, torus_sweep
from .errors import (
    BadParams,
    BoundViolated,
    CovergapError,
    Disconnected,
    DisconnectedComplement,
    NonStochastic,
    NotReversible,
    NotTransitiveEvidence,
    RunawayTrial,
    SingularSolve,
)
from .hitting import hitting_times
from .mixing import DEFAULT_EPS_GRID, compute_profile
from .reportio import canonical_json, csv_table, write_csv, write_json
from .spectral import decompose, eigentime_alpha
from .verify import run_verify, verify_ok

SWEEP_COLUMNS = [
    "n", "m", "gap", "alpha", "H", "tcov_hat", "tcov_stderr", "cv",
    "gap_times_tcov", "tcov_over_H",
]

_INPUT_ERRORS = (
    BadParams,
    NonStochastic,
    Disconnected,
    DisconnectedComplement,
    NotReversible,
    NotTransitiveEvidence,
    SingularSolve,
    OSError,
    json.JSONDecodeError,
    ValueError,
)
_BOUND_ERRORS = (BoundViolated, RunawayTrial)


def _parse_params(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise BadParams(f"bad --params item {item!r}; expected key=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = int(v)
        except ValueError:
            out[k.strip()] = float(v)
    return out


def _parse_starts(text: str):
    if text in ("all", "single"):
        return text
    return tuple(int(s) for s in text.split(","))


def _parse_eps_grid(text: str) -> tuple:
    return tuple(float(s) for s in text.split(","))


def _resolve_spec(args) -> ChainSpec:
    if getattr(args, "spec", None):
        if getattr(args, "family", None):
            raise BadParams("give either --spec or --family, not both")
        return load_spec(args.spec)
    if getattr(args, "family", None):
        params = _parse_params(args.params or "")
        return build_family(
            FamilyParams(family=args.family, params=params, seed=args.seed)
        )
    raise BadParams("a chain source is required: --spec FILE or --family NAME")


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if not args.quiet:
            print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    spec = _resolve_spec(args)
    sd = decompose(spec)
    hd = hitting_times(spec)
    alpha_s = eigentime_alpha(sd)
    if abs(alpha_s - hd.alpha) > 1e-8 * hd.alpha:
        raise BoundViolated(
            f"spectral and hitting routes to alpha disagree: "
            f"{alpha_s} vs {hd.alpha}"
        )
    mp = compute_profile(spec, sd, _parse_eps_grid(args.eps_grid))
    mb = matthews_bounds(hd, sd)
    report = {
        "chain": spec.name,
        "n": spec.n,
        "gap": sd.gap,
        "t_rel": sd.t_rel,
        "alpha_spectral": alpha_s,
        "alpha_hitting": hd.alpha,
        "H": hd.H,
        "ratio_H_alpha": hd.H / hd.alpha,
        "pi_star": hd.pi_star,
        "alpha_x_min": float(hd.alpha_x.min()),
        "alpha_x_max": float(hd.alpha_x.max()),
        "mixing": {
            "eps_grid": list(mp.eps_grid),
            "t_tv": list(mp.t_tv),
            "t_2": list(mp.t_2),
            "t_inf": list(mp.t_inf),
            "t_ave_2": list(mp.t_ave_2),
            "t_sep": list(mp.t_sep),
        },
        "matthews": {
            "upper": mb.upper,
            "lower": mb.lower,
            "spectral_lower_transitive": mb.spectral_lower_transitive,
            "spectral_lower_general": mb.spectral_lower_general,
            "transitive_vacuous": mb.transitive_vacuous,
            "general_vacuous": mb.general_vacuous,
        },
    }
    _emit(args, canonical_json(report))
    return 0


def cmd_cover(args) -> int:
    spec = _resolve_spec(args)
    sd = decompose(spec)
    hd = hitting_times(spec)
    cfg = CoverConfig(
        trials=args.trials,
        seed=args.seed if args.seed is not None else 0,
        starts=_parse_starts(args.starts),
        time_mode=args.time_mode,
    )
    stats = estimate_tcov(spec, cfg, hd=hd, sd=sd)
    report = {
        "chain": spec.name,
        "n": spec.n,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "time_mode": cfg.time_mode,
        "starts": list(stats.starts),
        "per_start_mean": [float(v) for v in stats.per_start_mean],
        "per_start_stderr": [float(v) for v in stats.per_start_stderr],
        "tcov_hat": stats.tcov_hat,
        "tcov_stderr": stats.tcov_stderr,
        "argmax_start": stats.argmax_start,
        "cv": stats.cv,
        "quantiles": {"q05": stats.quantiles[0], "q50": stats.quantiles[1],
                      "q95": stats.quantiles[2]},
        "diagnostics": {k: float(v) for k, v in stats.diagnostics.items()},
    }
    _emit(args, canonical_json(report))
    return 0


def cmd_sweep(args) -> int:
    m_list = [int(s) for s in args.m_list.split(",")]
    cfg = CoverConfig(
        trials=args.trials,
        seed=args.seed if args.seed is not None else 0,
        starts="single",
    )
    rows = torus_sweep(args.n, m_list, cfg)
    _emit(args, csv_table(SWEEP_COLUMNS, rows))
    return 0


def cmd_verify(args) -> int:
    spec = _resolve_spec(args)
    rows = run_verify(
        spec,
        seed=args.seed if args.seed is not None else 0,
        trials=args.trials,
        eps_grid=_parse_eps_grid(args.eps_grid),
    )
    ok = verify_ok(rows)
    report = {"chain": spec.name, "n": spec.n, "all_pass": ok, "rows": rows}
    text = canonical_json(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if not args.quiet:
        for r in rows:
            print(f"{r['verdict']:>5}  {r['id']}: lhs={r['lhs']:.12g} "
                  f"rhs={r['rhs']:.12g} slack={r['slack']:.12g}")
        print(f"{'PASS' if ok else 'FAIL'}  {spec.name}")
    elif not args.out:
        sys.stdout.write(text)
    return 0 if ok else 1


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", help="chain-spec JSON file")
    p.add_argument("--family", help="benchmark family name")
    p.add_argument("--params", help="family parameters, e.g. n=64,m=4")
    p.add_argument("--seed", type=int, default=None,
                   help="seed (families that sample, and all simulation)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="covergap",
        description="Spectral, hitting, mixing and cover-time analysis of "
                    "finite reversible chains, with machine-checked bounds.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="exact spectral/hitting/mixing summary")
    _add_spec_args(p)
    p.add_argument("--eps-grid", default="0.5,0.25,0.1,0.05")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("cover", help="Monte Carlo cover-time estimate")
    _add_spec_args(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--starts", default="single", help="all | single | i,j,...")
    p.add_argument("--time-mode", choices=["continuous", "discrete-steps"],
                   default="continuous")
    p.set_defaults(fn=cmd_cover)

    p = sub.add_parser("sweep", help="grid-torus concentration sweep (CSV)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m-list", required=True, help="comma-separated widths")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="run the full inequality battery")
    _add_spec_args(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--eps-grid", default="0.5,0.25,0.1")
    p.set_defaults(fn=cmd_verify)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _BOUND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CovergapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
