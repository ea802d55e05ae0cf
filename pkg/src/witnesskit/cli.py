"""Command-line front end: ``witnesskit {parity,factor,wphp,verify,transcript}``.

Data (json/csv/human) goes to stdout; the effective configuration,
warnings and assertion results go to stderr. Exit codes: 0 success,
1 failed ``--assert``, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import ConfigError
from .experiments import (
    CHECKS,
    DEFAULT_SOLVER,
    ExperimentConfig,
    assert_report,
    enumerate_check,
    run_trials,
)
from .numtheory import RabinModulus
from .reductions import (
    SOLVER_IDS,
    FactoringConfig,
    ParityConfig,
    WphpConfig,
    factoring_attack,
    make_solver,
    parity_decider,
    wphp_attack,
)
from .bitparity import BitVec
from .rng import RandomStream


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _add_parity_args(p):
    g = p.add_argument_group("parity (hidden-row blinding)")
    g.add_argument("--m", type=int, default=30, help="vector length m (default 30)")
    g.add_argument("--k", type=int, default=5, help="query budget k (default 5)")
    g.add_argument("--rows", type=int, default=None,
                   help="number of rows A; default m. A >= 3k keeps the 2/3 success guarantee")


def _add_factor_args(p):
    g = p.add_argument_group("factor (Rabin square roots)")
    g.add_argument("--prime-bits", type=int, default=16, help="bit size of p and q (default 16)")
    g.add_argument("--k", type=int, default=5, help="query budget k (default 5)")
    g.add_argument("--m", type=int, default=None, help="sequence length; default |n|, the bit length of n")


def _add_wphp_args(p):
    g = p.add_argument_group("wphp (collision extraction)")
    g.add_argument("--n", type=int, default=1024, help="codomain size n of h(u) = u mod n (default 1024)")
    g.add_argument("--k", type=int, default=2, help="query budget k (default 2)")
    g.add_argument("--seq-len", type=int, default=None, help="sequence length; default |n|")


def _add_run_args(p, experiment):
    p.add_argument("--trials", type=int, default=1000, help="number of trials (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="64-bit master seed (default 0)")
    p.add_argument("--solver", default=DEFAULT_SOLVER[experiment],
                   help=f"one of {', '.join(SOLVER_IDS[experiment])} (default {DEFAULT_SOLVER[experiment]})")
    p.add_argument("--format", choices=("json", "csv", "human"), default="json")
    p.add_argument("--assert", dest="check_assert", action="store_true",
                   help="exit 1 unless the statistical bounds hold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="witnesskit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"witnesskit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parity", help="parity from a budgeted prefix-parity solver")
    _add_parity_args(p)
    _add_run_args(p, "parity")

    p = sub.add_parser("factor", help="factor n from a budgeted square-root solver")
    _add_factor_args(p)
    _add_run_args(p, "factor")

    p = sub.add_parser("wphp", help="hash collisions from a budgeted preimage solver")
    _add_wphp_args(p)
    _add_run_args(p, "wphp")

    p = sub.add_parser("verify", help="exhaustive checks at tiny sizes")
    p.add_argument("--check", choices=sorted(CHECKS) + ["all"], default="all")
    p.add_argument("--m", type=int, default=None, help="size for blinding-uniformity / abort-bound (2 or 3)")

    p = sub.add_parser("transcript", help="run one seeded game and dump its transcript as JSON")
    p.add_argument("--game", choices=("parity", "factor", "wphp"), default="parity")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--prime-bits", type=int, default=16)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--seq-len", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", default=None)
    return parser


def _experiment_params(args) -> dict:
    if args.command == "parity":
        return {"m": args.m, "k": args.k, "rows": args.rows}
    if args.command == "factor":
        return {"prime_bits": args.prime_bits, "k": args.k, "m": args.m}
    return {"n": args.n, "k": args.k, "seq_len": args.seq_len}


def _warn_preconditions(cfg: ExperimentConfig) -> None:
    rcfg = cfg.reduction_config()
    if cfg.experiment == "parity" and not rcfg.bound_holds:
        _note(f"warning: rows A={rcfg.A} < 3k={3 * rcfg.k}: the abort rate may exceed 1/3 "
              "and the 2/3 success guarantee does not apply")
    if cfg.experiment == "factor" and rcfg.m is not None and rcfg.m <= rcfg.k:
        _note(f"warning: m={rcfg.m} <= k={rcfg.k}: no unqueried index is guaranteed")
    if cfg.experiment == "wphp" and rcfg.k >= rcfg.L - 1:
        _note(f"warning: k={rcfg.k} >= seq_len-1={rcfg.L - 1}: the counting bound no longer bites")


def _run_experiment(args) -> int:
    cfg = ExperimentConfig(args.command, _experiment_params(args), args.trials, args.seed, args.solver)
    cfg.reduction_config()
    if args.solver not in SOLVER_IDS[args.command]:
        raise ConfigError(f"unknown solver {args.solver!r}; choose from {SOLVER_IDS[args.command]}")
    _note("config: " + json.dumps(cfg.echo(), sort_keys=True))
    _warn_preconditions(cfg)
    report = run_trials(cfg)
    _note(f"wall time: {report.wall_time:.2f}s")
    if args.format == "json":
        sys.stdout.write(report.to_json())
    elif args.format == "csv":
        sys.stdout.write(report.to_csv())
    else:
        sys.stdout.write(report.to_human())
    if args.check_assert:
        failed = False
        for name, ok, detail in assert_report(report):
            _note(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            failed |= not ok
        return 1 if failed else 0
    return 0


def _run_verify(args) -> int:
    names = sorted(CHECKS) if args.check == "all" else [args.check]
    failed = False
    for name in names:
        params = {}
        if args.m is not None and name in ("blinding-uniformity", "abort-bound"):
            params["m"] = args.m
        result = enumerate_check(name, **params)
        print(result.line())
        failed |= not result.passed
    return 1 if failed else 0


def _run_transcript(args) -> int:
    rng = RandomStream.for_trial(args.seed, 0)
    solver_id = args.solver or DEFAULT_SOLVER[args.game]
    if args.game == "parity":
        cfg = ParityConfig(m=args.m or 8, k=2 if args.k is None else args.k, rows=args.rows)
        I = BitVec.random(cfg.m, rng)
        out = parity_decider(I, cfg, make_solver("parity", solver_id, cfg), rng)
        extra = {"input": str(I)}
    elif args.game == "factor":
        cfg = FactoringConfig(prime_bits=args.prime_bits, k=5 if args.k is None else args.k, m=args.m)
        modulus = RabinModulus.generate(cfg.prime_bits, rng)
        out = factoring_attack(modulus, cfg, make_solver("factor", solver_id, cfg, modulus=modulus, rng=rng), rng)
        extra = {"n": modulus.n}
    else:
        cfg = WphpConfig(n=args.n, k=2 if args.k is None else args.k, seq_len=args.seq_len)
        out = wphp_attack(cfg, make_solver("wphp", solver_id, cfg), rng)
        extra = {"n": cfg.n}
    doc = {
        "game": args.game,
        "seed": args.seed,
        "solver": solver_id,
        "outcome": out.kind,
        "value": list(out.value) if isinstance(out.value, tuple) else out.value,
        "transcript": out.transcript.to_dict() if out.transcript else None,
        **extra,
    }
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("parity", "factor", "wphp"):
            return _run_experiment(args)
        if args.command == "verify":
            return _run_verify(args)
        return _run_transcript(args)
    except ConfigError as exc:
        _note(f"witnesskit: error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
