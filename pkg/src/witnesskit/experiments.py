"""Seeded Monte Carlo runs and exhaustive checks.

Trial ``i`` of an experiment draws all its randomness from
``RandomStream.for_trial(master_seed, i)`` (see :mod:`witnesskit.rng`),
so results do not depend on execution order or worker count. Reports
omit wall time from their JSON so that equal configs serialize to equal
bytes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Any, Optional

from .bitparity import BitVec, par, unpar, xor
from .errors import AuditViolation, ConfigError
from .numtheory import RabinModulus, factor_from_roots, four_roots, legendre
from .reductions import (
    COLLISION,
    FACTOR,
    OUTCOME_KINDS,
    PARITY_ABORT,
    PARITY_DECISION,
    WPHP_SOLVERS,
    FactoringConfig,
    FixedIndexSolver,
    ParityConfig,
    WphpConfig,
    blind,
    make_solver,
    output_count_audit,
    parity_game,
    parity_instance,
    run_one,
)
from .protocol import TableTeacher, run_game
from .rng import derive_trial_seed

SEED_RULE = (
    "trial i uses SHA256(b'witnesskit/trial' || master_seed:8 BE || i:8 BE) as the seed of a "
    "SHA-256 counter-mode stream (block j = SHA256(b'witnesskit/stream' || seed || j:8 BE))"
)

EXPERIMENTS = ("parity", "factor", "wphp")

# parameters each experiment accepts, with defaults (None = derived)
DEFAULT_PARAMS = {
    "parity": {"m": 30, "k": 5, "rows": None},
    "factor": {"prime_bits": 16, "k": 5, "m": None},
    "wphp": {"n": 1024, "k": 2, "seq_len": None},
}
DEFAULT_SOLVER = {"parity": "scripted", "factor": "canonical", "wphp": "canonical"}


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials, trials >= 1 (got {successes}/{trials})")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return low, high


def hoeffding_slack(trials: int, confidence: float = 0.99) -> float:
    """Deviation t with 2*exp(-2*N*t^2) = 1 - confidence."""
    return math.sqrt(math.log(2 / (1 - confidence)) / (2 * trials))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    trials: int = 1000
    master_seed: int = 0
    solver: Optional[str] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.experiment])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.experiment}: {sorted(unknown)}")
        if not 0 <= self.master_seed < 1 << 64:
            raise ConfigError("master_seed must fit in 64 bits")

    @property
    def solver_id(self) -> str:
        return self.solver or DEFAULT_SOLVER[self.experiment]

    def effective_params(self) -> dict:
        return {**DEFAULT_PARAMS[self.experiment], **self.params}

    def reduction_config(self):
        p = self.effective_params()
        if self.experiment == "parity":
            return ParityConfig(m=p["m"], k=p["k"], rows=p["rows"])
        if self.experiment == "factor":
            return FactoringConfig(prime_bits=p["prime_bits"], k=p["k"], m=p["m"])
        return WphpConfig(n=p["n"], k=p["k"], seq_len=p["seq_len"])

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.effective_params(),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "solver": self.solver_id,
        }


@dataclass
class ExperimentReport:
    config: dict
    counts: dict
    metrics: dict
    trials: int
    wall_time: float = 0.0

    @property
    def rates(self) -> dict:
        return {k: v / self.trials for k, v in self.counts.items()}

    def wilson(self, confidence=0.95) -> dict:
        return {k: list(wilson_interval(v, self.trials, confidence)) for k, v in self.counts.items()}

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "config": self.config,
            "counts": self.counts,
            "rates": self.rates,
            "wilson95": self.wilson(),
            "hoeffding_slack99": hoeffding_slack(self.trials),
            "metrics": self.metrics,
            "seed_rule": SEED_RULE,
        }
        if include_timing:
            d["wall_time_s"] = self.wall_time
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outcome", "count", "rate", "wilson_low", "wilson_high"])
        wil = self.wilson()
        for kind in self.counts:
            w.writerow([kind, self.counts[kind], repr(self.rates[kind]), repr(wil[kind][0]), repr(wil[kind][1])])
        return buf.getvalue()

    def to_human(self) -> str:
        lines = [f"{self.config['experiment']} experiment, {self.trials} trials, seed {self.config['master_seed']}"]
        wil = self.wilson()
        for kind, c in self.counts.items():
            lo, hi = wil[kind]
            lines.append(f"  {kind:<16} {c:>8}  rate {c / self.trials:.4f}  95% CI [{lo:.4f}, {hi:.4f}]")
        for key, value in sorted(self.metrics.items()):
            lines.append(f"  {key}: {value}")
        return "\n".join(lines) + "\n"


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("WITNESSKIT_THREADS", "1")))
    except ValueError:
        return 1


def _aggregate(cfg: ExperimentConfig, rcfg, outcomes) -> tuple[dict, dict]:
    kinds = OUTCOME_KINDS[cfg.experiment]
    counts = {k: 0 for k in kinds}
    for o in outcomes:
        counts[o.kind] += 1
    metrics: dict[str, Any] = {}
    N = cfg.trials
    if cfg.experiment == "parity":
        decided = [o for o in outcomes if o.kind == PARITY_DECISION]
        correct = sum(o.value == o.details["truth"] for o in decided)
        metrics.update(
            rows=rcfg.A,
            abort_line=rcfg.k / rcfg.A,
            bound_holds=rcfg.bound_holds,
            decided=len(decided),
            correct=correct,
            incorrect=len(decided) - correct,
            success_rate=correct / N,
            max_distinct_queries=max((o.transcript.distinct_indices for o in outcomes), default=0),
        )
    elif cfg.experiment == "factor":
        unused = sum(o.details.get("unused", 0) for o in outcomes)
        hits = sum(o.details.get("unused_successes", 0) for o in outcomes)
        ms = [o.details["m"] for o in outcomes if "m" in o.details]
        metrics.update(
            leaks=sum(o.details.get("status") == "leak" for o in outcomes),
            unused_index_samples=unused,
            unused_index_successes=hits,
            min_m=min(ms) if ms else None,
        )
        if unused:
            metrics["per_index_rate"] = hits / unused
            metrics["per_index_wilson95"] = list(wilson_interval(hits, unused))
        if ms:
            metrics["success_floor"] = 1 - 2.0 ** -(min(ms) - rcfg.k)
    else:
        metrics.update(
            seq_len=rcfg.L,
            failure_bound=float(rcfg.failure_bound()),
            collision_rate=counts[COLLISION] / N,
        )
    return counts, metrics


def run_trials(cfg: ExperimentConfig, workers: Optional[int] = None, keep_outcomes: bool = False):
    """Run every trial and fold the outcomes in ordinal order.

    Returns the report, or ``(report, outcomes)`` with ``keep_outcomes``.
    """
    rcfg = cfg.reduction_config()
    runner = run_one(cfg.experiment, rcfg, cfg.solver_id)
    seeds = [derive_trial_seed(cfg.master_seed, i) for i in range(cfg.trials)]
    workers = _default_workers() if workers is None else workers
    start = time.perf_counter()
    if workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(runner, seeds, chunksize=max(1, cfg.trials // (4 * workers))))
    else:
        outcomes = [runner(s) for s in seeds]
    elapsed = time.perf_counter() - start
    counts, metrics = _aggregate(cfg, rcfg, outcomes)
    report = ExperimentReport(cfg.echo(), counts, metrics, cfg.trials, elapsed)
    return (report, outcomes) if keep_outcomes else report


# ---------------------------------------------------------------- exhaustive checks


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    counterexample: Any = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = f"{status} {self.name}: {self.detail}"
        if self.counterexample is not None:
            out += f" counterexample={self.counterexample!r}"
        return out


def _all_vectors(m):
    return (BitVec(m, w) for w in range(1 << m))


def check_par_unpar_bijection(max_m: int = 12) -> CheckResult:
    if max_m > 20:
        raise ConfigError(f"max_m={max_m} means 2^{max_m} vectors per length; limit is 20")
    total = 0
    for m in range(1, max_m + 1):
        image = set()
        for v in _all_vectors(m):
            if unpar(par(v)) != v or par(unpar(v)) != v:
                return CheckResult("par-unpar-bijection", False, f"round trip failed at m={m}", str(v))
            image.add(unpar(v).word)
        if len(image) != 1 << m:
            return CheckResult("par-unpar-bijection", False, f"unpar image has {len(image)} of {1 << m} at m={m}")
        total += 1 << m
    return CheckResult("par-unpar-bijection", True, f"m=1..{max_m}, {total} vectors")


def check_par_linearity(max_m: int = 8) -> CheckResult:
    if max_m > 10:
        raise ConfigError(f"max_m={max_m} means 4^{max_m} pairs per length; limit is 10")
    pairs = 0
    for m in range(1, max_m + 1):
        for b in _all_vectors(m):
            pb = par(b)
            for c in _all_vectors(m):
                if par(xor(b, c)) != xor(pb, par(c)):
                    return CheckResult("par-linearity", False, f"m={m}", (str(b), str(c)))
                pairs += 1
    return CheckResult("par-linearity", True, f"m=1..{max_m}, {pairs} pairs")


def _odd_primes_below(limit):
    return [p for p in range(3, limit) if all(p % d for d in range(2, math.isqrt(p) + 1))]


def _brute_roots(n):
    table: dict[int, list[int]] = {}
    for x in range(n):
        table.setdefault(x * x % n, []).append(x)
    return table


def check_four_roots(prime_limit: int = 30) -> CheckResult:
    if prime_limit > 200:
        raise ConfigError("prime_limit above 200 makes the brute-force tables too slow")
    cases = 0
    for p, q in itertools.combinations(_odd_primes_below(prime_limit), 2):
        mod = RabinModulus(p, q)
        n = mod.n
        table = _brute_roots(n)
        for c in range(1, n):
            if math.gcd(c, n) != 1 or legendre(c, p) != 1 or legendre(c, q) != 1:
                continue
            got = tuple(four_roots(c, mod))
            if got != tuple(table.get(c, [])):
                return CheckResult("four-roots", False, f"n={n}", {"c": c, "got": got, "brute": table.get(c)})
            cases += 1
        # no other unit is a square
        for c, roots in table.items():
            if math.gcd(c, n) == 1 and not (legendre(c, p) == 1 and legendre(c, q) == 1):
                return CheckResult("four-roots", False, f"n={n}: unexpected square", c)
    return CheckResult("four-roots", True, f"odd primes < {prime_limit}, {cases} residues")


def check_factor_law(prime_limit: int = 30) -> CheckResult:
    quads = 0
    for p, q in itertools.combinations(_odd_primes_below(prime_limit), 2):
        mod = RabinModulus(p, q)
        n = mod.n
        for x in range(1, n):
            if math.gcd(x, n) != 1:
                continue
            quad = four_roots(x * x % n, mod)
            good = 0
            for a, b in itertools.combinations(quad, 2):
                f = factor_from_roots(a, b, n)
                if (a + b == n) != (f is None) or (f is not None and f not in (p, q)):
                    return CheckResult("factor-law", False, f"n={n}", {"pair": (a, b), "factor": f})
                good += f is not None
            if good != 4:
                return CheckResult("factor-law", False, f"n={n}: {good} factoring pairs", tuple(quad))
            quads += 1
    return CheckResult("factor-law", True, f"odd primes < {prime_limit}, {quads} quads")


def check_blinding_uniformity(m: int = 2) -> CheckResult:
    """For each input I, (U, r) -> (Y, r) hits every (matrix, row) exactly once."""
    if m > 3:
        raise ConfigError(f"m={m}: 2^{m * m} matrices times {m} rows is too many to enumerate")
    expected = (1 << (m * m)) * m
    first = None
    for I in _all_vectors(m):
        seen = Counter()
        for words in itertools.product(range(1 << m), repeat=m):
            U = [BitVec(m, w) for w in words]
            for r in range(m):
                Y = blind(I, U, r)
                seen[(tuple(row.word for row in Y), r)] += 1
        if len(seen) != expected or set(seen.values()) != {1}:
            worst = seen.most_common(1)[0]
            return CheckResult("blinding-uniformity", False, f"m={m}, I={I}", worst)
        if first is None:
            first = seen
        elif seen != first:
            return CheckResult("blinding-uniformity", False, f"distribution depends on I at m={m}", str(I))
    return CheckResult("blinding-uniformity", True, f"m={m}, {expected} (Y, r) pairs uniform for all {1 << m} inputs")


def exact_abort_probability(m: int, solver, budget: int, rows: Optional[int] = None):
    """Exact abort probability over all (I, U, r), plus its independent prediction.

    Returns ``(Pr[abort], E[|S(Y)|]/A, wrong)`` where ``S(Y)`` is the set of
    rows the solver queries when every query is answered (no abort), and
    ``wrong`` counts non-aborted runs whose decision differs from parity(I).
    """
    A = m if rows is None else rows
    if (1 << m) * (1 << (m * A)) * A > 1 << 18:
        raise ConfigError("parameter space too large for exact enumeration")
    aborts = total = distinct = wrong = 0
    for I in _all_vectors(m):
        for words in itertools.product(range(1 << m), repeat=A):
            U = [BitVec(m, w) for w in words]
            for r in range(A):
                out = parity_game(I, U, r, solver, budget)
                total += 1
                aborts += out.kind == PARITY_ABORT
                if out.kind == PARITY_DECISION and out.value != par(I)[m - 1]:
                    wrong += 1
                Y = blind(I, U, r)
                full = run_game(parity_instance(Y), solver, TableTeacher([par(y) for y in Y]), budget)
                distinct += full.distinct_indices
    return Fraction(aborts, total), Fraction(distinct, total * A), wrong


def check_abort_bound(m: int = 3, k: int = 1) -> CheckResult:
    solvers = {
        "scripted": make_solver("parity", "scripted", ParityConfig(m, k)),
        "first-index": FixedIndexSolver([0]),
        "omniscient": make_solver("parity", "omniscient", ParityConfig(m, k)),
    }
    for name, solver in solvers.items():
        p_abort, expected, wrong = exact_abort_probability(m, solver, k)
        if p_abort != expected or p_abort > Fraction(k, m) or wrong:
            return CheckResult("abort-bound", False, f"m={m}, k={k}, solver={name}",
                               {"p_abort": str(p_abort), "E[distinct]/m": str(expected), "wrong": wrong})
    return CheckResult("abort-bound", True, f"m={m}, k={k}: Pr[abort] = E[distinct]/m <= k/m for {sorted(solvers)}")


def check_output_count(n: int = 4, seq_len: int = 2, k: int = 1) -> CheckResult:
    cfg = WphpConfig(n=n, k=k, seq_len=seq_len)
    bound = n ** (seq_len * (k + 1))
    counts = {}
    for sid in sorted(WPHP_SOLVERS):
        try:
            solver = make_solver("wphp", sid, cfg)
        except ConfigError:
            continue
        try:
            counts[sid] = output_count_audit(cfg, solver)
        except AuditViolation as exc:
            return CheckResult("output-count", False, f"solver={sid}: {exc}")
    return CheckResult("output-count", True, f"n={n}, seq_len={seq_len}, k={k}, bound {bound}: {counts}")


CHECKS = {
    "par-unpar-bijection": check_par_unpar_bijection,
    "par-linearity": check_par_linearity,
    "four-roots": check_four_roots,
    "factor-law": check_factor_law,
    "blinding-uniformity": check_blinding_uniformity,
    "abort-bound": check_abort_bound,
    "output-count": check_output_count,
}


def enumerate_check(name: str, **params) -> CheckResult:
    try:
        fn = CHECKS[name]
    except KeyError:
        raise ConfigError(f"unknown check {name!r}; known: {sorted(CHECKS)}") from None
    return fn(**params)


def assert_report(report: ExperimentReport) -> list[tuple[str, bool, str]]:
    """Statistical pass/fail lines for a report (one-sided Hoeffding at 99%)."""
    exp = report.config["experiment"]
    N = report.trials
    slack = hoeffding_slack(N)
    rates, m = report.rates, report.metrics
    out = []
    if exp == "parity":
        line = m["abort_line"]
        out.append(("abort-rate", rates[PARITY_ABORT] <= line + slack,
                    f"{rates[PARITY_ABORT]:.4f} <= k/A + slack = {line + slack:.4f}"))
        out.append(("decisions-correct", m["incorrect"] == 0, f"{m['correct']}/{m['decided']} correct"))
        if m["bound_holds"]:
            out.append(("success-rate", m["success_rate"] >= 2 / 3 - slack,
                        f"{m['success_rate']:.4f} >= 2/3 - slack = {2 / 3 - slack:.4f}"))
    elif exp == "factor":
        if "per_index_wilson95" in m:
            lo, hi = m["per_index_wilson95"]
            out.append(("per-index-half", lo <= 0.5 <= hi, f"1/2 in [{lo:.4f}, {hi:.4f}]"))
        if "success_floor" in m:
            floor = m["success_floor"] - 0.05
            out.append(("success-rate", rates[FACTOR] >= floor, f"{rates[FACTOR]:.4f} >= {floor:.4f}"))
    else:
        bound = m["failure_bound"]
        fail = 1 - rates[COLLISION]
        out.append(("collision-fail-rate", fail <= bound + slack, f"{fail:.4f} <= bound + slack = {bound + slack:.4g}"))
    return out
