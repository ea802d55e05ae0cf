"""Three reductions run on the preimage game.

* Parity: hide the input string I in one random row of a uniformly random
  matrix of UNPAR images, answer prefix-parity queries for every other row,
  and read PAR(I) off the solver's answer for the hidden row.
* Factoring: square random units mod n, answer root queries with the
  original values, and take a gcd at an index the solver never asked about.
* WPHP: hash a random sequence, answer preimage queries with the original
  points, and compare the solver's preimages with the originals.

Solvers that succeed where no efficient algorithm should are test doubles
holding secrets (``cheating = True``). Secrets live in ``repr=False``
fields and never reach a transcript.
"""

from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional, Sequence

from .bitparity import BitMatrix, BitVec, par, parity_bit, unpar, xor
from .errors import AuditViolation, ConfigError
from .numtheory import RabinModulus, factor_from_roots, four_roots, gcd
from .protocol import (
    ABORT,
    Collision,
    PreimageInstance,
    Solver,
    Status,
    TableTeacher,
    Teacher,
    Transcript,
    Witnesses,
    run_game,
)
from .rng import RandomStream

log = logging.getLogger(__name__)

PARITY_DECISION = "parity_decision"
PARITY_ABORT = "parity_abort"
PARITY_FAIL = "parity_fail"
FACTOR = "factor"
FACTOR_FAIL = "factor_fail"
COLLISION = "collision"
COLLISION_FAIL = "collision_fail"

OUTCOME_KINDS = {
    "parity": (PARITY_DECISION, PARITY_ABORT, PARITY_FAIL),
    "factor": (FACTOR, FACTOR_FAIL),
    "wphp": (COLLISION, COLLISION_FAIL),
}


@dataclass
class ReductionOutcome:
    kind: str
    value: Any = None
    transcript: Optional[Transcript] = None
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------- parity


@dataclass(frozen=True)
class ParityConfig:
    """``m``: vector length, ``k``: query budget, ``rows``: number of rows A (default m)."""

    m: int
    k: int
    rows: Optional[int] = None

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if self.rows is not None and self.rows < 1:
            raise ConfigError("rows must be >= 1")

    @property
    def A(self) -> int:
        return self.m if self.rows is None else self.rows

    @property
    def bound_holds(self) -> bool:
        """The 2/3 success guarantee needs A >= 3k."""
        return self.A >= 3 * self.k


def blind(I: BitVec, U: Sequence[BitVec], r: int) -> BitMatrix:
    if not 0 <= r < len(U):
        raise ValueError(f"hidden row {r} outside [0, {len(U)})")
    for u in U:
        if u.length != I.length:
            raise ValueError(f"row length {u.length} differs from input length {I.length}")
    rows = [unpar(u) for u in U]
    rows[r] = xor(I, rows[r])
    return BitMatrix(tuple(rows))


def recover_parity(U_r: BitVec, W_r: BitVec) -> BitVec:
    return xor(U_r, W_r)


def parity_instance(Y: BitMatrix) -> PreimageInstance:
    """Rows of Y are targets; X is a preimage of row i when unpar(X) == Y[i]."""
    width = Y.width

    def checker(x, i):
        return isinstance(x, BitVec) and x.length == width and unpar(x) == Y[i]

    return PreimageInstance(targets=Y.rows, checker=checker, context={"m": width, "rows": len(Y)})


class _ParitySolverBase(Solver):
    cheating = True

    def _witnesses(self, instance, answered: dict) -> Witnesses:
        return Witnesses(tuple(answered.get(i, par(row)) for i, row in enumerate(instance.targets)))


class OmniscientParitySolver(_ParitySolverBase):
    """Computes every prefix-parity vector itself and never queries."""

    name = "omniscient"

    def propose(self, instance, history):
        return self._witnesses(instance, {})

    def next_query(self, instance, history):
        return 0


class ScriptedParitySolver(_ParitySolverBase):
    """Asks about ``queries`` distinct rows chosen from the public matrix, then answers.

    The first row's bits pick a starting row; the next ones follow
    cyclically. Sound: once all its queries are answered it outputs the
    correct witness sequence.
    """

    name = "scripted"

    def __init__(self, queries: int):
        self.queries = queries

    def plan(self, instance) -> list[int]:
        A = instance.m
        start = instance.targets[0].word % A
        return [(start + j) % A for j in range(min(self.queries, A))]

    def propose(self, instance, history):
        if len(history) < len(self.plan(instance)):
            return None
        return self._witnesses(instance, dict(history))

    def next_query(self, instance, history):
        return self.plan(instance)[len(history)]


class FixedIndexSolver(ScriptedParitySolver):
    """Queries a fixed list of rows regardless of the instance."""

    name = "fixed"

    def __init__(self, indices: Sequence[int]):
        self.indices = list(indices)
        self.queries = len(self.indices)

    def plan(self, instance):
        return self.indices


class LazyParitySolver(_ParitySolverBase):
    """Unsound: proposes all-zero vectors and keeps asking about row 0."""

    name = "lazy"
    cheating = False

    def propose(self, instance, history):
        return Witnesses(tuple(BitVec.zeros(row.length) for row in instance.targets))

    def next_query(self, instance, history):
        return 0


PARITY_SOLVERS: dict[str, Callable[[ParityConfig], Solver]] = {
    "omniscient": lambda cfg: OmniscientParitySolver(),
    "scripted": lambda cfg: ScriptedParitySolver(cfg.k),
    "first-index": lambda cfg: FixedIndexSolver([0]),
    "lazy": lambda cfg: LazyParitySolver(),
}


def parity_game(I: BitVec, U: Sequence[BitVec], r: int, solver: Solver, budget: int) -> ReductionOutcome:
    """One run with the randomness (U, r) fixed; used directly by exact enumeration."""
    Y = blind(I, U, r)
    teacher = TableTeacher(U, abort_on={r}, honest=True)
    t = run_game(parity_instance(Y), solver, teacher, budget)
    details = {"hidden_row": r, "status": t.status.value}
    if t.status is Status.ABORTED:
        return ReductionOutcome(PARITY_ABORT, None, t, details)
    if t.accepted and isinstance(t.final, Witnesses):
        recovered = recover_parity(U[r], t.final.values[r])
        return ReductionOutcome(PARITY_DECISION, recovered[I.length - 1], t, details)
    return ReductionOutcome(PARITY_FAIL, None, t, details)


def parity_decider(I: BitVec, cfg: ParityConfig, solver: Solver, rng: RandomStream) -> ReductionOutcome:
    if I.length != cfg.m:
        raise ValueError(f"input has length {I.length}, config says m={cfg.m}")
    U = [BitVec.random(cfg.m, rng) for _ in range(cfg.A)]
    r = rng.randbelow(cfg.A)
    return parity_game(I, U, r, solver, cfg.k)


def run_parity_trial(cfg: ParityConfig, solver_id: str, seed: bytes) -> ReductionOutcome:
    rng = RandomStream(seed)
    I = BitVec.random(cfg.m, rng)
    out = parity_decider(I, cfg, make_solver("parity", solver_id, cfg), rng)
    out.details["truth"] = parity_bit(I)
    return out


def hierarchy_table(bit_lengths: Sequence[int], k: int) -> list[dict]:
    """Rows A = |n| against budget B = k * ||n||**k for each modulus length |n|.

    ``bound_holds`` marks configurations where A >= 3B, i.e. where the
    parity reduction keeps its 2/3 guarantee.
    """
    table = []
    for length in bit_lengths:
        loglen = length.bit_length()
        A, B = length, k * loglen**k
        table.append({"len_n": length, "len_len_n": loglen, "rows": A, "budget": B, "bound_holds": A >= 3 * B})
    return table


# ---------------------------------------------------------------- factoring


@dataclass(frozen=True)
class FactoringConfig:
    prime_bits: int = 16
    k: int = 5
    m: Optional[int] = None  # defaults to the bit length of n

    def __post_init__(self):
        if self.prime_bits < 3:
            raise ConfigError("prime_bits must be >= 3")
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be >= 1")

    def length_for(self, modulus: RabinModulus) -> int:
        return modulus.bits if self.m is None else self.m


class CanonicalRootSolver(Solver):
    """Queries the first ``queries`` indices, echoes those answers and fills the
    rest with the smallest square root, computed from the secret factors."""

    name = "canonical"
    cheating = True

    def __init__(self, modulus: RabinModulus, queries: int):
        self._secret = modulus
        self.queries = queries

    def __repr__(self):
        return f"CanonicalRootSolver(queries={self.queries})"

    def _plan_len(self, instance):
        return min(self.queries, instance.m)

    def propose(self, instance, history):
        if len(history) < self._plan_len(instance):
            return None
        answered = dict(history)
        return Witnesses(
            tuple(answered[i] if i in answered else four_roots(y, self._secret).canonical
                  for i, y in enumerate(instance.targets))
        )

    def next_query(self, instance, history):
        return len(history)


class RandomRootSolver(CanonicalRootSolver):
    """Like the canonical solver but picks a random root per index (not deterministic)."""

    name = "random-root"
    deterministic = False

    def __init__(self, modulus, queries, rng: RandomStream):
        super().__init__(modulus, queries)
        self._rng = rng

    def propose(self, instance, history):
        if len(history) < self._plan_len(instance):
            return None
        answered = dict(history)
        out = []
        for i, y in enumerate(instance.targets):
            quad = four_roots(y, self._secret)
            out.append(answered[i] if i in answered else quad[self._rng.randbelow(4)])
        return Witnesses(tuple(out))


FACTOR_SOLVERS: dict[str, Callable] = {
    "canonical": lambda modulus, cfg, rng: CanonicalRootSolver(modulus, cfg.k),
    "random-root": lambda modulus, cfg, rng: RandomRootSolver(modulus, cfg.k, rng),
}


def rabin_instance(n: int, targets: Sequence[int]) -> PreimageInstance:
    targets = tuple(targets)

    def checker(w, i):
        return isinstance(w, int) and 0 <= w < n and w * w % n == targets[i]

    return PreimageInstance(targets=targets, checker=checker, context={"n": n}, domain_size=n)


def factoring_game(modulus: RabinModulus, xs: Sequence[int], solver: Solver, budget: int) -> ReductionOutcome:
    """One run with the sampled units ``xs`` fixed."""
    n = modulus.n
    for i, x in enumerate(xs):
        g = gcd(x, n)
        if g > 1:
            return ReductionOutcome(FACTOR, g, None, {"leak_index": i, "status": "leak"})
    ys = [x * x % n for x in xs]
    t = run_game(rabin_instance(n, ys), solver, TableTeacher(xs, honest=True), budget)
    details = {"status": t.status.value, "m": len(xs)}
    if not (t.accepted and isinstance(t.final, Witnesses)):
        return ReductionOutcome(FACTOR_FAIL, None, t, details)
    w = t.final.values
    unused = [i for i in range(len(xs)) if i not in t.queried]
    hits = [i for i in unused if factor_from_roots(xs[i], w[i], n) is not None]
    details.update(unused=len(unused), unused_successes=len(hits))
    if hits:
        return ReductionOutcome(FACTOR, factor_from_roots(xs[hits[0]], w[hits[0]], n), t, details)
    return ReductionOutcome(FACTOR_FAIL, None, t, details)


def factoring_attack(modulus: RabinModulus, cfg: FactoringConfig, solver: Solver, rng: RandomStream) -> ReductionOutcome:
    m = cfg.length_for(modulus)
    if m <= cfg.k:
        log.warning("m=%d <= k=%d: there may be no unqueried index to factor with", m, cfg.k)
    xs = [rng.randrange(1, modulus.n) for _ in range(m)]
    return factoring_game(modulus, xs, solver, cfg.k)


def run_factor_trial(cfg: FactoringConfig, solver_id: str, seed: bytes) -> ReductionOutcome:
    rng = RandomStream(seed)
    modulus = RabinModulus.generate(cfg.prime_bits, rng)
    solver = make_solver("factor", solver_id, cfg, modulus=modulus, rng=rng)
    out = factoring_attack(modulus, cfg, solver, rng)
    out.details["n"] = modulus.n
    return out


# ---------------------------------------------------------------- WPHP


class ModHash:
    """h(u) = u mod n; its smallest preimage of z is z itself."""

    def __init__(self, n: int):
        self.n = n

    def __call__(self, u: int) -> int:
        return u % self.n

    def preimage(self, z: int) -> int:
        return z

    def __repr__(self):
        return f"ModHash({self.n})"

    def __eq__(self, other):
        return isinstance(other, ModHash) and other.n == self.n

    def __hash__(self):
        return hash(("ModHash", self.n))


@dataclass(frozen=True)
class WphpConfig:
    """Hash ``h`` maps [0, n**seq_len) into [0, n); seq_len defaults to |n|."""

    n: int
    k: int
    seq_len: Optional[int] = None
    hash: Optional[Callable[[int], int]] = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if self.seq_len is not None and self.seq_len < 1:
            raise ConfigError("seq_len must be >= 1")

    @property
    def L(self) -> int:
        return self.n.bit_length() if self.seq_len is None else self.seq_len

    @property
    def h(self):
        return ModHash(self.n) if self.hash is None else self.hash

    @property
    def domain(self) -> int:
        return self.n**self.L

    def failure_bound(self) -> Fraction:
        """n**(L(k+1)) possible outputs over n**(L*L) choices of x, capped at 1."""
        return min(Fraction(1), Fraction(self.n ** (self.L * (self.k + 1)), self.n ** (self.L * self.L)))


def canonical_preimage(h, z: int, domain: int) -> int:
    if hasattr(h, "preimage"):
        return h.preimage(z)
    if domain > 1 << 20:
        raise ConfigError(f"no preimage helper for {h!r} and domain {domain} is too large to search")
    for u in range(domain):
        if h(u) == z:
            return u
    raise ValueError(f"{z} has no preimage under {h!r}")


def wphp_instance(cfg: WphpConfig, z: Sequence[int]) -> PreimageInstance:
    z = tuple(z)
    h, D = cfg.h, cfg.domain

    def checker(u, i):
        return isinstance(u, int) and 0 <= u < D and h(u) == z[i]

    return PreimageInstance(targets=z, checker=checker, context={"n": cfg.n}, hash=h, domain_size=D)


class CanonicalPreimageSolver(Solver):
    """Queries the first ``queries`` indices, echoes them, uses the smallest preimage elsewhere."""

    name = "canonical"

    def __init__(self, cfg: WphpConfig, queries: int):
        self.h, self.domain = cfg.h, cfg.domain
        self.queries = queries

    def propose(self, instance, history):
        if len(history) < min(self.queries, instance.m):
            return None
        answered = dict(history)
        return Witnesses(
            tuple(answered[i] if i in answered else canonical_preimage(self.h, z, self.domain)
                  for i, z in enumerate(instance.targets))
        )

    def next_query(self, instance, history):
        return len(history)


class MixingSolver(Solver):
    """Adversarial for h = u mod n: the query index depends on z, and the
    high digits of every answer are spread over the outputs (scrambled by z),
    so distinct admissible inputs give distinct outputs whenever k <= seq_len."""

    name = "mixing"

    def __init__(self, cfg: WphpConfig, queries: int):
        if not isinstance(cfg.h, ModHash):
            raise ConfigError("mixing solver only supports h(u) = u mod n")
        self.n, self.L = cfg.n, cfg.L
        self.queries = queries

    def propose(self, instance, history):
        if len(history) < min(self.queries, instance.m):
            return None
        span = self.n ** (self.L - 1)
        key = 0
        for _, a in reversed(history):
            key = key * span + a // self.n
        salt = sum(instance.targets)
        out = []
        for i, z in enumerate(instance.targets):
            digit = (key // span**i) % span
            out.append(z + self.n * ((digit + salt * (i + 1)) % span))
        return Witnesses(tuple(out))

    def next_query(self, instance, history):
        return (sum(instance.targets) + len(history)) % instance.m


class ConstantSolver(Solver):
    """Always proposes the same sequence and always asks about index 0."""

    name = "constant"

    def __init__(self, cfg: WphpConfig, value: int = 0):
        self.value = value

    def propose(self, instance, history):
        return Witnesses((self.value,) * instance.m)

    def next_query(self, instance, history):
        return 0


class ColliderSolver(Solver):
    """Emits a collision directly: z_0 and z_0 + n under h = u mod n."""

    name = "collider"

    def __init__(self, cfg: WphpConfig):
        if not isinstance(cfg.h, ModHash):
            raise ConfigError("collider solver only supports h(u) = u mod n")
        if cfg.domain <= 2 * cfg.n:
            raise ConfigError("domain too small for an explicit collision")
        self.n = cfg.n

    def propose(self, instance, history):
        z0 = instance.targets[0]
        return Collision(z0, z0 + self.n)

    def next_query(self, instance, history):
        return 0


WPHP_SOLVERS: dict[str, Callable[[WphpConfig], Solver]] = {
    "canonical": lambda cfg: CanonicalPreimageSolver(cfg, cfg.k),
    "mixing": lambda cfg: MixingSolver(cfg, cfg.k),
    "constant": lambda cfg: ConstantSolver(cfg),
    "collider": lambda cfg: ColliderSolver(cfg),
}


def wphp_game(cfg: WphpConfig, xs: Sequence[int], solver: Solver) -> ReductionOutcome:
    if not solver.deterministic:
        raise ValueError("the counting argument needs a deterministic solver")
    h = cfg.h
    z = [h(x) for x in xs]
    instance = wphp_instance(cfg, z)
    t = run_game(instance, solver, TableTeacher(xs, honest=True), cfg.k)
    details = {"status": t.status.value}
    if t.accepted and isinstance(t.final, Collision):
        return ReductionOutcome(COLLISION, (t.final.u1, t.final.u2), t, details)
    if t.accepted and isinstance(t.final, Witnesses):
        for i, (x, y) in enumerate(zip(xs, t.final.values)):
            if x != y:
                details["index"] = i
                return ReductionOutcome(COLLISION, (x, y), t, details)
    return ReductionOutcome(COLLISION_FAIL, None, t, details)


def wphp_attack(cfg: WphpConfig, solver: Solver, rng: RandomStream) -> ReductionOutcome:
    if not solver.deterministic:
        raise ValueError("the counting argument needs a deterministic solver")
    if cfg.k >= cfg.L - 1:
        log.warning("k=%d >= seq_len-1=%d: the counting bound no longer bites", cfg.k, cfg.L - 1)
    xs = [rng.randbelow(cfg.domain) for _ in range(cfg.L)]
    return wphp_game(cfg, xs, solver)


def run_wphp_trial(cfg: WphpConfig, solver_id: str, seed: bytes) -> ReductionOutcome:
    rng = RandomStream(seed)
    return wphp_attack(cfg, make_solver("wphp", solver_id, cfg), rng)


class _SequenceTeacher(Teacher):
    """Hands out ``answers`` in order, whatever index is asked."""

    def __init__(self, answers):
        self.answers = answers
        self.pos = 0

    def answer(self, index):
        a = self.answers[self.pos]
        self.pos += 1
        return a


AUDIT_LIMIT = 1 << 20


def output_count_audit(cfg: WphpConfig, solver: Solver, limit: int = AUDIT_LIMIT) -> int:
    """Count distinct accepted outputs over every (z, answer tuple) input.

    Inputs where some answer is not a preimage of the queried target are
    skipped: the machine never sees them. Raises :class:`AuditViolation`
    if the count exceeds n**(seq_len*(k+1)).
    """
    if not solver.deterministic:
        raise ValueError("the audit needs a deterministic solver")
    n, L, k, D = cfg.n, cfg.L, cfg.k, cfg.domain
    size = n**L * D**k
    if size > limit:
        raise ConfigError(
            f"audit would run {size} games (n={n}, seq_len={L}, k={k}); limit is {limit}"
        )
    outputs = set()
    for z in itertools.product(range(n), repeat=L):
        instance = wphp_instance(cfg, z)
        for answers in itertools.product(range(D), repeat=k):
            t = run_game(instance, solver, _SequenceTeacher(answers), k)
            if any(r.answer is ABORT or not instance.checker(r.answer, r.index) for r in t.rounds):
                continue
            if t.accepted:
                outputs.add(t.final)
    bound = n ** (L * (k + 1))
    if len(outputs) > bound:
        raise AuditViolation(f"{len(outputs)} distinct outputs exceed the input count {bound}")
    return len(outputs)


# ---------------------------------------------------------------- registry


def make_solver(experiment: str, solver_id: str, cfg, modulus=None, rng=None) -> Solver:
    try:
        if experiment == "parity":
            return PARITY_SOLVERS[solver_id](cfg)
        if experiment == "factor":
            return FACTOR_SOLVERS[solver_id](modulus, cfg, rng)
        if experiment == "wphp":
            return WPHP_SOLVERS[solver_id](cfg)
    except KeyError:
        raise ConfigError(f"unknown solver {solver_id!r} for {experiment}") from None
    raise ConfigError(f"unknown experiment {experiment!r}")


SOLVER_IDS = {
    "parity": sorted(PARITY_SOLVERS),
    "factor": sorted(FACTOR_SOLVERS),
    "wphp": sorted(WPHP_SOLVERS),
}

_TRIALS = {"parity": run_parity_trial, "factor": run_factor_trial, "wphp": run_wphp_trial}


def run_one(experiment: str, cfg, solver_id: str) -> Callable[[bytes], ReductionOutcome]:
    """A picklable ``seed -> outcome`` function for one reduction configuration."""
    if experiment not in _TRIALS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if solver_id not in SOLVER_IDS[experiment]:
        raise ConfigError(f"unknown solver {solver_id!r} for {experiment}")
    return functools.partial(_TRIALS[experiment], cfg, solver_id)
