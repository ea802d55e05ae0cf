"""The budgeted preimage game between a solver and a teacher.

The loop is strict alternation, as in the witnessing algorithm:

1. the solver proposes an output (or nothing);
2. if the proposal verifies, the game ends with it;
3. otherwise, if the budget is spent, the game ends as ``budget_exceeded``;
4. otherwise the solver names an index, the teacher answers (or aborts)
   and the answer is appended to the history.

Solvers see only the public instance and the answer history. Teachers
hold whatever secret they need. The harness re-checks every answer from
a teacher flagged ``honest`` and every accepted solver output, so no
result depends on trusting a flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Sequence, Union

from .bitparity import BitMatrix, BitVec
from .errors import HarnessInvariantViolation, ProtocolViolation

# exhaustive NoPreimageClaim checks are only attempted below this domain size
EXHAUSTIVE_LIMIT = 1 << 16


@dataclass(frozen=True)
class PreimageInstance:
    """Targets y_0..y_{m-1} plus a checker deciding ``f(candidate) == y_index``.

    ``hash`` is the underlying map when the game has one (needed to verify
    collisions); ``domain_size`` bounds candidates for exhaustive checks.
    """

    targets: tuple
    checker: Callable[[Any, int], bool]
    context: dict = field(default_factory=dict)
    hash: Optional[Callable[[Any], Any]] = None
    domain_size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.targets) < 1:
            raise ValueError("instance needs at least one target")

    @property
    def m(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class Witnesses:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class Collision:
    u1: Any
    u2: Any

    def __post_init__(self):
        if self.u1 == self.u2:
            raise ValueError("collision needs two distinct points")


@dataclass(frozen=True)
class NoPreimageClaim:
    index: int


SolverOutput = Union[Witnesses, Collision, NoPreimageClaim]


class Aborted:
    """Sentinel returned by a teacher that refuses to answer."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABORT"


ABORT = Aborted()


class Status(str, Enum):
    ACCEPTED = "accepted"
    ABORTED = "aborted"
    BUDGET_EXCEEDED = "budget_exceeded"
    UNVERIFIED = "unverified"


class Solver:
    """Base class for solver strategies.

    ``propose`` returns a :data:`SolverOutput` or ``None``; ``next_query``
    returns the index to ask about. ``history`` is a tuple of
    ``(index, answer)`` pairs. A ``deterministic`` solver must be a pure
    function of ``(instance, history)``.
    """

    deterministic = True
    cheating = False
    name = "solver"

    def propose(self, instance: PreimageInstance, history: tuple) -> Optional[SolverOutput]:
        raise NotImplementedError

    def next_query(self, instance: PreimageInstance, history: tuple) -> int:
        raise NotImplementedError


class Teacher:
    honest = False

    def answer(self, index: int):
        raise NotImplementedError


class TableTeacher(Teacher):
    """Answers index i with ``table[i]``; ``abort_on`` indices abort instead."""

    def __init__(self, table: Sequence, abort_on=(), honest=True):
        self.table = tuple(table)
        self.abort_on = frozenset(abort_on)
        self.honest = honest

    def answer(self, index):
        if index in self.abort_on:
            return ABORT
        return self.table[index]


@dataclass(frozen=True)
class Round:
    index: int
    answer: Any  # ABORT when the teacher refused


@dataclass
class Transcript:
    budget: int
    rounds: list = field(default_factory=list)
    final: Optional[SolverOutput] = None
    status: Optional[Status] = None

    @property
    def queries_used(self) -> int:
        return len(self.rounds)

    @property
    def distinct_indices(self) -> int:
        return len({r.index for r in self.rounds})

    @property
    def queried(self) -> frozenset:
        return frozenset(r.index for r in self.rounds)

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED

    def history(self) -> tuple:
        return tuple((r.index, r.answer) for r in self.rounds if r.answer is not ABORT)

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "rounds": [
                {"index": r.index, "answer": "abort" if r.answer is ABORT else encode_value(r.answer)}
                for r in self.rounds
            ],
            "final": encode_final(self.final, self.status),
            "status": self.status.value if self.status else None,
            "queries_used": self.queries_used,
            "distinct_indices": self.distinct_indices,
        }

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)


def encode_value(v):
    """JSON form of game values: ints stay ints, bit vectors become 0/1 strings."""
    if isinstance(v, BitVec):
        return str(v)
    if isinstance(v, BitMatrix):
        return [str(r) for r in v]
    if isinstance(v, (tuple, list)):
        return [encode_value(x) for x in v]
    return v


def encode_final(final, status) -> Any:
    if status is Status.ABORTED:
        return "abort"
    if status is Status.BUDGET_EXCEEDED:
        return {"type": "budget_exceeded"}
    if isinstance(final, Witnesses):
        out = {"type": "witnesses", "values": encode_value(final.values)}
    elif isinstance(final, Collision):
        out = {"type": "collision", "u1": encode_value(final.u1), "u2": encode_value(final.u2)}
    elif isinstance(final, NoPreimageClaim):
        out = {"type": "no_preimage", "index": final.index}
    else:
        return None
    if status is Status.UNVERIFIED:
        out["unverified"] = True
    return out


def verify_witness(instance: PreimageInstance, w: Sequence) -> bool:
    if len(w) != instance.m:
        raise ValueError(f"witness has {len(w)} entries, instance has {instance.m}")
    return all(instance.checker(wj, j) for j, wj in enumerate(w))


def verify_collision(instance: PreimageInstance, c: Collision) -> bool:
    if instance.hash is None or c.u1 == c.u2:
        return False
    if instance.domain_size is not None:
        for u in (c.u1, c.u2):
            if not (isinstance(u, int) and 0 <= u < instance.domain_size):
                return False
    return instance.hash(c.u1) == instance.hash(c.u2)


def _check_no_preimage(instance: PreimageInstance, claim: NoPreimageClaim) -> Optional[bool]:
    """True/False when decidable by exhaustive search, None otherwise."""
    if not 0 <= claim.index < instance.m:
        return False
    if instance.domain_size is None or instance.domain_size > EXHAUSTIVE_LIMIT:
        return None
    return not any(instance.checker(u, claim.index) for u in range(instance.domain_size))


def _verify_output(instance, proposal) -> Optional[bool]:
    if isinstance(proposal, Witnesses):
        if len(proposal.values) != instance.m:
            raise ProtocolViolation(
                f"witness sequence has {len(proposal.values)} entries, expected {instance.m}"
            )
        return verify_witness(instance, proposal.values)
    if isinstance(proposal, Collision):
        return verify_collision(instance, proposal)
    if isinstance(proposal, NoPreimageClaim):
        return _check_no_preimage(instance, proposal)
    raise ProtocolViolation(f"unrecognised solver output {proposal!r}")


def run_game(instance: PreimageInstance, solver: Solver, teacher: Teacher, budget: int) -> Transcript:
    if budget < 0:
        raise ValueError("budget must be non-negative")
    t = Transcript(budget=budget)
    history: tuple = ()
    while True:
        proposal = solver.propose(instance, history)
        if proposal is not None:
            ok = _verify_output(instance, proposal)
            if ok:
                t.final, t.status = proposal, Status.ACCEPTED
                return t
            if ok is None:
                t.final, t.status = proposal, Status.UNVERIFIED
                return t
        if t.queries_used >= budget:
            t.status = Status.BUDGET_EXCEEDED
            return t
        index = solver.next_query(instance, history)
        if not (isinstance(index, int) and 0 <= index < instance.m):
            raise ProtocolViolation(f"query index {index!r} outside [0, {instance.m})")
        answer = teacher.answer(index)
        t.rounds.append(Round(index, answer))
        if answer is ABORT:
            t.status = Status.ABORTED
            return t
        if teacher.honest and not instance.checker(answer, index):
            raise HarnessInvariantViolation(
                f"honest teacher answered index {index} with {answer!r}, which the checker rejects"
            )
        history = history + ((index, answer),)


class _ReplayMismatch(Exception):
    pass


class _ReplayTeacher(Teacher):
    def __init__(self, rounds):
        self._rounds = list(rounds)
        self._pos = 0

    def answer(self, index):
        if self._pos >= len(self._rounds):
            raise _ReplayMismatch("solver asked more queries than recorded")
        rec = self._rounds[self._pos]
        self._pos += 1
        if rec.index != index:
            raise _ReplayMismatch(f"query {self._pos - 1}: recorded index {rec.index}, replay asked {index}")
        return rec.answer


def replay(transcript: Transcript, solver: Solver, instance: PreimageInstance) -> bool:
    """Re-run a deterministic solver on the recorded answers; True iff identical."""
    return replay_mismatch(transcript, solver, instance) is None


def replay_mismatch(transcript: Transcript, solver: Solver, instance: PreimageInstance) -> Optional[str]:
    """Like :func:`replay` but returns a description of the first mismatch."""
    if not getattr(solver, "deterministic", False):
        raise ValueError("replay requires a solver flagged deterministic")
    teacher = _ReplayTeacher(transcript.rounds)
    try:
        again = run_game(instance, solver, teacher, transcript.budget)
    except _ReplayMismatch as exc:
        return str(exc)
    if [(r.index, r.answer) for r in again.rounds] != [(r.index, r.answer) for r in transcript.rounds]:
        return "query/answer sequence differs"
    if again.status != transcript.status:
        return f"status differs: recorded {transcript.status}, replay {again.status}"
    if again.final != transcript.final:
        return "final output differs"
    return None
