import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from witnesskit.bitparity import BitMatrix, BitVec, par, parity_bit, unpar
from witnesskit.errors import ConfigError
from witnesskit.experiments import exact_abort_probability, hoeffding_slack
from witnesskit.numtheory import RabinModulus, four_roots
from witnesskit.reductions import (
    COLLISION,
    COLLISION_FAIL,
    FACTOR,
    FACTOR_FAIL,
    PARITY_ABORT,
    PARITY_DECISION,
    PARITY_FAIL,
    CanonicalPreimageSolver,
    CanonicalRootSolver,
    ColliderSolver,
    ConstantSolver,
    FactoringConfig,
    FixedIndexSolver,
    LazyParitySolver,
    MixingSolver,
    ModHash,
    OmniscientParitySolver,
    ParityConfig,
    RandomRootSolver,
    ScriptedParitySolver,
    WphpConfig,
    blind,
    factoring_attack,
    factoring_game,
    hierarchy_table,
    make_solver,
    output_count_audit,
    parity_decider,
    parity_game,
    recover_parity,
    run_one,
    wphp_attack,
    wphp_game,
)
from witnesskit.rng import RandomStream, derive_trial_seed


def B(s):
    return BitVec.from_str(s)


# ------------------------------------------------------------ parity


def test_blind_examples():
    assert [str(r) for r in blind(B("00"), [B("00"), B("00")], 0)] == ["00", "00"]
    assert [str(r) for r in blind(B("11"), [B("00"), B("00")], 1)] == ["00", "11"]


def test_blind_dimension_errors():
    with pytest.raises(ValueError):
        blind(B("00"), [B("000"), B("00")], 0)
    with pytest.raises(ValueError):
        blind(B("00"), [B("00"), B("00")], 2)


def test_blind_m2_uniform_exhaustive():
    # oracle: build the rows by hand from the definition
    m = 2
    for Iw in range(4):
        I = BitVec(m, Iw)
        seen = Counter()
        for u0, u1 in itertools.product(range(4), repeat=2):
            for r in range(m):
                rows = [unpar(BitVec(m, u0)).word, unpar(BitVec(m, u1)).word]
                rows[r] ^= Iw
                Y = blind(I, [BitVec(m, u0), BitVec(m, u1)], r)
                assert [row.word for row in Y] == rows
                seen[(tuple(rows), r)] += 1
        assert len(seen) == 32 and set(seen.values()) == {1}


def test_recover_parity_examples():
    assert str(recover_parity(B("0000"), B("1001"))) == "1001"
    I, U_r = B("1101"), B("0110")
    V_r = unpar(U_r)
    assert str(V_r) == "0101"
    W_r = par(I ^ V_r)
    assert str(W_r) == "1111"
    assert recover_parity(U_r, W_r) == par(I) == B("1001")


def test_recover_parity_exhaustive_m3():
    m = 3
    for Iw, Uw in itertools.product(range(8), repeat=2):
        I, U = BitVec(m, Iw), BitVec(m, Uw)
        assert recover_parity(U, par(I ^ unpar(U))) == par(I)


def test_parity_decider_omniscient_never_aborts():
    cfg = ParityConfig(m=4, k=2)
    for seed in range(200):
        out = parity_decider(B("1101"), cfg, OmniscientParitySolver(), RandomStream(seed))
        assert out.kind == PARITY_DECISION and out.value == 1
        assert out.transcript.queries_used == 0


def test_first_index_solver_aborts_exactly_half_m2():
    I = B("10")
    for U in itertools.product([BitVec(2, w) for w in range(4)], repeat=2):
        kinds = [parity_game(I, U, r, FixedIndexSolver([0]), 5).kind for r in range(2)]
        assert sorted(kinds) == sorted([PARITY_DECISION, PARITY_ABORT])


@settings(max_examples=100)
@given(st.integers(0, 2**64 - 1), st.integers(1, 40), st.integers(0, 6))
def test_sound_solver_decision_always_correct(seed, m, k):
    rng = RandomStream(seed)
    I = BitVec.random(m, rng)
    cfg = ParityConfig(m=m, k=k)
    out = parity_decider(I, cfg, ScriptedParitySolver(k), rng)
    assert out.kind in (PARITY_DECISION, PARITY_ABORT)
    if out.kind == PARITY_DECISION:
        assert out.value == parity_bit(I)
    assert out.transcript.distinct_indices <= min(k, m)


def test_lazy_solver_runs_out_of_budget():
    out = parity_decider(B("1011"), ParityConfig(m=4, k=2), LazyParitySolver(), RandomStream(1))
    assert out.kind in (PARITY_FAIL, PARITY_ABORT)


@pytest.mark.parametrize("m,k", [(2, 1), (3, 1), (3, 2)])
def test_exact_abort_probability(m, k):
    for solver in (ScriptedParitySolver(k), FixedIndexSolver([0]), OmniscientParitySolver()):
        p_abort, expected, wrong = exact_abort_probability(m, solver, k)
        assert p_abort == expected <= Fraction(k, m)
        assert wrong == 0
    p_abort, _, _ = exact_abort_probability(m, ScriptedParitySolver(k), k)
    assert p_abort == Fraction(k, m)


def test_parity_rows_generalization():
    cfg = ParityConfig(m=5, k=2, rows=12)
    assert cfg.A == 12 and cfg.bound_holds
    for seed in range(20):
        out = parity_decider(B("10110"), cfg, ScriptedParitySolver(2), RandomStream(seed))
        assert out.transcript.distinct_indices <= 2
        if out.kind == PARITY_DECISION:
            assert len(out.transcript.final.values) == 12 and out.value == 1
    assert not ParityConfig(m=8, k=4).bound_holds


def test_hierarchy_table():
    rows = hierarchy_table([8, 64, 1024], k=1)
    assert rows[0] == {"len_n": 8, "len_len_n": 4, "rows": 8, "budget": 4, "bound_holds": False}
    assert rows[1]["budget"] == 7 and rows[1]["bound_holds"]
    assert hierarchy_table([1024], k=2)[0]["budget"] == 2 * 11**2


# ------------------------------------------------------------ factoring


def test_factoring_n21_per_index_half_exact():
    mod = RabinModulus(3, 7)
    units = [x for x in range(1, 21) if math.gcd(x, 21) == 1]
    wins = 0
    for x1 in units:
        out = factoring_game(mod, [units[0], x1], CanonicalRootSolver(mod, 1), 1)
        assert out.transcript.queried == {0}
        wins += out.kind == FACTOR
        if out.kind == FACTOR:
            assert out.value in (3, 7)
    assert Fraction(wins, len(units)) == Fraction(1, 2)


def test_factoring_two_unused_indices_three_quarters():
    mod = RabinModulus(3, 7)
    units = [x for x in range(1, 21) if math.gcd(x, 21) == 1]
    wins = sum(
        factoring_game(mod, [1, a, b], CanonicalRootSolver(mod, 1), 1).kind == FACTOR
        for a in units for b in units
    )
    assert Fraction(wins, len(units) ** 2) == 1 - Fraction(1, 4)


def test_factoring_gcd_leak():
    mod = RabinModulus(3, 7)
    out = factoring_game(mod, [3, 4], CanonicalRootSolver(mod, 1), 1)
    assert out.kind == FACTOR and out.value == 3 and out.transcript is None


def test_factoring_all_queried_can_fail():
    mod = RabinModulus(3, 7)
    out = factoring_game(mod, [2, 4], CanonicalRootSolver(mod, 5), 5)
    assert out.kind == FACTOR_FAIL and out.details["unused"] == 0


def test_factoring_first_success_ascending():
    mod = RabinModulus(3, 7)
    # index 0 queried; canonical roots: 4 -> 2, 1 -> 1
    out = factoring_game(mod, [2, 19, 5], CanonicalRootSolver(mod, 1), 1)
    # index 1: x=19, w=min root of 4 = 2 -> 19+2=21, no factor; index 2: x=5, w=2 -> gcd(3,21)=3
    assert out.kind == FACTOR and out.value == 3
    assert out.details["unused_successes"] == 1


def test_canonical_solver_uses_min_root_and_hides_secret():
    mod = RabinModulus(10007, 10009)
    solver = CanonicalRootSolver(mod, 0)
    out = factoring_attack(mod, FactoringConfig(prime_bits=14, k=0, m=3), solver, RandomStream(2))
    assert out.transcript is not None
    doc = out.transcript.to_json()
    assert "10007" not in doc and "10009" not in doc
    assert all(w == four_roots(w * w % mod.n, mod).canonical for w in out.transcript.final.values)
    assert "10007" not in repr(solver)


def test_random_root_solver_is_flagged():
    mod = RabinModulus(3, 7)
    assert not RandomRootSolver(mod, 1, RandomStream(0)).deterministic


# ------------------------------------------------------------ WPHP


def test_wphp_example_collision():
    cfg = WphpConfig(n=16, k=0, seq_len=2)
    out = wphp_game(cfg, [20, 3], CanonicalPreimageSolver(cfg, 0))
    assert out.kind == COLLISION and out.value == (20, 4)


def test_wphp_fixed_points_fail():
    cfg = WphpConfig(n=16, k=0, seq_len=2)
    out = wphp_game(cfg, [7, 3], CanonicalPreimageSolver(cfg, 0))
    assert out.kind == COLLISION_FAIL


def test_wphp_requires_deterministic():
    class Flaky(CanonicalPreimageSolver):
        deterministic = False

    cfg = WphpConfig(n=16, k=0, seq_len=2)
    with pytest.raises(ValueError):
        wphp_game(cfg, [1, 2], Flaky(cfg, 0))
    with pytest.raises(ValueError):
        wphp_attack(cfg, Flaky(cfg, 0), RandomStream(0))


def test_wphp_collisions_always_valid():
    cfg = WphpConfig(n=64, k=1, seq_len=3)
    h = cfg.h
    for sid in ("canonical", "mixing", "collider", "constant"):
        solver = make_solver("wphp", sid, cfg)
        for seed in range(200):
            out = wphp_attack(cfg, solver, RandomStream(seed))
            if out.kind == COLLISION:
                u1, u2 = out.value
                assert u1 != u2 and h(u1) == h(u2)
                assert 0 <= u1 < cfg.domain and 0 <= u2 < cfg.domain


def test_wphp_collision_fail_matches_analytic_small():
    # canonical solver, k=0: fails iff every x_i < n, probability (n / n^L)^L
    cfg = WphpConfig(n=4, k=0, seq_len=2)
    trials = 4000
    runner = run_one("wphp", cfg, "canonical")
    fails = sum(runner(derive_trial_seed(11, i)).kind == COLLISION_FAIL for i in range(trials))
    analytic = (4 / 16) ** 2
    assert abs(fails / trials - analytic) <= hoeffding_slack(trials)


def test_wphp_collision_fail_rare_at_1024():
    cfg = WphpConfig(n=1024, k=0, seq_len=2)
    runner = run_one("wphp", cfg, "canonical")
    fails = sum(runner(derive_trial_seed(5, i)).kind == COLLISION_FAIL for i in range(2000))
    assert fails / 2000 < 0.01


def test_wphp_failure_bound():
    assert WphpConfig(n=4, k=1, seq_len=2).failure_bound() == 1
    assert WphpConfig(n=4, k=0, seq_len=2).failure_bound() == Fraction(1, 16)
    assert WphpConfig(n=1024, k=2).L == 11


def test_output_count_audit_examples():
    cfg0 = WphpConfig(n=4, k=0, seq_len=2)
    assert output_count_audit(cfg0, CanonicalPreimageSolver(cfg0, 0)) <= 4**2
    cfg = WphpConfig(n=4, k=1, seq_len=2)
    counts = {s.name: output_count_audit(cfg, s) for s in
              (CanonicalPreimageSolver(cfg, 1), MixingSolver(cfg, 1), ConstantSolver(cfg), ColliderSolver(cfg))}
    assert all(c <= 256 for c in counts.values())
    assert counts["constant"] == 1
    # 16 targets times 4 admissible answers: the mixing solver is injective on them
    assert counts["mixing"] == 64


def test_output_count_audit_refuses_large():
    cfg = WphpConfig(n=1024, k=1, seq_len=3)
    with pytest.raises(ConfigError, match="would run"):
        output_count_audit(cfg, CanonicalPreimageSolver(cfg, 1))


def test_generic_hash_via_search():
    cfg = WphpConfig(n=5, k=0, seq_len=2, hash=lambda u: (u * 3 + 1) % 5)
    solver = CanonicalPreimageSolver(cfg, 0)
    out = wphp_game(cfg, [24, 7], solver)
    assert out.kind == COLLISION
    u1, u2 = out.value
    assert cfg.h(u1) == cfg.h(u2) and u1 != u2


def test_modhash():
    h = ModHash(16)
    assert h(20) == 4 and h.preimage(4) == 4 and h == ModHash(16)


def test_unknown_solver():
    with pytest.raises(ConfigError):
        make_solver("parity", "nope", ParityConfig(4, 1))
    with pytest.raises(ConfigError):
        run_one("parity", ParityConfig(4, 1), "nope")


class AdaptiveParitySolver(ScriptedParitySolver):
    """Next row depends on the previous answer; stops early on an even answer."""

    def __init__(self, queries):
        super().__init__(queries)

    def _plan_done(self, history):
        return len(history) >= self.queries or (history and history[-1][1].word % 2 == 0)

    def propose(self, instance, history):
        if not self._plan_done(history):
            return None
        return self._witnesses(instance, dict(history))

    def next_query(self, instance, history):
        if not history:
            return instance.targets[-1].word % instance.m
        return (history[-1][0] + 1 + history[-1][1].word) % instance.m


@pytest.mark.parametrize("m,k", [(2, 2), (3, 2), (3, 3)])
def test_exact_abort_probability_adaptive(m, k):
    p_abort, expected, wrong = exact_abort_probability(m, AdaptiveParitySolver(k), k)
    assert p_abort == expected <= Fraction(k, m)
    assert wrong == 0
