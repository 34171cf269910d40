import random

import pytest

from oraclefuzz import attack as atk
from oraclefuzz import minisol as ms
from oraclefuzz.fuzzer import (ATTACK, ATTACKER, Campaign, FuzzConfig, NoBookkeepingError,
                               Scheduler, SeedSequence, enumerate_violations, flip1,
                               generate_initial_sequences, mutate_fallback, mutate_gas,
                               mutate_inputs, mutate_sequence, normalize_exploit,
                               select_next)
from oraclefuzz.script import ExploitScript, ScriptTx, execute_script
from oraclefuzz.trace import ExecutionTrace, FallbackEnter
from oraclefuzz.tracer import DynDictionary
from oraclefuzz.vm import TransactionSpec, execute_transaction

from conftest import Rig, load


def tx(fn, args=(), value=0, gas=100_000):
    return TransactionSpec(ATTACKER, ATTACK, fn, tuple(args), value, gas)


W10, D5 = tx("withdraw", [10]), tx("deposit", value=5)


# attack contract -----------------------------------------------------------

def test_synthesize_dao(dao):
    a = atk.synthesize_attack_contract(dao)
    assert a.surrogates == ["deposit", "withdraw"]
    assert set(a.fallback_library) == {"empty", "throw", "reenter-deposit",
                                       "reenter-withdraw", "gas-bomb"}
    assert a.program.function("withdraw").payable
    assert len(a.fallback_body("gas-bomb")) == 30


def test_synthesize_empty_contract():
    a = atk.synthesize_attack_contract(ms.parse_contract("contract X {}"))
    assert a.surrogates == [] and a.fallback_library == ["empty", "throw", "gas-bomb"]


def test_synthesis_deterministic(dao):
    a, b = atk.synthesize_attack_contract(dao), atk.synthesize_attack_contract(load("simple_dao"))
    assert repr(a.program.functions) == repr(b.program.functions)


def test_surrogate_forwards_unchanged():
    r = Rig(load("simple_dao"))
    r.send("deposit", value=7)
    assert r.world.storage[3]["balances"][ATTACK] == 7
    assert r.world.balances[ATTACK] == 0


def test_reenter_withdraw_recurses():
    r = Rig(load("simple_dao"))
    r.send("deposit", value=5)
    _, trace, v = r.send("withdraw", [3], variant="reenter-withdraw", gas=20_000)
    depths = [e.depth for e in trace.events if type(e) is FallbackEnter and e.contract == ATTACK]
    assert max(depths) >= 2 and not v.ok


# seeds and scheduling -------------------------------------------------------

def test_initial_sequences():
    pool = generate_initial_sequences([W10, D5], 200, random.Random(1))
    assert all(1 <= len(s.txs) <= 4 for s in pool)
    assert any(s.txs == (W10, D5) for s in pool)
    assert generate_initial_sequences([W10], 0, random.Random(1)) == []
    with pytest.raises(ValueError):
        generate_initial_sequences([], 3, random.Random(1))


def test_initial_sequences_deterministic():
    a = generate_initial_sequences([W10, D5], 20, random.Random(9))
    b = generate_initial_sequences([W10, D5], 20, random.Random(9))
    assert [s.txs for s in a] == [s.txs for s in b]


def test_select_next():
    only = SeedSequence((D5,))
    assert select_next([only]) is only
    with pytest.raises(ValueError):
        select_next([])
    a, b = SeedSequence((D5,)), SeedSequence((W10,))
    a.favored = True
    sched = Scheduler()
    picks = [sched.select_next([a, b]) for _ in range(6)]
    assert picks == [a, a, b, a, a, b]


def test_seed_sequence_validation():
    with pytest.raises(ValueError):
        SeedSequence(())


# input mutation ----------------------------------------------------------

def test_flip1_width8():
    assert set(flip1(10, 8)) == {11, 8, 14, 2, 26, 42, 74, 138}


def test_inputs_from_dictionary(dao):
    d = DynDictionary()
    d.add("uint", 5)
    fn = dao.function("withdraw")
    amounts = {c.args[0] for c in mutate_inputs(tx("withdraw", [10]), fn, d, random.Random(0), 256)}
    assert 5 in amounts
    assert any(0 <= a < 5 for a in amounts - {0, 1})
    assert any(5 < a <= 10 for a in amounts - {10})


def test_inputs_without_dictionary(dao):
    fn = dao.function("withdraw")
    got = {c.args[0] for c in mutate_inputs(tx("withdraw", [10]), fn, DynDictionary(),
                                            random.Random(0), 8)}
    assert got == {0, 1, 255} | set(flip1(10, 8))


def test_cfg_only_ignores_dictionary(dao):
    d = DynDictionary()
    d.add("uint", 77)
    fn = dao.function("withdraw")
    got = {c.args[0] for c in mutate_inputs(tx("withdraw", [10]), fn, d, random.Random(0), 8,
                                            use_dict=False)}
    assert 77 not in got


def test_address_params_cycle_accounts():
    p = ms.parse_contract("""contract O { mapping(address => uint) m; address owner;
      function deposit() payable { m[msg.sender] += msg.value; }
      function setOwner(address a) { owner = a; } }""")
    got = mutate_inputs(tx("setOwner", [ATTACK]), p.function("setOwner"), None, random.Random(0))
    assert {c.args[0] for c in got} == {0, 1, 2, 3}


# gas mutation ------------------------------------------------------------

def test_gas_intervals():
    out = mutate_gas(D5, (100, 600), random.Random(3), 5)
    assert len(out) == 5
    for k, t in enumerate(out, 1):
        assert 100 + 100 * (k - 1) <= t.gas_limit < 100 + 100 * k


def test_gas_degenerate():
    assert [t.gas_limit for t in mutate_gas(D5, (700, 700), random.Random(0))] == [700]


@pytest.mark.parametrize("lo,hi", [(1000, 1003), (1000, 25350), (1050, 1051)])
def test_gas_within_bounds(lo, hi):
    for t in mutate_gas(D5, (lo, hi), random.Random(lo), 5):
        assert lo <= t.gas_limit <= hi


# fallback mutation ---------------------------------------------------------

def test_fallback_mutation(dao):
    library = atk.synthesize_attack_contract(dao).fallback_library
    seed = SeedSequence((W10,))
    entered = ExecutionTrace([FallbackEnter(ATTACK, 2)])
    clones = mutate_fallback(seed, [entered], library)
    assert {c.fallback_variant for c in clones} == set(library) - {"empty"}
    assert mutate_fallback(seed, [entered], library) == []
    assert mutate_fallback(SeedSequence((W10,)), [ExecutionTrace()], library) == []


# sequence mutation ---------------------------------------------------------

def test_swap_dependent_pair():
    seed = SeedSequence((W10, D5))
    out = mutate_sequence(seed, [(0, 1, "balances")], lambda: D5, random.Random(0))
    swaps = [c for c in out if c.provenance == "swap"]
    assert [c.txs for c in swaps] == [(D5, W10)]


def test_length_one_has_no_delete():
    out = mutate_sequence(SeedSequence((W10,)), [], lambda: D5, random.Random(0))
    kinds = {c.provenance for c in out}
    assert "delete" not in kinds and "swap" not in kinds
    assert {"replace", "insert"} <= kinds


def test_disjoint_state_no_swap():
    p = ms.parse_contract("""contract Two { mapping(address => uint) m; uint other;
      function deposit() payable { m[msg.sender] += msg.value; }
      function poke(uint x) { other = x; } }""")
    r = Rig(p)
    traces = [r.send("deposit", value=1)[1], r.send("poke", [2])[1]]
    from oraclefuzz.tracer import dependency_pairs
    pairs = dependency_pairs(traces, 3)
    assert pairs == []
    out = mutate_sequence(SeedSequence((D5, tx("poke", [2]))), pairs, lambda: D5, random.Random(0))
    assert {c.provenance for c in out} == {"replace", "delete", "insert"}


def test_insert_truncates():
    seed = SeedSequence((D5,) * 8)
    out = mutate_sequence(seed, [], lambda: W10, random.Random(0), max_len=8)
    assert all(len(c.txs) <= 8 for c in out)


# campaign ------------------------------------------------------------------

def test_no_bookkeeping():
    with pytest.raises(NoBookkeepingError):
        Campaign(load("no_mapping"), FuzzConfig(max_iters=10))


def test_config_validation():
    with pytest.raises(ValueError):
        FuzzConfig(feedback="bogus")
    with pytest.raises(ValueError):
        FuzzConfig(max_iters=None)


def test_state_reset_counter(dao):
    c = Campaign(dao, FuzzConfig(max_iters=10, reset_period=10))
    before = c.world.serialize()
    execute_transaction(c.world, tx("deposit", value=5, gas=10**5))
    c.tx_since_reset = 9
    assert not c.mutate_contract_state()
    assert c.world.serialize() != before
    c.tx_since_reset = 10
    assert c.mutate_contract_state()
    assert c.world.serialize() == before and c.tx_since_reset == 0
    assert c.bindings[0].baseline == -100


def test_pool_growth_capped(dao):
    c = Campaign(dao, FuzzConfig(max_iters=2000))
    for _ in range(30):
        n = len(c.pool)
        c.run_seed(c.scheduler.select_next(c.pool))
        assert len(c.pool) - n <= 64


def test_dao_walkthrough(dao):
    probe = Campaign(dao, FuzzConfig(max_iters=1))
    seeds = [tx("withdraw", [10], gas=probe.bounds("withdraw")[1]),
             tx("deposit", value=5, gas=probe.bounds("deposit")[1])]
    c = Campaign(dao, FuzzConfig(seed=4, max_iters=2000, reset_period=1), seeds=seeds)
    shapes = [normalize_exploit(e) for e in c.run()]
    hits = [s for s in shapes if s[0] == "reenter-withdraw" and len(s[1]) == 2
            and s[1][0] == ("deposit", (), 5) and s[1][1][0] == "withdraw"
            and 0 < s[1][1][1][0] < 5]
    assert hits
    assert all(e.verdict.outcome == "balance_violation" for e in c.exploits)


def _replays(program, record, balance=100):
    script = ExploitScript("x.msol", balance, record.sequence.fallback_variant,
                           record.initial_state,
                           [ScriptTx(t.sender, t.function, t.args, t.value, t.gas_limit)
                            for t in record.sequence.txs])
    got = execute_script(program, script).observed()
    v = record.verdict
    return got == (v.kind, v.classification, v.tx_index)


def test_determinism_and_replay(dao):
    runs = []
    for _ in range(2):
        c = Campaign(dao, FuzzConfig(seed=11, max_iters=3000))
        runs.append([(normalize_exploit(e), e.initial_state, e.verdict.line()) for e in c.run()])
    assert runs[0] == runs[1] and runs[0]
    for e in c.exploits:
        assert _replays(dao, e)


def test_carried_state_replays_from_recorded_start(dao):
    c = Campaign(dao, FuzzConfig(seed=3, max_iters=6000, reset_period=50))
    setup = c.world.copy()
    setup.restore(c._setup)
    carried = [e for e in c.run() if e.initial_state != setup.serialize()]
    assert carried
    for e in carried:
        assert _replays(dao, e)


def test_modes_distinguishable(dao):
    prov = {}
    for mode in ("full", "cfg_only"):
        c = Campaign(dao, FuzzConfig(seed=5, max_iters=1500, feedback=mode))
        c.run()
        prov[mode] = {s.provenance for s in c.pool}
    assert "swap" not in prov["cfg_only"] and "dict" not in prov["cfg_only"]
    assert prov["full"] & {"swap", "dict"}


def test_bounded_domain_stays_in_domain(dao):
    c = Campaign(dao, FuzzConfig(seed=1, max_iters=1500, domain=tuple(range(9)), max_seq_len=3))
    c.run()
    for s in c.pool:
        assert len(s.txs) <= 3
        for t in s.txs:
            assert all(a in range(9) for a in t.args) and t.value in range(9)
            assert t.gas_limit == c.bounds(t.function)[1]


# exhaustive cross-check -------------------------------------------------------

@pytest.fixture(scope="module")
def dao_violations():
    return enumerate_violations(load("simple_dao"))


def test_enumeration_finds_dao(dao_violations):
    assert dao_violations
    assert ("reenter-withdraw", (("deposit", (), 5), ("withdraw", (3,), 0))) in dao_violations
    assert all(v.classification == "reentrancy" for k, v in dao_violations.items()
               if k[0] == "reenter-withdraw" and len(k[1]) == 2)


def test_fuzzer_exploits_in_enumerated_set(dao, dao_violations):
    c = Campaign(dao, FuzzConfig(seed=2, max_iters=4000, domain=tuple(range(9)),
                                 reset_period=1, max_seq_len=3))
    found = c.run()
    assert found
    for e in found:
        assert normalize_exploit(e) in dao_violations
