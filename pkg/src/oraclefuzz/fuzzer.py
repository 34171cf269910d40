"""Grey-box fuzzing campaign over transaction sequences.

A campaign owns one world with five accounts: the attacker's externally
owned account, a bystander, the owner who deployed the target, the target
itself and the synthesized attack contract.  Every fuzzed transaction is
sent by the attacker through the attack contract's surrogates, so the
target always sees the attack contract as ``msg.sender`` and its fallback
runs whenever the target pays out.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field, replace
from typing import Optional

from . import attack as atk
from .minisol import FALLBACK, ContractProgram
from .oracle import check_transaction, identify_bookkeeping, rebind_baseline
from .trace import FallbackEnter
from .tracer import (CoverageMap, DepCoverage, DynDictionary, dependency_pairs,
                     extract_dictionary_values, is_new_dep_coverage, is_new_edge_coverage)
from .vm import (DEFAULT_SCHEDULE, GasSchedule, TransactionSpec, WorldState, deploy,
                 estimate_gas_bounds, execute_transaction)

log = logging.getLogger(__name__)

ATTACKER, BYSTANDER, OWNER, TARGET, ATTACK = range(5)
ACCOUNT_NAMES = ("attacker", "alice", "owner")
ACCOUNTS = (ATTACKER, BYSTANDER, OWNER, TARGET, ATTACK)
SURROGATE_OVERHEAD = 100 + DEFAULT_SCHEDULE.call_retention
# admission order when a round produces more candidates than the cap
ADMIT_RANK = {"dict": 1, "account": 1, "boundary": 2, "gas": 2, "flip": 3}


class NoBookkeepingError(Exception):
    """The target exposes no variable the oracle can bind to."""


@dataclass
class FuzzConfig:
    seed: int = 0
    max_iters: Optional[int] = 50_000  # executed transactions
    budget_secs: Optional[float] = None
    feedback: str = "full"  # full | cfg_only
    reset_period: int = 10
    gas_intervals: int = 5
    width: int = 256
    stop_first: bool = False
    target_balance: int = 100
    account_funding: int = 10**8
    initial_pool: int = 8
    max_seq_len: int = 8
    max_new_seeds: int = 64
    dict_cap: int = 256
    # bounded mode for cross-checks: numeric inputs only from this set,
    # gas pinned at the upper estimate
    domain: Optional[tuple] = None

    def __post_init__(self):
        if self.feedback not in ("full", "cfg_only"):
            raise ValueError(f"unknown feedback mode {self.feedback!r}")
        if self.reset_period < 1 or self.gas_intervals < 1:
            raise ValueError("reset_period and gas_intervals must be positive")
        if self.max_iters is None and self.budget_secs is None:
            raise ValueError("need an iteration cap or a time budget")
        if self.domain is not None:
            self.domain = tuple(sorted(set(self.domain)))
            if not self.domain or self.domain[0] < 0:
                raise ValueError("domain must be a non-empty set of naturals")


@dataclass(eq=False)
class SeedSequence:
    txs: tuple
    fallback_variant: str = atk.EMPTY
    provenance: str = "initial"
    tried: set = field(default_factory=set)
    favored: bool = False
    executed: bool = False

    def __post_init__(self):
        if not self.txs:
            raise ValueError("a seed sequence needs at least one transaction")
        self.txs = tuple(self.txs)
        for tx in self.txs:
            if not isinstance(tx, TransactionSpec):
                raise TypeError("seed entries must be TransactionSpec")
        self.tried.add(self.fallback_variant)

    def clone(self, txs=None, variant=None, provenance="") -> "SeedSequence":
        """Copy with new transactions or a new fallback.  A fallback-only
        clone shares the parent's record of variants tried."""
        same_txs = txs is None
        return SeedSequence(tuple(self.txs if same_txs else txs),
                            variant or self.fallback_variant, provenance or self.provenance,
                            tried=self.tried if same_txs else set())

    def signature(self) -> tuple:
        return tuple(t.function for t in self.txs), self.fallback_variant


@dataclass
class ExploitRecord:
    sequence: SeedSequence
    initial_state: str
    verdict: object
    iteration: int = 0

    def signature(self) -> tuple:
        return (self.sequence.signature(), self.verdict.outcome, self.verdict.classification)


# ------------------------------------------------------------ world setup

def build_world(program: ContractProgram, attack_contract, target_balance: int = 100,
                funding: int = 10**8, width: int = 256) -> WorldState:
    world = WorldState(width)
    for name in ACCOUNT_NAMES:
        world.create_account(funding, name)
    target = deploy(world, program, target_balance, deployer=OWNER)
    attacker = deploy(world, attack_contract.program, 0, deployer=ATTACKER,
                      init={"target": target}, attack=True)
    assert (target, attacker) == (TARGET, ATTACK)
    return world


def route(world: WorldState, sender: int, function: str) -> int:
    """Attacker calls go through the attack contract's surrogates."""
    if sender == ATTACKER and function != FALLBACK and world.attack_address is not None:
        return world.attack_address
    return TARGET


def reenter_args(txs, index: int, variant: str) -> tuple:
    """Arguments a re-entry fallback uses while ``txs[index]`` runs: the
    current call's if it targets the same function, else the latest earlier
    call to it, else zeros (filled in by the library)."""
    if not variant.startswith(atk.REENTER_PREFIX):
        return ()
    fn = variant[len(atk.REENTER_PREFIX):]
    for tx in reversed(txs[:index + 1]):
        if tx.function == fn:
            return tuple(tx.args)
    return ()


# ---------------------------------------------------------------- mutators

def gas_bounds(program, attack_contract, function: str, nargs: int,
               schedule: GasSchedule = DEFAULT_SCHEDULE) -> tuple:
    longest = max(atk.variant_length(v) for v in attack_contract.fallback_library)
    g_i, g_t = estimate_gas_bounds(program, function, (0,) * nargs, schedule, (longest,))
    return g_i, g_t + SURROGATE_OVERHEAD


def generate_initial_sequences(seeds, count: int, rng: random.Random, variant=atk.EMPTY,
                               max_len: int = 4) -> list:
    if not seeds:
        raise ValueError("no seed transactions")
    pool = []
    for _ in range(count):
        n = rng.randint(1, min(4, max_len))
        pool.append(SeedSequence(tuple(rng.choice(seeds) for _ in range(n)), variant))
    return pool


class Scheduler:
    """Round-robin over the pool; favored seeds are served twice in a row."""

    def __init__(self):
        self._queue = []
        self._pos = 0
        self.cycles = 0
        self.cycle_started = False

    def select_next(self, pool) -> SeedSequence:
        if not pool:
            raise ValueError("empty pool")
        self.cycle_started = self._pos >= len(self._queue)
        if self.cycle_started:
            self.cycles += 1
            self._queue = []
            for s in pool:
                self._queue.extend((s, s) if s.favored else (s,))
            self._pos = 0
        seed = self._queue[self._pos]
        self._pos += 1
        return seed


def select_next(pool, scheduler: Optional[Scheduler] = None) -> SeedSequence:
    return (scheduler or Scheduler()).select_next(pool)


def flip1(value: int, width: int) -> list:
    return [value ^ (1 << b) for b in range(width)]


def _numeric_candidates(value, dict_values, rng, width, domain=None):
    top = (1 << width) - 1
    if domain is not None:
        out = _numeric_candidates(value, dict_values, rng, width)
        out = [(o, c) for o, c in out if c in domain]
        return out + [("boundary", c) for c in (domain[0], domain[-1])]
    out = []
    for v in dict_values:
        if v > 0:
            out.append(("dict", rng.randrange(0, v)))
        out.append(("dict", v))
        if v > 0:
            out.append(("dict", min(top, rng.randint(v + 1, 2 * v))))
    out += [("boundary", c) for c in (0, 1, top)]
    out += [("flip", c) for c in flip1(value, width)]
    return out


def input_edits(tx: TransactionSpec, fn, dictionary, rng, width=256, use_dict=True,
                accounts=ACCOUNTS, domain=None) -> list:
    """``(origin, slot, value)`` single-field edits of ``tx``; slot is an
    argument index or ``"value"``, origin is dict, boundary, flip or
    account."""
    out = []
    numbers = dictionary.numbers("uint") if (use_dict and dictionary is not None) else []
    for i, p in enumerate(fn.params):
        cur = tx.args[i]
        if p.type == "address":
            cands = [("account", a) for a in accounts if a != cur]
        elif p.type == "bool":
            cands = [("boundary", 1 - (cur & 1))]
        else:
            cands = _numeric_candidates(cur, numbers, rng, width, domain)
        out += [(origin, i, c) for origin, c in cands]
    if fn.payable:
        out += [(origin, "value", c) for origin, c in _numeric_candidates(tx.value, numbers, rng, width, domain)]
    return out


def apply_edit(tx: TransactionSpec, slot, value) -> TransactionSpec:
    if slot == "value":
        return tx.with_(value=value)
    args = list(tx.args)
    args[slot] = value
    return tx.with_(args=tuple(args))


def mutate_inputs(tx: TransactionSpec, fn, dictionary, rng, width=256, use_dict=True,
                  accounts=ACCOUNTS) -> list:
    """Candidates differing from ``tx`` in one argument or in the value."""
    return [apply_edit(tx, slot, v)
            for _, slot, v in input_edits(tx, fn, dictionary, rng, width, use_dict, accounts)]


def mutate_gas(tx: TransactionSpec, bounds: tuple, rng, n: int = 5) -> list:
    g_i, g_t = bounds
    if g_i == g_t:
        return [tx.with_(gas_limit=g_t)]
    out = []
    for k in range(n):
        lo = g_i + (g_t - g_i) * k // n
        hi = g_i + (g_t - g_i) * (k + 1) // n
        out.append(tx.with_(gas_limit=rng.randrange(lo, hi) if hi > lo else lo))
    return out


def mutate_fallback(seed: SeedSequence, trace_list, library, attack_address=ATTACK) -> list:
    ran = any(type(e) is FallbackEnter and e.contract == attack_address
              for t in trace_list for e in t.events)
    if not ran:
        return []
    fresh = [v for v in library if v not in seed.tried]
    seed.tried.update(fresh)
    return [seed.clone(variant=v, provenance="fallback") for v in fresh]


def mutate_sequence(seed: SeedSequence, pairs, fresh_tx, rng, allow_swap=True,
                    max_len: int = 8) -> list:
    """Swap dependent transactions, replace, delete and insert; at most two
    candidates per operator."""
    txs = list(seed.txs)
    out = []
    if allow_swap:
        linked = sorted({(i, j) for i, j, _ in pairs})
        rng.shuffle(linked)
        for i, j in linked[:2]:
            swapped = list(txs)
            swapped[i], swapped[j] = swapped[j], swapped[i]
            out.append(seed.clone(swapped, provenance="swap"))
    for _ in range(2):
        k = rng.randrange(len(txs))
        out.append(seed.clone(txs[:k] + [fresh_tx()] + txs[k + 1:], provenance="replace"))
    if len(txs) > 1:
        for _ in range(2):
            k = rng.randrange(len(txs))
            out.append(seed.clone(txs[:k] + txs[k + 1:], provenance="delete"))
    for _ in range(2):
        k = rng.randrange(len(txs) + 1)
        grown = (txs[:k] + [fresh_tx()] + txs[k:])[:max_len]
        out.append(seed.clone(grown, provenance="insert"))
    return out


# ---------------------------------------------------------------- campaign

class Campaign:
    def __init__(self, program: ContractProgram, config: FuzzConfig = None,
                 schedule: GasSchedule = DEFAULT_SCHEDULE, seeds=None):
        self.program = program
        self.config = config or FuzzConfig()
        self.schedule = schedule
        self.rng = random.Random(self.config.seed)
        self.attack = atk.synthesize_attack_contract(program)
        self.world = build_world(program, self.attack, self.config.target_balance,
                                 self.config.account_funding, self.config.width)
        self._setup = self.world.snapshot()
        bindings = identify_bookkeeping(program, TARGET, self.world, schedule=schedule)
        if not bindings:
            raise NoBookkeepingError(f"no bookkeeping variable in {program.name}")
        self._setup_bindings = bindings
        self.bindings = [rebind_baseline(b, self.world) for b in bindings]
        self.coverage = CoverageMap()
        self.deps = DepCoverage()
        self.dictionary = DynDictionary(self.config.dict_cap)
        self.scheduler = Scheduler()
        self.exploits: list = []
        self._signatures = set()
        self.iterations = 0
        self.sequences_run = 0
        self.tx_since_reset = 0
        self.first_exploit_iteration: Optional[int] = None
        self.stalled = False
        self._admitted_in_cycle = 0
        self._bounds = {}
        self.seeds = list(seeds) if seeds is not None else self.default_seeds()
        self.pool = generate_initial_sequences(self.seeds, self.config.initial_pool, self.rng,
                                               max_len=self.config.max_seq_len)

    @property
    def full(self) -> bool:
        return self.config.feedback == "full"

    def bounds(self, function: str) -> tuple:
        if function not in self._bounds:
            fn = self.program.function(function)
            self._bounds[function] = gas_bounds(self.program, self.attack, function,
                                                fn.arity, self.schedule)
        return self._bounds[function]

    def default_seeds(self) -> list:
        seeds = []
        for fn in self.program.public_functions:
            args = tuple(ATTACK if p.type == "address" else (1 if p.type == "bool" else self._clip(10))
                         for p in fn.params)
            value = self._clip(5) if fn.payable else 0
            seeds.append(TransactionSpec(ATTACKER, ATTACK, fn.name, args, value,
                                         self.bounds(fn.name)[1]))
        return seeds

    def _clip(self, v):
        dom = self.config.domain
        return v if dom is None or v in dom else dom[-1]

    def fresh_tx(self) -> TransactionSpec:
        fn = self.rng.choice(self.program.public_functions)
        top = (1 << self.config.width) - 1
        boundary = self.config.domain or (0, 1, top)
        args = tuple(self.rng.choice(ACCOUNTS) if p.type == "address"
                     else self.rng.choice(boundary) for p in fn.params)
        value = self.rng.choice(boundary) if fn.payable else 0
        return TransactionSpec(ATTACKER, ATTACK, fn.name, args, value, self.bounds(fn.name)[1])

    # state mutation -------------------------------------------------------

    def mutate_contract_state(self, force: bool = False) -> bool:
        if not force and self.tx_since_reset < self.config.reset_period:
            return False
        self.world.restore(self._setup)
        self.bindings = [rebind_baseline(b, self.world) for b in self._setup_bindings]
        self.tx_since_reset = 0
        return True

    # main loop ------------------------------------------------------------

    def _budget_left(self, started) -> bool:
        cfg = self.config
        if cfg.max_iters is not None and self.iterations >= cfg.max_iters:
            return False
        if cfg.budget_secs is not None and time.monotonic() - started >= cfg.budget_secs:
            return False
        if cfg.stop_first and self.exploits:
            return False
        return True

    def run(self) -> list:
        started = time.monotonic()
        while self._budget_left(started):
            seed = self.scheduler.select_next(self.pool)
            if self.scheduler.cycle_started:
                # a full pass that admitted nothing means every guard has
                # gone quiet; mutate unconditionally for the next pass
                self.stalled = self.scheduler.cycles > 1 and self._admitted_in_cycle == 0
                self._admitted_in_cycle = 0
            self.run_seed(seed)
        return self.exploits

    def run_seed(self, seed: SeedSequence) -> None:
        cfg = self.config
        self.mutate_contract_state()
        start = self.world.snapshot()
        traces = []
        candidates = []
        new_edges = False
        for i, tx in enumerate(seed.txs):
            body = self.attack.fallback_body(seed.fallback_variant,
                                             reenter_args(seed.txs, i, seed.fallback_variant))
            pre = self.world.snapshot()
            _, trace = execute_transaction(self.world, tx, self.schedule, body)
            self.iterations += 1
            self.tx_since_reset += 1
            traces.append(trace)
            self.dictionary.update(extract_dictionary_values(trace, self.world, TARGET))
            verdict = self._check(trace, pre, i)
            if verdict is not None:
                self._record(seed, i, start, verdict)
                self.mutate_contract_state(force=True)
                break
            fresh_edges = is_new_edge_coverage(self.coverage, trace)
            new_edges = new_edges or fresh_edges
            if fresh_edges or self.stalled:
                fn = self.program.function(tx.function)
                edits = input_edits(tx, fn, self.dictionary, self.rng, cfg.width,
                                    use_dict=self.full, domain=cfg.domain)
                # materialized only if admitted
                candidates += [(origin, (i, slot, v)) for origin, slot, v in edits]
                if cfg.domain is None:
                    candidates += [("gas", (i, None, m)) for m in mutate_gas(
                        tx, self.bounds(tx.function), self.rng, cfg.gas_intervals)]
                candidates += [(c.provenance, c) for c in
                               mutate_fallback(seed, [trace], self.attack.fallback_library)]
            if not self._budget_left_quick():
                break
        new_deps = is_new_dep_coverage(self.deps, traces, TARGET)
        if (new_deps if self.full else new_edges) or self.stalled:
            pairs = dependency_pairs(traces, TARGET) if self.full else []
            candidates += [(c.provenance, c) for c in
                           mutate_sequence(seed, pairs, self.fresh_tx, self.rng,
                                           allow_swap=self.full, max_len=cfg.max_seq_len)]
        if not seed.executed and seed.provenance not in ("fallback", "fallback-trial"):
            untried = [v for v in self.attack.fallback_library if v not in seed.tried]
            if untried:
                v = self.rng.choice(untried)
                seed.tried.add(v)
                candidates.append(("fallback-trial", seed.clone(variant=v, provenance="fallback-trial")))
        seed.executed = True
        seed.favored = new_edges or (self.full and new_deps)
        admitted = [self._materialize(seed, origin, c) for origin, c in self._admit(candidates)]
        self._admitted_in_cycle += len(admitted)
        self.pool.extend(admitted)
        self.sequences_run += 1

    def _admit(self, candidates) -> list:
        """Keep at most ``max_new_seeds`` ``(origin, candidate)`` pairs,
        preferring structural mutations and informed inputs over blind bit
        flips."""
        cap = self.config.max_new_seeds
        if self.stalled:
            cap = max(1, cap // 8)
        if len(candidates) <= cap:
            return candidates
        keyed = [(ADMIT_RANK.get(origin, 0), self.rng.random(), n)
                 for n, (origin, _) in enumerate(candidates)]
        keyed.sort()
        return [candidates[k[2]] for k in keyed[:cap]]

    @staticmethod
    def _materialize(seed, origin, cand) -> SeedSequence:
        if isinstance(cand, SeedSequence):
            return cand
        i, slot, payload = cand
        txs = list(seed.txs)
        txs[i] = payload if slot is None else apply_edit(txs[i], slot, payload)
        return seed.clone(txs, provenance=origin)

    def _budget_left_quick(self) -> bool:
        return self.config.max_iters is None or self.iterations < self.config.max_iters

    def _check(self, trace, pre, index):
        for b in self.bindings:
            v = check_transaction(b, trace, pre, self.world, index)
            if not v.ok:
                return v
        return None

    def _record(self, seed, index, start_token, verdict):
        record_seed = seed.clone(seed.txs[:index + 1], provenance=seed.provenance)
        rec = ExploitRecord(record_seed, "", verdict, self.iterations)
        if self.first_exploit_iteration is None:
            self.first_exploit_iteration = self.iterations
        sig = rec.signature()
        if sig in self._signatures:
            return
        self._signatures.add(sig)
        view = self.world.copy()
        view.restore(start_token)
        rec.initial_state = view.serialize()
        self.exploits.append(rec)
        log.info("violation %s at iteration %d", verdict.line(), self.iterations)


def fuzz_loop(program: ContractProgram, config: FuzzConfig = None, seeds=None) -> list:
    return Campaign(program, config, seeds=seeds).run()


# ------------------------------------------------------ exhaustive search

def enumerate_violations(program: ContractProgram, values=range(9), max_len: int = 3,
                         target_balance: int = 100, schedule: GasSchedule = DEFAULT_SCHEDULE) -> dict:
    """Every attacker sequence of at most ``max_len`` calls, with arguments
    and attached values drawn from ``values``, under every fallback variant,
    run from the freshly deployed world.

    Returns ``{(variant, ((fn, args, value), ...)): verdict}`` for the
    shortest violating prefixes.
    """
    attack_contract = atk.synthesize_attack_contract(program)
    world = build_world(program, attack_contract, target_balance)
    setup = world.snapshot()
    bindings = identify_bookkeeping(program, TARGET, world, schedule=schedule)
    if not bindings:
        return {}
    calls = []
    for fn in program.public_functions:
        g = gas_bounds(program, attack_contract, fn.name, fn.arity, schedule)[1]
        arg_sets = [()]
        for _ in fn.params:
            arg_sets = [a + (v,) for a in arg_sets for v in values]
        for args in arg_sets:
            for value in (values if fn.payable else (0,)):
                calls.append(TransactionSpec(ATTACKER, ATTACK, fn.name, args, value, g))
    found = {}

    def dfs(variant, prefix, live):
        if len(prefix) == max_len:
            return
        token = world.snapshot()
        binding_state = [set(b.participants) for b in live]
        for tx in calls:
            seq = prefix + [tx]
            body = attack_contract.fallback_body(variant, reenter_args(seq, len(seq) - 1, variant))
            _, trace = execute_transaction(world, tx, schedule, body)
            bad = None
            for b in live:
                v = check_transaction(b, trace, token, world, len(prefix))
                if not v.ok:
                    bad = v
                    break
            if bad is not None:
                found[(variant, tuple((t.function, t.args, t.value) for t in seq))] = bad
            else:
                dfs(variant, seq, live)
            world.restore(token)
            for b, parts in zip(live, binding_state):
                b.participants = set(parts)

    for variant in attack_contract.fallback_library:
        world.restore(setup)
        live = [rebind_baseline(b, world) for b in bindings]
        dfs(variant, [], live)
    return found


def normalize_exploit(record: ExploitRecord) -> tuple:
    seq = record.sequence
    return (seq.fallback_variant, tuple((t.function, t.args, t.value) for t in seq.txs))
