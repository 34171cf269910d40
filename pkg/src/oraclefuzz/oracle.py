"""Semantic test oracle: balance and transaction invariants over a
contract's bookkeeping mapping."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import minisol as ms
from .trace import Enter, FallbackEnter, InternalTransfer, StoreWrite, Wrap
from .vm import DEFAULT_SCHEDULE, TransactionSpec, WorldState, execute_transaction

OK = "ok"
BALANCE = "balance_violation"
TRANSACTION = "transaction_violation"

CLASSES = ("reentrancy", "exception_disorder", "gasless_send", "integer_wrap", "other")

PROBE_FUNDING = 10**8


@dataclass
class BookkeepingBinding:
    contract: int
    var: str
    baseline: int  # K = sum(m) - bal when bound
    participants: set = field(default_factory=set)

    def observe(self, trace) -> None:
        for ev in trace.events:
            if type(ev) is StoreWrite and ev.contract == self.contract and ev.var == self.var:
                self.participants.add(ev.key)

    def book_sum(self, world) -> int:
        mapping = world.storage[self.contract][self.var]
        self.participants.update(mapping)
        return sum(mapping.get(a, 0) for a in self.participants)


@dataclass
class OracleVerdict:
    outcome: str = OK
    classification: Optional[str] = None
    tx_index: int = 0
    sum_m: Optional[int] = None
    bal: Optional[int] = None
    baseline: Optional[int] = None
    recipient: Optional[int] = None
    dm: Optional[int] = None
    dbal: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.outcome == OK

    @property
    def kind(self) -> str:
        """``balance`` or ``transaction`` (the exploit-script spelling)."""
        return {BALANCE: "balance", TRANSACTION: "transaction"}.get(self.outcome, "none")

    def line(self) -> str:
        cls = self.classification or "none"
        if self.outcome == TRANSACTION:
            return (f"VERDICT tx={self.tx_index} outcome={self.outcome} "
                    f"r={self.recipient} dm={self.dm} dbal={self.dbal}")
        return (f"VERDICT tx={self.tx_index} outcome={self.outcome} class={cls} "
                f"sum_m={self.sum_m} bal={self.bal} K={self.baseline}")


@dataclass
class ProbePlan:
    probe_values: tuple = (0, 1, 2, 10**4, PROBE_FUNDING, None)  # None: 2^W - 1
    funding: int = PROBE_FUNDING

    def __post_init__(self):
        if len(self.probe_values) < 3:
            raise ValueError("need at least three probes")

    @property
    def probe_count(self) -> int:
        return len(self.probe_values)

    def values(self, width: int) -> list:
        top = (1 << width) - 1
        return [top if v is None else v for v in self.probe_values]


# ------------------------------------------------------- identification

def _written_mappings(program, fn, seen=None) -> set:
    seen = seen if seen is not None else set()
    if fn.name in seen:
        return set()
    seen.add(fn.name)
    out = set()

    def walk(stmts):
        for s in stmts:
            if isinstance(s, ms.Assign) and isinstance(s.target, ms.Index):
                out.add(s.target.name)
            if isinstance(s, ms.If):
                walk(s.then)
                walk(s.orelse or [])
    walk(fn.body)
    calls = set()
    ms._collect_calls(fn.body, calls)
    for name in calls:
        out |= _written_mappings(program, program.function(name), seen)
    return out


def identify_bookkeeping(program, address, world: WorldState, plan: ProbePlan = None,
                         schedule=DEFAULT_SCHEDULE) -> list:
    """Find mapping(address => uint) variables that track deposits.

    A candidate must be written by some payable function; each probe
    amount is then sent through those functions from a freshly funded
    account, each time from the same starting state.  The candidate is
    kept only if every committed probe raised the sender's entry by
    exactly the amount sent.  Probing runs on a copy of ``world``.
    """
    plan = plan or ProbePlan()
    scratch = world.copy()
    prober = scratch.create_account(plan.funding, "prober")
    base = scratch.snapshot()
    bindings = []
    for var in program.mapping_vars():
        writers = [f for f in program.payable_functions
                   if var.name in _written_mappings(program, f)]
        if not writers:
            continue
        committed, matched = 0, True
        for fn in writers:
            for amount in plan.values(world.width):
                scratch.restore(base)
                before = scratch.storage[address][var.name].get(prober, 0)
                gas = 10**7
                tx = TransactionSpec(prober, address, fn.name, (0,) * fn.arity, amount, gas)
                receipt, _ = execute_transaction(scratch, tx, schedule)
                if receipt.status != "committed":
                    continue
                committed += 1
                after = scratch.storage[address][var.name].get(prober, 0)
                if after - before != amount:
                    matched = False
                    break
            if not matched:
                break
        if matched and committed:
            bindings.append(bind(world, address, var.name))
    return bindings


def bind(world, address, var) -> BookkeepingBinding:
    mapping = world.storage[address][var]
    participants = set(mapping)
    total = sum(mapping.values())
    return BookkeepingBinding(address, var, total - world.balances[address], participants)


def rebind_baseline(binding: BookkeepingBinding, world) -> BookkeepingBinding:
    fresh = replace(binding, participants=set(binding.participants))
    fresh.baseline = fresh.book_sum(world) - world.balances[binding.contract]
    return fresh


# ------------------------------------------------------------- checking

def check_balance_invariant(binding: BookkeepingBinding, world, tx_index: int = 0) -> OracleVerdict:
    total = binding.book_sum(world)
    bal = world.balances[binding.contract]
    outcome = OK if total - bal == binding.baseline else BALANCE
    return OracleVerdict(outcome, None, tx_index, sum_m=total, bal=bal, baseline=binding.baseline)


def _signed_delta(post, pre, modulus):
    d = (post - pre) % modulus
    return d - modulus if d >= modulus // 2 else d


def check_transaction_invariant(trace, binding: BookkeepingBinding, pre_world, post_world,
                                tx_index: int = 0, modulus: int = 1 << 256) -> OracleVerdict:
    """Every recipient of an outgoing transfer attempt from the bound
    contract must see its bookkeeping change cancel the ether it actually
    kept.  Bookkeeping deltas are read as signed W-bit differences."""
    received = {}
    for ev in trace.events:
        if type(ev) is InternalTransfer and ev.sender == binding.contract:
            got = ev.amount if ev.success and not ev.reverted else 0
            received[ev.recipient] = received.get(ev.recipient, 0) + got
    pre_m = pre_world.storage[binding.contract][binding.var]
    post_m = post_world.storage[binding.contract][binding.var]
    for r, dbal in received.items():
        dm = _signed_delta(post_m.get(r, 0), pre_m.get(r, 0), modulus)
        if dm + dbal != 0:
            return OracleVerdict(TRANSACTION, None, tx_index, recipient=r, dm=dm, dbal=dbal)
    return OracleVerdict(OK, None, tx_index)


def _reentered(events, contract) -> bool:
    outer = None
    fallback_depth = None
    for ev in events:
        t = type(ev)
        if t is Enter and ev.contract == contract:
            if fallback_depth is not None and ev.depth > fallback_depth:
                return True
            if outer is None or ev.depth < outer:
                outer = ev.depth
        elif t is FallbackEnter and ev.contract != contract and outer is not None:
            if ev.depth > outer and (fallback_depth is None or ev.depth < fallback_depth):
                fallback_depth = ev.depth
    return False


def classify_violation(trace, verdict: OracleVerdict, binding: BookkeepingBinding,
                       stipend: int = 2300) -> str:
    """First matching rule wins: reentrancy, gasless send, exception
    disorder, integer wrap, other."""
    live = trace.live()
    if _reentered(live, binding.contract):
        return "reentrancy"
    absorbed = [ev for ev in trace.events
                if type(ev) is InternalTransfer and ev.sender == binding.contract
                and ev.failure is not None and ev.handler is not None
                and ev.handler.handled_as == "false_return" and not ev.handler.reverted]
    for ev in absorbed:
        if ev.kind == "send" and ev.gas_forwarded == stipend and ev.failure == "out_of_gas":
            return "gasless_send"
    if absorbed:
        return "exception_disorder"
    for ev in live:
        if type(ev) is Wrap and ev.var == binding.var:
            return "integer_wrap"
    return "other"


def check_transaction(binding, trace, pre_world, post_world, tx_index=0) -> OracleVerdict:
    """Both invariants after one transaction.

    The transaction invariant is reported first because it names the
    offending recipient; the balance invariant catches everything else.
    """
    binding.observe(trace)
    verdict = check_transaction_invariant(trace, binding, pre_world, post_world,
                                          tx_index, post_world.modulus)
    if verdict.ok:
        verdict = check_balance_invariant(binding, post_world, tx_index)
    else:
        bal_view = check_balance_invariant(binding, post_world, tx_index)
        verdict.sum_m, verdict.bal, verdict.baseline = bal_view.sum_m, bal_view.bal, bal_view.baseline
    if not verdict.ok:
        verdict.classification = classify_violation(trace, verdict, binding)
    return verdict
