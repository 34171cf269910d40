"""Deterministic MiniSol interpreter with gas metering and value transfers.

Exception semantics follow the two EVM mechanisms: a failure inside a
``send``/``call.value`` callee reverts the callee and the call evaluates to
false; a failure anywhere else (including inside ``transfer`` and direct
internal calls) unwinds to the nearest such boundary, or to the transaction.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from typing import Optional

from . import minisol as ms
from .minisol import FALLBACK, ContractProgram, FunctionDef
from .trace import (Edge, Enter, ExceptionEvent, ExecutionTrace, FallbackEnter,
                    InternalTransfer, StoreRead, StoreWrite, Wrap)

DEFAULT_WIDTH = 256
SEND_STIPEND = 2300


class VMError(Exception):
    """Malformed request: unknown target or function, exhausted namespace."""


class StaleTokenError(VMError):
    pass


@dataclass(frozen=True)
class GasSchedule:
    per_statement_cost: int = 100
    send_stipend: int = SEND_STIPEND
    intrinsic_base: int = 1000
    intrinsic_per_arg: int = 50
    call_retention: int = 2000

    def __post_init__(self):
        if self.send_stipend != SEND_STIPEND:
            raise ValueError("send stipend is fixed at 2300")

    def intrinsic(self, nargs: int) -> int:
        return self.intrinsic_base + self.intrinsic_per_arg * nargs


DEFAULT_SCHEDULE = GasSchedule()


@dataclass(frozen=True)
class TransactionSpec:
    sender: int
    target: int
    function: str
    args: tuple = ()
    value: int = 0
    gas_limit: int = 100_000

    def __post_init__(self):
        if self.gas_limit < 0:
            raise ValueError("gas_limit must be non-negative")
        if self.value < 0:
            raise ValueError("value must be non-negative")
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    def with_(self, **changes) -> "TransactionSpec":
        return replace(self, **changes)


@dataclass
class Receipt:
    status: str  # committed | reverted | failed_precondition
    gas_used: int
    toplevel_return: Optional[int] = None


@dataclass(frozen=True)
class StateToken:
    layout: tuple
    balances: dict
    storage: dict


def _copy_storage(storage):
    return {a: {k: (dict(v) if isinstance(v, dict) else v) for k, v in s.items()}
            for a, s in storage.items()}


class WorldState:
    """Balances and per-contract storage over a small integer namespace."""

    def __init__(self, width: int = DEFAULT_WIDTH, capacity: int = 64):
        if not 8 <= width <= 4096:
            raise ValueError("width out of range")
        self.width = width
        self.modulus = 1 << width
        self.capacity = capacity
        self.balances: dict = {}
        self.storage: dict = {}
        self.code: dict = {}
        self.labels: dict = {}
        self.attack_address: Optional[int] = None

    def _fresh(self) -> int:
        addr = len(self.balances)
        if addr >= self.capacity:
            raise VMError("address space exhausted")
        return addr

    def create_account(self, balance: int = 0, label: str = "") -> int:
        addr = self._fresh()
        self.balances[addr] = balance % self.modulus
        self.labels[addr] = label or f"user{addr}"
        return addr

    def is_contract(self, addr) -> bool:
        return addr in self.code

    def accounts(self) -> list:
        return sorted(self.balances)

    def total_balance(self) -> int:
        return sum(self.balances.values())

    # state dump -------------------------------------------------------

    def serialize(self) -> str:
        lines = []
        for addr in sorted(self.balances):
            lines.append(f"addr={addr} bal={self.balances[addr]}")
        for addr, store in self.storage.items():
            for name, val in store.items():
                if isinstance(val, dict):
                    for key, v in val.items():
                        if v:
                            lines.append(f"addr={addr} var={name}[{key}]={v}")
                else:
                    lines.append(f"addr={addr} var={name}={val}")
        lines.sort()
        return "\n".join(lines)

    def load_serialized(self, text: str) -> None:
        """Overwrite balances and storage of already-deployed addresses."""
        balances = {}
        storage = {a: {k: ({} if isinstance(v, dict) else 0) for k, v in s.items()}
                   for a, s in self.storage.items()}
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            addr_part, rest = line.split(" ", 1)
            addr = int(addr_part[len("addr="):])
            if rest.startswith("bal="):
                balances[addr] = int(rest[4:])
                continue
            if not rest.startswith("var="):
                raise ValueError(f"bad state line: {raw!r}")
            lhs, val = rest[4:].rsplit("=", 1)
            if addr not in storage:
                raise ValueError(f"state line for unknown contract {addr}")
            if lhs.endswith("]"):
                name, key = lhs[:-1].split("[")
                storage[addr][name][int(key)] = int(val)
            else:
                storage[addr][lhs] = int(val)
        if set(balances) != set(self.balances):
            raise ValueError("state block does not match the account layout")
        self.balances = balances
        self.storage = storage

    # snapshots --------------------------------------------------------

    def layout(self) -> tuple:
        return tuple(sorted((a, p.name) for a, p in self.code.items())) + (len(self.balances),)

    def snapshot(self) -> StateToken:
        return StateToken(self.layout(), dict(self.balances), _copy_storage(self.storage))

    def restore(self, token: StateToken) -> None:
        if token.layout != self.layout():
            raise StaleTokenError("snapshot taken under a different deployment layout")
        self.balances = dict(token.balances)
        self.storage = _copy_storage(token.storage)

    def copy(self) -> "WorldState":
        other = WorldState(self.width, self.capacity)
        other.balances = dict(self.balances)
        other.storage = _copy_storage(self.storage)
        other.code = dict(self.code)
        other.labels = dict(self.labels)
        other.attack_address = self.attack_address
        return other


def snapshot(world: WorldState) -> StateToken:
    return world.snapshot()


def restore(world: WorldState, token: StateToken) -> None:
    world.restore(token)


def deploy(world: WorldState, program: ContractProgram, initial_balance: int = 0,
           deployer: Optional[int] = None, init: Optional[dict] = None,
           attack: bool = False) -> int:
    """Deploy ``program`` at a fresh address.

    State variables start at zero unless they carry an initialiser, which is
    evaluated with ``msg.sender`` bound to ``deployer``; ``init`` overrides
    both.
    """
    addr = world._fresh()
    world.balances[addr] = initial_balance % world.modulus
    world.code[addr] = program
    world.labels[addr] = program.name
    store = {}
    for v in program.state_vars:
        store[v.name] = {} if v.type == "mapping" else 0
    world.storage[addr] = store
    ex = _Executor(world, DEFAULT_SCHEDULE, None)
    frame = _Frame(addr, program, deployer if deployer is not None else addr, 0, 10**9, 1)
    for v in program.state_vars:
        if v.init is not None:
            store[v.name] = int(ex.eval(frame, _Ctx(program.name, {}), v.init))
    for name, value in (init or {}).items():
        if name not in store or isinstance(store[name], dict):
            raise VMError(f"cannot initialise {name!r}")
        store[name] = value % world.modulus
    if attack:
        world.attack_address = addr
    return addr


# ----------------------------------------------------------- execution

class _Abort(Exception):
    def __init__(self, kind):
        self.kind = kind


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Frame:
    __slots__ = ("address", "program", "sender", "value", "gas_limit", "gas_used", "depth")

    def __init__(self, address, program, sender, value, gas_limit, depth):
        self.address = address
        self.program = program
        self.sender = sender
        self.value = value
        self.gas_limit = gas_limit
        self.gas_used = 0
        self.depth = depth

    @property
    def remaining(self):
        return self.gas_limit - self.gas_used


class _Ctx:
    """Per-activation state: locals and the current basic block."""
    __slots__ = ("fn", "env", "block")

    def __init__(self, fn, env):
        self.fn = fn
        self.env = env
        self.block = 0


_FALLBACK_CACHE: dict = {}


def _as_fallback(stmts) -> FunctionDef:
    if isinstance(stmts, FunctionDef):
        return stmts
    key = id(stmts)
    hit = _FALLBACK_CACHE.get(key)
    if hit is not None and hit[0] is stmts:
        return hit[1]
    fn = FunctionDef(FALLBACK, [], True, list(stmts))
    ms.assign_blocks(fn)
    _FALLBACK_CACHE[key] = (stmts, fn)
    return fn


class _Executor:
    def __init__(self, world: WorldState, schedule: GasSchedule, attacker_fallback):
        self.world = world
        self.schedule = schedule
        self.mod = world.modulus
        self.events: list = []
        self.attacker_fallback = (_as_fallback(attacker_fallback)
                                  if attacker_fallback is not None else None)
        self.assign_var = None

    # gas ---------------------------------------------------------------

    def charge(self, frame):
        frame.gas_used += self.schedule.per_statement_cost
        if frame.gas_used > frame.gas_limit:
            frame.gas_used = frame.gas_limit
            raise _Abort("out_of_gas")

    # frames ------------------------------------------------------------

    def resolve(self, address, fname) -> FunctionDef:
        program = self.world.code[address]
        if fname == FALLBACK:
            if address == self.world.attack_address and self.attacker_fallback is not None:
                return self.attacker_fallback
            return program.function(FALLBACK)
        return program.function(fname)

    def run_frame(self, frame: _Frame, fn: FunctionDef, args):
        qual = f"{frame.program.name}.{fn.name}"
        self.events.append(Enter(frame.address, fn.name, frame.depth))
        if fn.name == FALLBACK:
            self.events.append(FallbackEnter(frame.address, frame.depth))
        return self.invoke(frame, fn, qual, args)

    def invoke(self, frame, fn, qual, args):
        ctx = _Ctx(qual, {p.name: a for p, a in zip(fn.params, args)})
        try:
            self.block(frame, ctx, fn.body)
        except _Return as r:
            return r.value
        return None

    def snapshot_world(self):
        w = self.world
        return dict(w.balances), _copy_storage(w.storage), len(self.events)

    def rollback(self, snap):
        balances, storage, mark = snap
        self.world.balances = balances
        self.world.storage = storage
        for ev in self.events[mark:]:
            ev.reverted = True
            if type(ev) is InternalTransfer:
                ev.success = False

    def message_call(self, frame, to, amount, kind, fname=None, args=()):
        """Value-bearing call from ``frame`` to ``to``; returns success."""
        world = self.world
        sched = self.schedule
        if kind == "callvalue":
            forwarded = max(0, frame.remaining - sched.call_retention)
        else:
            forwarded = min(sched.send_stipend, frame.remaining)
        snap = self.snapshot_world()
        xfer = InternalTransfer(frame.address, to, amount, True, kind, forwarded)
        self.events.append(xfer)
        failure = None
        if to not in world.balances:
            failure = "throw"
        elif world.balances[frame.address] < amount:
            failure = "throw"
        else:
            world.balances[frame.address] -= amount
            world.balances[to] = (world.balances[to] + amount) % self.mod
            if to in world.code:
                try:
                    fn = self.resolve(to, fname if fname is not None else FALLBACK)
                except KeyError:
                    fn = None
                if fn is None or fn.private or (amount and not fn.payable):
                    failure = "throw"
                elif len(args) != len(fn.params):
                    failure = "throw"
                else:
                    callee = _Frame(to, world.code[to], frame.address, amount,
                                    forwarded, frame.depth + 1)
                    try:
                        self.run_frame(callee, fn, [a % self.mod for a in args])
                    except _Abort as exc:
                        failure = exc.kind
                    frame.gas_used += callee.gas_used
        if failure is None:
            return True
        self.rollback(snap)
        xfer.failure = failure
        handled = ExceptionEvent(failure, "revert" if kind == "transfer" else "false_return")
        xfer.handler = handled
        self.events.append(handled)
        if kind == "transfer":
            raise _Abort(failure)
        return False

    # statements --------------------------------------------------------

    def block(self, frame, ctx, stmts):
        for s in stmts:
            self.charge(frame)
            t = type(s)
            if t is ms.Assign:
                self.assign(frame, ctx, s)
            elif t is ms.If:
                if self.eval(frame, ctx, s.cond):
                    target, body = s.then_block, s.then
                elif s.orelse is not None:
                    target, body = s.else_block, s.orelse
                else:
                    target, body = s.join_block, None
                self.events.append(Edge(ctx.fn, ctx.block, target))
                ctx.block = target
                if body is not None:
                    self.block(frame, ctx, body)
                    self.events.append(Edge(ctx.fn, ctx.block, s.join_block))
                    ctx.block = s.join_block
            elif t is ms.ExprStmt:
                self.eval(frame, ctx, s.expr)
            elif t is ms.Require:
                if not self.eval(frame, ctx, s.cond):
                    raise _Abort("require_fail")
            elif t is ms.LocalDecl:
                ctx.env[s.name] = self.eval(frame, ctx, s.value)
            elif t is ms.Throw:
                raise _Abort("throw")
            elif t is ms.Return:
                raise _Return(None if s.value is None else self.eval(frame, ctx, s.value))
            elif t is ms.Skip:
                pass
            else:  # pragma: no cover - parser guarantees the node set
                raise VMError(f"unknown statement {t.__name__}")

    def assign(self, frame, ctx, s):
        target = s.target
        store = self.world.storage[frame.address]
        if type(target) is ms.Index:
            var = target.name
            key = self.eval(frame, ctx, target.key)
            mapping = store[var]
            self.assign_var = var
            if s.op == "=":
                new = self.eval(frame, ctx, s.value)
                old = mapping.get(key, 0)
            else:
                old = mapping.get(key, 0)
                self.events.append(StoreRead(frame.address, var, key, old))
                new = self.arith(s.op[0], old, self.eval(frame, ctx, s.value))
            self.assign_var = None
            new = int(new)
            mapping[key] = new
            self.events.append(StoreWrite(frame.address, var, key, old, new))
            return
        name = target.name
        if target.scope == "state":
            self.assign_var = name
            old = store[name]
            if s.op == "=":
                new = self.eval(frame, ctx, s.value)
            else:
                self.events.append(StoreRead(frame.address, name, None, old))
                new = self.arith(s.op[0], old, self.eval(frame, ctx, s.value))
            self.assign_var = None
            new = int(new)
            store[name] = new
            self.events.append(StoreWrite(frame.address, name, None, old, new))
        else:
            if s.op == "=":
                ctx.env[name] = self.eval(frame, ctx, s.value)
            else:
                ctx.env[name] = self.arith(s.op[0], ctx.env[name], self.eval(frame, ctx, s.value))

    def arith(self, op, a, b):
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        else:
            r = a * b
        if r < 0 or r >= self.mod:
            self.events.append(Wrap(op, a, b, self.assign_var))
            r %= self.mod
        return r

    # expressions -------------------------------------------------------

    def eval(self, frame, ctx, e):
        t = type(e)
        if t is ms.Num:
            return e.value % self.mod
        if t is ms.Name:
            if e.scope == "state":
                v = self.world.storage[frame.address][e.name]
                self.events.append(StoreRead(frame.address, e.name, None, v))
                return v
            return ctx.env[e.name]
        if t is ms.Index:
            key = self.eval(frame, ctx, e.key)
            v = self.world.storage[frame.address][e.name].get(key, 0)
            self.events.append(StoreRead(frame.address, e.name, key, v))
            return v
        if t is ms.Binary:
            op = e.op
            if op == "&&":
                return bool(self.eval(frame, ctx, e.left)) and bool(self.eval(frame, ctx, e.right))
            if op == "||":
                return bool(self.eval(frame, ctx, e.left)) or bool(self.eval(frame, ctx, e.right))
            a = self.eval(frame, ctx, e.left)
            b = self.eval(frame, ctx, e.right)
            if op in ("+", "-", "*"):
                return self.arith(op, a, b)
            if op == "==":
                return a == b
            if op == "!=":
                return a != b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            return a >= b
        if t is ms.MsgSender:
            return frame.sender
        if t is ms.MsgValue:
            return frame.value
        if t is ms.ThisBalance:
            return self.world.balances[frame.address]
        if t is ms.This:
            return frame.address
        if t is ms.BoolLit:
            return e.value
        if t is ms.Unary:
            return not self.eval(frame, ctx, e.operand)
        if t is ms.Send:
            to = self.eval(frame, ctx, e.to)
            return self.message_call(frame, to, self.eval(frame, ctx, e.amount), "send")
        if t is ms.Transfer:
            to = self.eval(frame, ctx, e.to)
            self.message_call(frame, to, self.eval(frame, ctx, e.amount), "transfer")
            return None
        if t is ms.CallValue:
            to = self.eval(frame, ctx, e.to)
            amount = self.eval(frame, ctx, e.amount)
            args = [self.eval(frame, ctx, a) for a in e.args]
            return self.message_call(frame, to, amount, "callvalue", e.function, args)
        if t is ms.InternalCall:
            fn = frame.program.function(e.function)
            args = [self.eval(frame, ctx, a) for a in e.args]
            saved = self.assign_var
            self.assign_var = None
            result = self.invoke(frame, fn, f"{frame.program.name}.{fn.name}", args)
            self.assign_var = saved
            return result
        raise VMError(f"unknown expression {t.__name__}")  # pragma: no cover


def execute_transaction(world: WorldState, tx: TransactionSpec,
                        schedule: GasSchedule = DEFAULT_SCHEDULE,
                        attacker_fallback=None) -> tuple:
    """Run one external transaction; returns ``(Receipt, ExecutionTrace)``.

    ``attacker_fallback`` (a statement list) replaces the fallback body of
    the world's attack contract for this transaction.
    """
    if tx.target not in world.code:
        raise VMError(f"no contract deployed at {tx.target}")
    if tx.sender not in world.balances:
        raise VMError(f"unknown sender {tx.sender}")
    program = world.code[tx.target]
    ex = _Executor(world, schedule, attacker_fallback)
    try:
        fn = ex.resolve(tx.target, tx.function)
    except KeyError:
        raise VMError(f"unknown function {tx.function!r} on {program.name}") from None
    if fn.private:
        raise VMError(f"function {tx.function!r} is private")
    if len(tx.args) != len(fn.params):
        raise VMError(f"{tx.function} expects {len(fn.params)} arguments")
    trace = ExecutionTrace(function=tx.function)
    intrinsic = schedule.intrinsic(len(tx.args))
    value = tx.value
    if (tx.gas_limit < intrinsic or value > world.balances[tx.sender]
            or (value and not fn.payable)):
        trace.status = "failed_precondition"
        return Receipt("failed_precondition", 0), trace
    if sys.getrecursionlimit() < 20000:
        sys.setrecursionlimit(20000)
    snap = ex.snapshot_world()
    world.balances[tx.sender] -= value
    world.balances[tx.target] = (world.balances[tx.target] + value) % world.modulus
    frame = _Frame(tx.target, program, tx.sender, value, tx.gas_limit - intrinsic, 1)
    status, ret = "committed", None
    try:
        ret = ex.run_frame(frame, fn, [a % world.modulus for a in tx.args])
    except _Abort as exc:
        ex.rollback(snap)
        ex.events.append(ExceptionEvent(exc.kind, "revert"))
        status = "reverted"
    if isinstance(ret, bool):
        ret = int(ret)
    trace.events = ex.events
    trace.status = status
    return Receipt(status, intrinsic + frame.gas_used, ret), trace


REENTRY_ALLOWANCE = 8


def estimate_gas_bounds(program: ContractProgram, function: str, args=(),
                        schedule: GasSchedule = DEFAULT_SCHEDULE,
                        fallback_lengths=(), reentry_allowance: int = REENTRY_ALLOWANCE) -> tuple:
    """Return ``(G_i, G_t)`` for calling ``function`` with ``args``.

    ``fallback_lengths`` lists statement counts of other fallbacks that may
    run during the call (the attacker's library); the longest of those and
    the program's own fallback is charged ``reentry_allowance`` times.
    """
    if function != FALLBACK and not program.has_function(function):
        raise VMError(f"unknown function {function!r} on {program.name}")
    fn = program.function(function)
    g_i = schedule.intrinsic(len(args))
    own = ms.count_statements(program.fallback.body) if program.fallback else 0
    longest = max([own, *fallback_lengths])
    body = ms.static_statement_bound(program, fn)
    return g_i, g_i + schedule.per_statement_cost * (body + reentry_allowance * longest)
