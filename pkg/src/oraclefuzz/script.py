"""Exploit scripts (``exploit-script v1``): writing, parsing and replay."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from . import attack as atk
from .fuzzer import TARGET, build_world, reenter_args, route
from .minisol import parse_file
from .oracle import OracleVerdict, check_transaction, identify_bookkeeping, rebind_baseline
from .vm import DEFAULT_SCHEDULE, TransactionSpec, execute_transaction

HEADER = "exploit-script v1"


class ScriptError(ValueError):
    pass


@dataclass
class ScriptTx:
    sender: int
    function: str
    args: tuple = ()
    value: int = 0
    gas: int = 100_000

    def line(self) -> str:
        args = ",".join(str(a) for a in self.args)
        return (f"tx sender={self.sender} func={self.function} args={args} "
                f"value={self.value} gas={self.gas}")


@dataclass
class ExploitScript:
    target: str = ""
    balance: int = 100
    fallback: str = atk.EMPTY
    state: Optional[str] = None
    txs: list = field(default_factory=list)
    expect: Optional[tuple] = None  # (kind, class, index)

    def render(self) -> str:
        lines = [HEADER, f"target {self.target} balance {self.balance}",
                 f"attacker fallback {self.fallback}"]
        if self.state is not None:
            lines.append("state")
            lines += ["  " + s for s in self.state.splitlines()]
        lines += [t.line() for t in self.txs]
        if self.expect is not None:
            kind, cls, at = self.expect
            lines.append(f"expect violation={kind} class={cls} at={at}")
        return "\n".join(lines) + "\n"


def from_record(record, target_file: str, balance: int) -> ExploitScript:
    seq = record.sequence
    txs = [ScriptTx(t.sender, t.function, t.args, t.value, t.gas_limit) for t in seq.txs]
    v = record.verdict
    return ExploitScript(target_file, balance, seq.fallback_variant, record.initial_state,
                         txs, (v.kind, v.classification, v.tx_index))


def _kv(fields, line):
    out = {}
    for item in fields:
        if "=" not in item:
            raise ScriptError(f"expected key=value in {line!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _int(text, line):
    try:
        return int(text)
    except ValueError:
        raise ScriptError(f"bad number {text!r} in {line!r}") from None


def parse_script(text: str, require_header: bool = True) -> ExploitScript:
    lines = text.splitlines()
    script = ExploitScript()
    if not lines or not any(l.strip() for l in lines):
        if require_header:
            raise ScriptError("empty script")
        return script
    if lines[0].strip() != HEADER:
        raise ScriptError(f"missing {HEADER!r} header")
    i = 1
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        head = parts[0]
        if head == "target":
            if len(parts) != 4 or parts[2] != "balance":
                raise ScriptError(f"bad target line {line!r}")
            script.target, script.balance = parts[1], _int(parts[3], line)
        elif head == "attacker":
            if len(parts) != 3 or parts[1] != "fallback":
                raise ScriptError(f"bad fallback line {line!r}")
            script.fallback = parts[2]
        elif head == "state":
            block = []
            while i < len(lines) and lines[i].startswith((" ", "\t")):
                block.append(lines[i].strip())
                i += 1
            script.state = "\n".join(block)
        elif head == "tx":
            kv = _kv(parts[1:], line)
            missing = {"sender", "func", "args", "value", "gas"} - set(kv)
            if missing:
                raise ScriptError(f"tx line lacks {sorted(missing)}")
            args = tuple(_int(a, line) for a in kv["args"].split(",") if a)
            script.txs.append(ScriptTx(_int(kv["sender"], line), kv["func"], args,
                                       _int(kv["value"], line), _int(kv["gas"], line)))
        elif head == "expect":
            kv = _kv(parts[1:], line)
            try:
                script.expect = (kv["violation"], kv["class"], _int(kv["at"], line))
            except KeyError as exc:
                raise ScriptError(f"expect line lacks {exc}") from None
        else:
            raise ScriptError(f"unknown directive {head!r}")
    return script


def resolve_target(path: str, script_path: Optional[str] = None, corpus_dir: Optional[str] = None) -> str:
    candidates = [path]
    if script_path:
        candidates.append(os.path.join(os.path.dirname(os.path.abspath(script_path)), path))
    if corpus_dir:
        candidates.append(os.path.join(corpus_dir, os.path.basename(path)))
    for c in candidates:
        if os.path.isfile(c):
            return c
    raise FileNotFoundError(path)


@dataclass
class ReplayResult:
    verdicts: list
    first: Optional[object]

    def observed(self) -> Optional[tuple]:
        if self.first is None:
            return None
        return (self.first.kind, self.first.classification, self.first.tx_index)


def execute_script(program, script: ExploitScript, width: int = 256,
                   schedule=DEFAULT_SCHEDULE, stop_at_violation: bool = True,
                   rebind_after_violation: bool = False) -> ReplayResult:
    """Run ``script`` against ``program`` from the scripted state.

    The oracle binding is identified on the freshly deployed world and its
    baseline taken from the scripted starting state.
    """
    attack_contract = atk.synthesize_attack_contract(program)
    if script.fallback not in attack_contract.fallback_library:
        raise ScriptError(f"unknown fallback variant {script.fallback!r}")
    world = build_world(program, attack_contract, script.balance, width=width)
    bindings = identify_bookkeeping(program, TARGET, world, schedule=schedule)
    if script.state is not None:
        try:
            world.load_serialized(script.state)
        except ValueError as exc:
            raise ScriptError(str(exc)) from None
    bindings = [rebind_baseline(b, world) for b in bindings]
    specs = []
    for t in script.txs:
        target = route(world, t.sender, t.function)
        specs.append(TransactionSpec(t.sender, target, t.function, t.args, t.value, t.gas))
    verdicts, first = [], None
    for i, tx in enumerate(specs):
        body = attack_contract.fallback_body(script.fallback, reenter_args(specs, i, script.fallback))
        pre = world.snapshot()
        _, trace = execute_transaction(world, tx, schedule, body)
        verdict = None
        for b in bindings:
            verdict = check_transaction(b, trace, pre, world, i)
            if not verdict.ok:
                break
        if verdict is None:
            verdict = OracleVerdict(tx_index=i)
        verdicts.append(verdict)
        if not verdict.ok:
            if first is None:
                first = verdict
            if stop_at_violation:
                break
            if rebind_after_violation:
                bindings = [rebind_baseline(b, world) for b in bindings]
    return ReplayResult(verdicts, first)


def replay(script_path: str, corpus_dir: Optional[str] = None, width: int = 256) -> tuple:
    """Returns ``(reproduced, ReplayResult, ExploitScript)``."""
    with open(script_path) as fh:
        script = parse_script(fh.read())
    if script.expect is None:
        raise ScriptError("script has no expect line")
    program = parse_file(resolve_target(script.target, script_path, corpus_dir))
    result = execute_script(program, script, width)
    return result.observed() == script.expect, result, script
