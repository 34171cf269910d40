"""Execution trace events emitted by the interpreter, and their text dump."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(slots=True)
class Edge:
    fn: str
    src: int
    dst: int
    reverted: bool = False

    def dump(self):
        return f"EDGE {self.fn} {self.src} {self.dst}"


@dataclass(slots=True)
class StoreWrite:
    contract: int
    var: str
    key: Optional[int]
    old: int
    new: int
    reverted: bool = False

    def dump(self):
        return f"W {self.contract} {self.var} {_key(self.key)} {self.old} {self.new}"


@dataclass(slots=True)
class StoreRead:
    contract: int
    var: str
    key: Optional[int]
    value: int
    reverted: bool = False

    def dump(self):
        return f"R {self.contract} {self.var} {_key(self.key)} {self.value}"


@dataclass(slots=True)
class InternalTransfer:
    sender: int
    recipient: int
    amount: int
    success: bool
    kind: str  # send | transfer | callvalue
    gas_forwarded: int
    failure: Optional[str] = None  # exception kind that undid the transfer
    handler: Optional["ExceptionEvent"] = None  # how the caller absorbed it
    reverted: bool = False

    def dump(self):
        ok = 1 if self.success else 0
        return (f"XFER {self.sender} {self.recipient} {self.amount} {ok} "
                f"{self.kind} {self.gas_forwarded}")


@dataclass(slots=True)
class ExceptionEvent:
    kind: str  # out_of_gas | throw | require_fail
    handled_as: str  # false_return | revert
    reverted: bool = False

    def dump(self):
        return f"EXC {self.kind} {self.handled_as}"


@dataclass(slots=True)
class FallbackEnter:
    contract: int
    depth: int
    reverted: bool = False

    def dump(self):
        return f"FB {self.contract} {self.depth}"


@dataclass(slots=True)
class Enter:
    """Frame entry; not part of the coverage signals but needed to tell
    re-entry apart from sibling calls."""
    contract: int
    fn: str
    depth: int
    reverted: bool = False

    def dump(self):
        return f"ENTER {self.contract} {self.fn} {self.depth}"


@dataclass(slots=True)
class Wrap:
    op: str
    a: int
    b: int
    var: Optional[str] = None  # state variable receiving the wrapped result
    reverted: bool = False

    def dump(self):
        return f"WRAP {self.op} {self.a} {self.b}"


def _key(key):
    return "-" if key is None else str(key)


@dataclass
class ExecutionTrace:
    events: list = field(default_factory=list)
    function: str = ""
    status: str = ""

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def live(self):
        """Events that survived every enclosing revert."""
        return [e for e in self.events if not e.reverted]

    def max_depth(self) -> int:
        depths = [e.depth for e in self.events if isinstance(e, (Enter, FallbackEnter))]
        return max(depths, default=0)

    def fallback_entries(self, contract=None) -> list:
        return [e for e in self.events if isinstance(e, FallbackEnter)
                and (contract is None or e.contract == contract)]

    def dump(self) -> str:
        return "\n".join(e.dump() for e in self.events)


def dump_sequence(traces) -> str:
    lines = []
    for i, t in enumerate(traces):
        lines.append(f"TX {i} {t.function} {t.status}")
        lines.extend(e.dump() for e in t.events)
    return "\n".join(lines)
