"""Feedback signals derived from execution traces: edge coverage,
cross-transaction data dependencies and the dynamic dictionary."""

from __future__ import annotations

from collections import OrderedDict

from .trace import Edge, Enter, StoreRead, StoreWrite

DICT_CAP = 256


def edge_coverage(trace) -> set:
    return {(e.fn, e.src, e.dst) for e in trace.events if type(e) is Edge}


class CoverageMap:
    def __init__(self, edges=()):
        self.edges = set(edges)

    def merge(self, edges) -> bool:
        new = set(edges) - self.edges
        self.edges |= new
        return bool(new)

    def __len__(self):
        return len(self.edges)


def is_new_edge_coverage(cov: CoverageMap, trace) -> bool:
    return cov.merge(edge_coverage(trace))


def _accesses(trace, contract):
    """(reads, writes) of state variables by ``contract`` that survived."""
    reads, writes = set(), set()
    for e in trace.events:
        if e.reverted:
            continue
        t = type(e)
        if t is StoreWrite and (contract is None or e.contract == contract):
            writes.add(e.var)
        elif t is StoreRead and (contract is None or e.contract == contract):
            reads.add(e.var)
    return reads, writes


def data_dependencies(traces, contract=None) -> set:
    """Flow dependencies between transactions of one sequence.

    ``(v, f_i, f_j)`` is emitted when transaction ``i`` (calling ``f_i``)
    writes ``v`` and a later transaction ``j`` reads it with no write to
    ``v`` in between.  Only the most recent writer counts.
    """
    deps = set()
    last_writer = {}
    for trace in traces:
        reads, writes = _accesses(trace, contract)
        for var in reads:
            if var in last_writer:
                deps.add((var, last_writer[var], trace.function))
        for var in writes:
            last_writer[var] = trace.function
    return deps


def dependency_pairs(traces, contract=None) -> list:
    """Index pairs ``(i, j, var)`` whose transactions share ``var`` with at
    least one of them writing it, in either order; used to pick swaps."""
    acc = [_accesses(t, contract) for t in traces]
    out = []
    for i in range(len(acc)):
        ri, wi = acc[i]
        for j in range(i + 1, len(acc)):
            rj, wj = acc[j]
            shared = (wi & (rj | wj)) | (ri & wj)
            for var in sorted(shared):
                out.append((i, j, var))
    return out


class DepCoverage:
    def __init__(self, deps=()):
        self.deps = set(deps)

    def merge(self, deps) -> bool:
        new = set(deps) - self.deps
        self.deps |= new
        return bool(new)

    def __len__(self):
        return len(self.deps)


def is_new_dep_coverage(cov: DepCoverage, traces, contract=None) -> bool:
    return cov.merge(data_dependencies(traces, contract))


class DynDictionary:
    """Insertion-ordered value set with FIFO eviction past ``cap``."""

    def __init__(self, cap: int = DICT_CAP):
        if cap < 1:
            raise ValueError("cap must be positive")
        self.cap = cap
        self._items = OrderedDict()

    def add(self, tag, value) -> bool:
        key = (tag, value)
        if key in self._items:
            return False
        self._items[key] = None
        while len(self._items) > self.cap:
            self._items.popitem(last=False)
        return True

    def update(self, entries) -> None:
        for tag, value in entries:
            self.add(tag, value)

    def clear(self):
        self._items.clear()

    @property
    def values(self) -> list:
        return list(self._items)

    def numbers(self, tag="uint") -> list:
        seen = []
        for t, v in self._items:
            if t == tag and v not in seen:
                seen.append(v)
        return seen

    def __contains__(self, value):
        return any(v == value for _, v in self._items)

    def __len__(self):
        return len(self._items)


def extract_dictionary_values(trace, world, contract) -> list:
    """Values worth remembering after ``trace``: the target's scalar
    state, every mapping entry the transaction touched (post-state), and
    the target's balance.  A trace that never reached the target yields
    nothing."""
    out = []
    touched = set()
    reached = False
    for e in trace.events:
        t = type(e)
        if t in (StoreWrite, StoreRead) and e.contract == contract:
            reached = True
            if e.key is not None:
                touched.add((e.var, e.key))
        elif t is Enter and e.contract == contract:
            reached = True
    if not reached:
        return []
    store = world.storage.get(contract, {})
    program = world.code.get(contract)
    types = {v.name: v.type for v in program.state_vars} if program else {}
    for name, val in store.items():
        if not isinstance(val, dict):
            out.append(("address" if types.get(name) == "address" else "uint", int(val)))
    for var, key in sorted(touched):
        out.append(("uint", store[var].get(key, 0)))
    if contract in world.balances:
        out.append(("uint", world.balances[contract]))
    return out
