"""Attack-contract synthesis: surrogate entry points plus a fallback library."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from . import minisol as ms
from .minisol import ContractProgram

EMPTY = "empty"
THROW = "throw"
GAS_BOMB = "gas-bomb"
GAS_BOMB_STATEMENTS = 30
REENTER_PREFIX = "reenter-"


def reenter(fn_name: str) -> str:
    return REENTER_PREFIX + fn_name


@dataclass
class AttackContract:
    target_name: str
    program: ContractProgram
    surrogates: list
    fallback_library: list
    arities: dict = field(default_factory=dict)

    def fallback_body(self, variant: str, args=()) -> list:
        """Statement list for ``variant``.

        Re-entry variants call the named target function with ``args``
        (zeros when not given) and attach no value.
        """
        if variant not in self.fallback_library:
            raise KeyError(f"unknown fallback variant {variant!r}")
        if variant.startswith(REENTER_PREFIX):
            fn = variant[len(REENTER_PREFIX):]
            arity = self.arities[fn]
            args = tuple(args)[:arity] + (0,) * max(0, arity - len(args))
            return _fallback_statements(variant, args)
        return _fallback_statements(variant, ())


def _body_source(variant: str, args: tuple) -> str:
    if variant == EMPTY:
        return ""
    if variant == THROW:
        return "throw;"
    if variant == GAS_BOMB:
        return " ".join(["skip;"] * GAS_BOMB_STATEMENTS)
    fn = variant[len(REENTER_PREFIX):]
    call_args = "".join(f", {a}" for a in args)
    return f'target.call.value(0)("{fn}"{call_args});'


@lru_cache(maxsize=4096)
def _fallback_statements(variant: str, args: tuple) -> list:
    src = f"contract F {{ address target; function() payable {{ {_body_source(variant, args)} }} }}"
    return ms.parse_contract(src).fallback.body


def variant_length(variant: str) -> int:
    if variant == GAS_BOMB:
        return GAS_BOMB_STATEMENTS
    if variant == EMPTY:
        return 0
    return 1


def synthesize_attack_contract(program: ContractProgram) -> AttackContract:
    """Build the attacker for ``program``.

    Each public target function gets a payable surrogate of the same name
    that forwards its arguments and attached value through
    ``target.call.value``; a failed forward reverts the surrogate.
    """
    lines = [f"contract Attack_{program.name} {{", "  address target;"]
    surrogates = []
    arities = {}
    for fn in program.public_functions:
        params = ", ".join(f"{p.type} p{i}" for i, p in enumerate(fn.params))
        fwd = "".join(f", p{i}" for i in range(len(fn.params)))
        lines.append(f"  function {fn.name}({params}) payable {{")
        lines.append(f'    require(target.call.value(msg.value)("{fn.name}"{fwd}));')
        lines.append("  }")
        surrogates.append(fn.name)
        arities[fn.name] = len(fn.params)
    lines.append("  function() payable { }")
    lines.append("}")
    attack_program = ms.parse_contract("\n".join(lines) + "\n")
    library = [EMPTY, THROW] + [reenter(name) for name in surrogates] + [GAS_BOMB]
    return AttackContract(program.name, attack_program, surrogates, library, arities)
