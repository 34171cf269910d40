import os

import pytest

from oraclefuzz import minisol as ms
from oraclefuzz.corpus import corpus_dir

CORPUS = corpus_dir()


def corpus_path(name):
    return os.path.join(CORPUS, name if name.endswith(".msol") else name + ".msol")


def load(name):
    return ms.parse_file(corpus_path(name))


@pytest.fixture
def dao():
    return load("simple_dao")


@pytest.fixture(scope="session")
def all_programs():
    from oraclefuzz.corpus import list_corpus, decoys, load_contract
    return [load_contract(e) for e in list_corpus()] + [load_contract(d) for d in decoys()]


class Rig:
    """Campaign-style world (attacker, bystander, owner, target, attack
    contract) with the oracle bound, for driving transactions by hand."""

    def __init__(self, program, balance=100, width=256):
        from oraclefuzz import attack as atk
        from oraclefuzz.fuzzer import TARGET, build_world
        from oraclefuzz.oracle import identify_bookkeeping
        self.program = program
        self.attack = atk.synthesize_attack_contract(program)
        self.world = build_world(program, self.attack, balance, width=width)
        self.bindings = identify_bookkeeping(program, TARGET, self.world)
        self.txs = []

    def send(self, fn, args=(), value=0, variant="empty", sender=None, gas=200_000):
        from oraclefuzz.fuzzer import ATTACKER, reenter_args, route
        from oraclefuzz.oracle import OracleVerdict, check_transaction
        from oraclefuzz.vm import TransactionSpec, execute_transaction
        sender = ATTACKER if sender is None else sender
        tx = TransactionSpec(sender, route(self.world, sender, fn), fn, tuple(args), value, gas)
        self.txs.append(tx)
        body = self.attack.fallback_body(variant, reenter_args(self.txs, len(self.txs) - 1, variant))
        pre = self.world.snapshot()
        receipt, trace = execute_transaction(self.world, tx, attacker_fallback=body)
        verdict = OracleVerdict(tx_index=len(self.txs) - 1)
        for b in self.bindings:
            verdict = check_transaction(b, trace, pre, self.world, len(self.txs) - 1)
            if not verdict.ok:
                break
        return receipt, trace, verdict


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail=""):
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
