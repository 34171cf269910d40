"""Oracle-guided grey-box fuzzing for MiniSol contracts."""

from .minisol import ContractProgram, parse_contract, parse_file
from .vm import GasSchedule, TransactionSpec, WorldState, deploy, execute_transaction
from .oracle import (BookkeepingBinding, OracleVerdict, ProbePlan, check_balance_invariant,
                     check_transaction_invariant, classify_violation, identify_bookkeeping,
                     rebind_baseline)
from .fuzzer import Campaign, FuzzConfig, fuzz_loop
from .corpus import list_corpus, load_contract

__version__ = "0.1.0"
