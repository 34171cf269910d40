#!/usr/bin/env python3
"""Fuzz every corpus entry and print one summary line each.

    python3 scripts/run_corpus.py --seed 42 --max-iters 50000
"""
import argparse
import time

from oraclefuzz.corpus import list_corpus, load_contract
from oraclefuzz.fuzzer import Campaign, FuzzConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--max-iters", type=int, default=50_000)
    ap.add_argument("--feedback", default="full", choices=["full", "cfg_only"])
    ap.add_argument("--only", help="comma-separated entry names")
    args = ap.parse_args()

    keep = set(args.only.split(",")) if args.only else None
    print(f"{'entry':<28}{'label':<12}{'expected':<20}{'found':<40}{'first':>7}{'secs':>7}")
    for e in list_corpus():
        if keep and e.name not in keep:
            continue
        start = time.monotonic()
        c = Campaign(load_contract(e), FuzzConfig(seed=args.seed, max_iters=args.max_iters,
                                                  feedback=args.feedback))
        found = sorted({r.verdict.classification for r in c.run()})
        print(f"{e.name:<28}{e.label:<12}{e.expected_class or '-':<20}"
              f"{','.join(found) or '-':<40}{c.first_exploit_iteration or '-':>7}"
              f"{time.monotonic() - start:>7.1f}")


if __name__ == "__main__":
    main()
