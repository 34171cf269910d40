#!/usr/bin/env python3
"""Exhaustively enumerate short attacker sequences against corpus entries
and report how many violate the oracle."""
import argparse
import time
from collections import Counter

from oraclefuzz.corpus import list_corpus, load_contract
from oraclefuzz.fuzzer import enumerate_violations


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-len", type=int, default=3)
    ap.add_argument("--max-value", type=int, default=8, help="args and values range over 0..N")
    ap.add_argument("--only", help="comma-separated entry names")
    ap.add_argument("--show", type=int, default=3, help="example violations to print")
    args = ap.parse_args()

    keep = set(args.only.split(",")) if args.only else None
    for e in list_corpus():
        if keep and e.name not in keep:
            continue
        start = time.monotonic()
        found = enumerate_violations(load_contract(e), range(args.max_value + 1), args.max_len)
        classes = Counter(v.classification for v in found.values())
        print(f"{e.name} ({e.label}): {len(found)} violating prefixes {dict(classes)} "
              f"in {time.monotonic() - start:.1f}s")
        for (variant, seq), verdict in sorted(found.items(), key=lambda kv: len(kv[0][1]))[:args.show]:
            calls = " -> ".join(f"{fn}({','.join(map(str, a))})" + (f"+{v}" if v else "")
                                for fn, a, v in seq)
            print(f"  [{variant}] {calls}: {verdict.outcome} {verdict.classification}")


if __name__ == "__main__":
    main()
