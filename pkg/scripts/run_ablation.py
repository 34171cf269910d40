#!/usr/bin/env python3
"""Full feedback vs. control-flow-only feedback on a few corpus targets.

Thin wrapper over ``oraclefuzz eval`` with the acceptance settings
(8 repeats, seeds from 1000, iterations-to-first-exploit).
"""
import argparse
import sys

from oraclefuzz import cli
from oraclefuzz.corpus import corpus_dir


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--targets", default="simple_dao,gasless_send,underflow")
    ap.add_argument("--repeats", type=int, default=8)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--timeout", type=int, default=50_000, help="iterations per campaign")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    return cli.main(["eval", "--contracts", corpus_dir(), "--only", args.targets,
                     "--repeats", str(args.repeats), "--seed", str(args.seed),
                     "--timeout", str(args.timeout), "--jobs", str(args.jobs)])


if __name__ == "__main__":
    sys.exit(main())
