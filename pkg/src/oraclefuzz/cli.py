"""Command-line driver: fuzz, replay, identify, check, eval."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

from . import corpus as corpus_mod
from .fuzzer import TARGET, Campaign, FuzzConfig, NoBookkeepingError, build_world
from .attack import synthesize_attack_contract
from .minisol import MiniSolError, parse_file
from .oracle import identify_bookkeeping
from .script import ScriptError, execute_script, from_record, parse_script, replay
from .stats import compute_a12, compute_mwu, mean_var

EXIT_OK, EXIT_MISMATCH, EXIT_PARSE, EXIT_NO_BOOKKEEPING = 0, 2, 3, 4
CONFIG_FILE = "oraclefuzz.conf"


@dataclass
class Settings:
    seed: int = 0
    budget_secs: float = 0.0  # 0 means no wall-clock limit
    max_iters: int = 50_000
    feedback: str = "full"
    out: str = "exploits"
    reset_period: int = 10
    gas_intervals: int = 5
    width: int = 256
    stop_first: bool = False
    repeats: int = 8
    timeout: int = 600_000
    timeout_unit: str = "iters"
    target_balance: int = 100
    jobs: int = 1


def _coerce(kind, text):
    if kind is bool:
        return str(text).strip().lower() in ("1", "true", "yes", "on")
    return kind(text)


def load_config_file(path: str) -> dict:
    out = {}
    if not os.path.isfile(path):
        return out
    types = {f.name: type(getattr(Settings(), f.name)) for f in fields(Settings)}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"{path}:{n}: unknown key {key!r}")
            out[key] = _coerce(types[key], val)
    return out


def resolve_settings(args) -> Settings:
    """flags > config file > ORACLEFUZZ_SEED (seed only) > defaults."""
    s = Settings()
    env_seed = os.environ.get("ORACLEFUZZ_SEED")
    if env_seed:
        s.seed = int(env_seed)
    for k, v in load_config_file(getattr(args, "config", None) or CONFIG_FILE).items():
        setattr(s, k, v)
    for f in fields(Settings):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(s, f.name, v)
    if s.feedback == "cfg-only":
        s.feedback = "cfg_only"
    return s


def fuzz_config(s: Settings, args=None, **over) -> FuzzConfig:
    max_iters = s.max_iters
    budget = s.budget_secs or None
    # a wall-clock budget given alone is not cut short by the iteration default
    if args is not None and getattr(args, "budget_secs", None) and getattr(args, "max_iters", None) is None:
        max_iters = None
    cfg = dict(seed=s.seed, max_iters=max_iters, budget_secs=budget, feedback=s.feedback,
               reset_period=s.reset_period, gas_intervals=s.gas_intervals, width=s.width,
               stop_first=s.stop_first, target_balance=s.target_balance)
    cfg.update(over)
    return FuzzConfig(**cfg)


def _load(path):
    try:
        return parse_file(path), None
    except FileNotFoundError:
        return None, f"error: no such file: {path}"
    except MiniSolError as exc:
        return None, f"error: {path}:{exc}"


# ------------------------------------------------------------- commands

def cmd_fuzz(args, s: Settings) -> int:
    program, err = _load(args.contract)
    if err:
        print(err, file=sys.stderr)
        return EXIT_PARSE
    cfg = fuzz_config(s, args)
    try:
        campaign = Campaign(program, cfg)
    except NoBookkeepingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_BOOKKEEPING
    exploits = campaign.run()
    os.makedirs(s.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.contract))[0]
    written = []
    for k, rec in enumerate(exploits):
        path = os.path.join(s.out, f"{stem}-{k:03d}.exploit")
        with open(path, "w") as fh:
            fh.write(from_record(rec, args.contract, cfg.target_balance).render())
        written.append(path)
    report = [f"contract={args.contract}", f"name={program.name}", f"seed={cfg.seed}",
              f"feedback={cfg.feedback}", f"iterations={campaign.iterations}",
              f"sequences={campaign.sequences_run}", f"edges={len(campaign.coverage)}",
              f"deps={len(campaign.deps)}", f"exploits={len(exploits)}",
              f"first_exploit_iteration={campaign.first_exploit_iteration or 'none'}"]
    for rec in exploits:
        report.append(rec.verdict.line())
    with open(os.path.join(s.out, f"{stem}.report"), "w") as fh:
        fh.write("\n".join(report) + "\n")
    print("\n".join(report))
    if args.expect:
        found = "exploitable" if exploits else "safe"
        if found != args.expect:
            print(f"expectation mismatch: expected {args.expect}, observed {found}")
            return EXIT_MISMATCH
    return EXIT_OK


def cmd_replay(args, s: Settings) -> int:
    try:
        ok, result, script = replay(args.script, corpus_mod.corpus_dir(), s.width)
    except FileNotFoundError as exc:
        print(f"error: missing file {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ScriptError, MiniSolError) as exc:
        print(f"error: malformed script: {exc}", file=sys.stderr)
        return EXIT_PARSE
    for v in result.verdicts:
        print(v.line())
    if ok:
        print("REPLAY ok")
        return EXIT_OK
    print(f"REPLAY mismatch expected={script.expect} observed={result.observed()}")
    return EXIT_MISMATCH


def identify_lines(program, balance: int = 0, width: int = 256) -> list:
    world = build_world(program, synthesize_attack_contract(program), balance, width=width)
    bindings = identify_bookkeeping(program, TARGET, world)
    if not bindings:
        return ["NONE"]
    return [f"BOOKKEEPING {program.name} {b.var} K={b.baseline}" for b in bindings]


def cmd_identify(args, s: Settings) -> int:
    program, err = _load(args.contract)
    if err:
        print(err, file=sys.stderr)
        return EXIT_PARSE
    print("\n".join(identify_lines(program, args.balance, s.width)))
    return EXIT_OK


def cmd_check(args, s: Settings) -> int:
    program, err = _load(args.contract)
    if err:
        print(err, file=sys.stderr)
        return EXIT_PARSE
    try:
        with open(args.script) as fh:
            script = parse_script(fh.read(), require_header=False)
    except FileNotFoundError:
        print(f"error: no such file: {args.script}", file=sys.stderr)
        return EXIT_PARSE
    except ScriptError as exc:
        print(f"error: malformed script: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if not script.target:
        script.balance = s.target_balance
    try:
        result = execute_script(program, script, s.width, stop_at_violation=False,
                                rebind_after_violation=True)
    except ScriptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    for v in result.verdicts:
        print(v.line())
    return EXIT_OK


def _eval_cell(job):
    path, mode, seed, s = job
    program = parse_file(path)
    over = {"seed": seed, "feedback": mode, "stop_first": True}
    if s.timeout_unit == "secs":
        over.update(max_iters=None, budget_secs=float(s.timeout))
    else:
        over.update(max_iters=int(s.timeout), budget_secs=None)
    c = Campaign(program, fuzz_config(s, **over))
    c.run()
    if c.first_exploit_iteration is None:
        return float(s.timeout)
    return float(c.first_exploit_iteration)


def eval_contracts(paths, s: Settings) -> list:
    """Rows of (name, full sample, cfg_only sample)."""
    jobs = [(p, mode, s.seed + r, s) for p in paths for mode in ("full", "cfg_only")
            for r in range(s.repeats)]
    if s.jobs > 1:
        with ProcessPoolExecutor(s.jobs) as pool:
            results = list(pool.map(_eval_cell, jobs))
    else:
        results = [_eval_cell(j) for j in jobs]
    rows = []
    k = 0
    for p in paths:
        full = results[k:k + s.repeats]
        cfg = results[k + s.repeats:k + 2 * s.repeats]
        k += 2 * s.repeats
        rows.append((os.path.splitext(os.path.basename(p))[0], full, cfg))
    return rows


def format_eval(rows) -> str:
    head = f"{'contract':<28}{'mode':<10}{'Avg.':>12}{'Variance':>16}{'p-value':>10}{'A12':>8}"
    out = [head]
    for name, full, cfg in rows:
        _, p = compute_mwu(full, cfg)
        a12 = compute_a12(cfg, full)
        for mode, sample in (("full", full), ("cfg_only", cfg)):
            m, v = mean_var(sample)
            tail = f"{p:>10.4f}{float(a12):>8.3f}" if mode == "full" else ""
            out.append(f"{name:<28}{mode:<10}{m:>12.1f}{v:>16.1f}{tail}")
    return "\n".join(out)


def cmd_eval(args, s: Settings) -> int:
    d = args.contracts
    if not os.path.isdir(d):
        print(f"error: not a directory: {d}", file=sys.stderr)
        return EXIT_PARSE
    if os.path.isfile(os.path.join(d, "manifest")):
        paths = [e.path for e in corpus_mod.list_corpus(d) if e.exploitable]
    else:
        paths = sorted(os.path.join(d, f) for f in os.listdir(d) if f.endswith(".msol"))
    if args.only:
        keep = set(args.only.split(","))
        paths = [p for p in paths if os.path.splitext(os.path.basename(p))[0] in keep]
    if not paths:
        print("error: no contracts to evaluate", file=sys.stderr)
        return EXIT_PARSE
    for p in paths:
        _, err = _load(p)
        if err:
            print(err, file=sys.stderr)
            return EXIT_PARSE
    rows = eval_contracts(paths, s)
    print(f"repeats={s.repeats} timeout={s.timeout} unit={s.timeout_unit} seed={s.seed}")
    for name, full, cfg in rows:
        print(f"samples contract={name} full={','.join(str(int(x)) for x in full)} "
              f"cfg_only={','.join(str(int(x)) for x in cfg)}")
    print(format_eval(rows))
    return EXIT_OK


# --------------------------------------------------------------- parser

def _common(p):
    # SUPPRESS keeps a flag given before the subcommand from being reset
    kw = {"default": argparse.SUPPRESS}
    p.add_argument("--seed", type=int, **kw)
    p.add_argument("--width", type=int, **kw)
    p.add_argument("--reset-period", type=int, dest="reset_period", **kw)
    p.add_argument("--gas-intervals", type=int, dest="gas_intervals", **kw)
    p.add_argument("--feedback", choices=["full", "cfg-only", "cfg_only"], **kw)
    p.add_argument("--budget-secs", type=float, dest="budget_secs", **kw)
    p.add_argument("--max-iters", type=int, dest="max_iters", **kw)
    p.add_argument("--stop-first", action="store_const", const=True, dest="stop_first", **kw)
    p.add_argument("--config", help=f"config file (default ./{CONFIG_FILE})", **kw)
    p.add_argument("--show-config", action="store_true", dest="show_config", **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oraclefuzz", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    _common(ap)
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("fuzz", help="run a fuzzing campaign")
    _common(p)
    p.add_argument("--contract", required=True)
    p.add_argument("--out", default=argparse.SUPPRESS)
    p.add_argument("--expect", choices=["exploitable", "safe"])

    p = sub.add_parser("replay", help="re-execute an exploit script")
    _common(p)
    p.add_argument("script")

    p = sub.add_parser("identify", help="print bookkeeping bindings")
    _common(p)
    p.add_argument("--contract", required=True)
    p.add_argument("--balance", type=int, default=0, help="deployment balance")

    p = sub.add_parser("check", help="run the oracle over a script")
    _common(p)
    p.add_argument("--contract", required=True)
    p.add_argument("--script", required=True)

    p = sub.add_parser("eval", help="full vs cfg-only feedback comparison")
    _common(p)
    p.add_argument("--contracts", required=True)
    p.add_argument("--repeats", type=int, default=argparse.SUPPRESS)
    p.add_argument("--timeout", type=int, default=argparse.SUPPRESS)
    p.add_argument("--timeout-unit", choices=["iters", "secs"], dest="timeout_unit",
                   default=argparse.SUPPRESS)
    p.add_argument("--only", help="comma-separated contract names")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    return ap


COMMANDS = {"fuzz": cmd_fuzz, "replay": cmd_replay, "identify": cmd_identify,
            "check": cmd_check, "eval": cmd_eval}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        s = resolve_settings(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if getattr(args, "show_config", False):
        for f in fields(Settings):
            print(f"{f.name} = {getattr(s, f.name)}")
        return EXIT_OK
    if not args.command:
        ap.print_help()
        return EXIT_MISMATCH
    return COMMANDS[args.command](args, s)


if __name__ == "__main__":
    sys.exit(main())
