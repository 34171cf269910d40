import os

import pytest

from oraclefuzz import cli
from oraclefuzz.cli import format_eval, main

from conftest import corpus_path


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("ORACLEFUZZ_SEED", raising=False)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


DAO_SCRIPT = """exploit-script v1
target simple_dao.msol balance 100
attacker fallback reenter-withdraw
tx sender=0 func=deposit args= value=5 gas=100000
tx sender=0 func=withdraw args=3 value=0 gas=30000
expect violation=balance class=reentrancy at=1
"""


def test_identify(capsys):
    code, out = run(capsys, "identify", "--contract", corpus_path("simple_dao"))
    assert code == 0 and out.strip() == "BOOKKEEPING SimpleDAO balances K=0"
    for decoy in ("no_mapping", "double_writer"):
        code, out = run(capsys, "identify", "--contract", corpus_path(decoy))
        assert code == 0 and out.strip() == "NONE"


def test_identify_prefunded(capsys):
    _, out = run(capsys, "identify", "--contract", corpus_path("simple_dao"), "--balance", "7")
    assert out.strip().endswith("K=-7")


def test_missing_file_exit3(capsys):
    assert main(["fuzz", "--contract", "nope.msol"]) == 3
    assert main(["identify", "--contract", "nope.msol"]) == 3


def test_parse_error_exit3(tmp_path, capsys):
    bad = tmp_path / "bad.msol"
    bad.write_text("contract {")
    assert main(["fuzz", "--contract", str(bad)]) == 3


def test_no_bookkeeping_exit4(capsys):
    assert main(["fuzz", "--contract", corpus_path("no_mapping"), "--max-iters", "10"]) == 4


def test_fuzz_writes_and_replays(tmp_path, capsys):
    out = tmp_path / "ex"
    code, text = run(capsys, "fuzz", "--contract", corpus_path("simple_dao"), "--seed", "42",
                     "--max-iters", "3000", "--out", str(out), "--expect", "exploitable")
    assert code == 0
    scripts = sorted(p for p in os.listdir(out) if p.endswith(".exploit"))
    assert scripts and (out / "simple_dao.report").exists()
    assert "exploits=" in text
    for name in scripts:
        code, text = run(capsys, "replay", str(out / name))
        assert code == 0 and "REPLAY ok" in text


def test_fuzz_expect_mismatch(tmp_path, capsys):
    code, text = run(capsys, "fuzz", "--contract", corpus_path("simple_dao"), "--seed", "42",
                     "--max-iters", "3000", "--out", str(tmp_path / "o"), "--expect", "safe")
    assert code == 2 and "mismatch" in text


def test_fuzz_safe(tmp_path, capsys):
    out = tmp_path / "safe"
    code, _ = run(capsys, "fuzz", "--contract", corpus_path("store_safe"), "--max-iters", "2000",
                  "--out", str(out), "--expect", "safe")
    assert code == 0
    assert not [p for p in os.listdir(out) if p.endswith(".exploit")]


def test_replay_hand_written(tmp_path, capsys):
    path = tmp_path / "dao.exploit"
    path.write_text(DAO_SCRIPT)
    code, text = run(capsys, "replay", str(path))
    assert code == 0
    assert "outcome=balance_violation class=reentrancy" in text


def test_replay_tampered_index(tmp_path, capsys):
    path = tmp_path / "dao.exploit"
    path.write_text(DAO_SCRIPT.replace("at=1", "at=0"))
    assert run(capsys, "replay", str(path))[0] == 2


def test_replay_malformed(tmp_path, capsys):
    path = tmp_path / "bad.exploit"
    path.write_text("not a script\n")
    assert run(capsys, "replay", str(path))[0] == 3
    path.write_text("exploit-script v1\ntx sender=0 func=deposit\n")
    assert run(capsys, "replay", str(path))[0] == 3


def test_check_honest(tmp_path, capsys):
    path = tmp_path / "h.script"
    path.write_text("exploit-script v1\n"
                    "tx sender=0 func=deposit args= value=9 gas=100000\n"
                    "tx sender=1 func=deposit args= value=4 gas=100000\n"
                    "tx sender=0 func=withdraw args=9 value=0 gas=100000\n")
    code, out = run(capsys, "check", "--contract", corpus_path("honest_ledger"),
                    "--script", str(path))
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 3
    assert all("outcome=ok" in line for line in lines)


def test_check_except_disorder(tmp_path, capsys):
    path = tmp_path / "e.script"
    path.write_text("exploit-script v1\nattacker fallback throw\n"
                    "tx sender=0 func=deposit args= value=5 gas=100000\n"
                    "tx sender=0 func=withdraw args=3 value=0 gas=100000\n")
    code, out = run(capsys, "check", "--contract", corpus_path("except_disorder"),
                    "--script", str(path))
    lines = out.strip().splitlines()
    assert code == 0
    assert sum("outcome=transaction_violation" in line for line in lines) == 1
    assert lines[1].startswith("VERDICT tx=1 outcome=transaction_violation r=4 dm=-3 dbal=0")


def test_check_empty_script(tmp_path, capsys):
    path = tmp_path / "empty.script"
    path.write_text("")
    code, out = run(capsys, "check", "--contract", corpus_path("simple_dao"), "--script", str(path))
    assert code == 0 and out == ""


def test_eval_small(capsys):
    code, out = run(capsys, "eval", "--contracts", os.path.dirname(corpus_path("simple_dao")),
                    "--only", "underflow", "--repeats", "2", "--timeout", "500")
    assert code == 0
    assert "underflow" in out and "A12" in out and "p-value" in out


def test_eval_empty_dir(tmp_path, capsys):
    d = tmp_path / "none"
    d.mkdir()
    assert main(["eval", "--contracts", str(d)]) == 3


def test_format_eval_symmetry():
    sample = [10.0, 20.0, 30.0]
    text = format_eval([("x", sample, list(sample))])
    assert text.splitlines()[1].rstrip().endswith("0.500")


def test_format_eval_timeout_rows():
    text = format_eval([("p", [50.0] * 8, [600.0] * 8)])
    assert text.splitlines()[1].rstrip().endswith("1.000")


def test_settings_precedence(tmp_path, capsys, monkeypatch):
    (tmp_path / "oraclefuzz.conf").write_text("seed = 5\nreset-period = 3\n")
    monkeypatch.setenv("ORACLEFUZZ_SEED", "9")
    _, out = run(capsys, "--show-config")
    assert "seed = 5" in out and "reset_period = 3" in out
    _, out = run(capsys, "fuzz", "--contract", "x", "--seed", "7", "--show-config")
    assert "seed = 7" in out
    (tmp_path / "oraclefuzz.conf").unlink()
    _, out = run(capsys, "--show-config")
    assert "seed = 9" in out


def test_bad_config_key(tmp_path, capsys):
    (tmp_path / "oraclefuzz.conf").write_text("colour = red\n")
    assert main(["--show-config"]) == 3


def test_budget_only_lifts_iteration_cap():
    args = cli.build_parser().parse_args(["fuzz", "--contract", "x", "--budget-secs", "2"])
    cfg = cli.fuzz_config(cli.resolve_settings(args), args)
    assert cfg.max_iters is None and cfg.budget_secs == 2
