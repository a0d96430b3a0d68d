from __future__ import annotations

import json
from fractions import Fraction

import pytest

from vwpsum import cli
from vwpsum import harness as h

ROGERS = "a=0.2,b=0.8,c=0.9,d=3,q=0.4"
P88 = "a=0.15,c=0.6,e=0.7;0.8,f=0.9,g=2.5,z=1;1.3,q=0.35"
M88 = "a=0.5,b=0.7;0.6,c=0.6,e=1.4;1.2,f=1.6,g=2.2,z=1;1.3,q=0.35"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_params():
    p = cli.parse_params("a=0.3, b=0.5;0.6+0.1i, q=1/3, k=-2, variant=c-split")
    assert p["a"] == 0.3 + 0j
    assert p["b"] == (0.5 + 0j, 0.6 + 0.1j)
    assert p["q"] == Fraction(1, 3)
    assert p["k"] == -2
    assert p["variant"] == "c-split"
    with pytest.raises(cli.UsageError):
        cli.parse_params("a")
    with pytest.raises(cli.UsageError):
        cli.parse_params("k=0.5")
    with pytest.raises(cli.UsageError):
        cli.parse_params("a=x")


def test_parse_box():
    assert cli.parse_box("-10:20") == ((-10, 20),)
    assert cli.parse_box("-1:2;0:3") == ((-1, 2), (0, 3))
    assert cli._box_for(((-1, 2),), 2).lower == (-1, -1)
    with pytest.raises(cli.UsageError):
        cli.parse_box("1-2")
    with pytest.raises(cli.UsageError):
        cli._box_for(((3, 2),), 1)
    with pytest.raises(cli.UsageError):
        cli._box_for(((0, 1), (0, 1)), 3)


def test_prepare_params_infers_r():
    p, r = cli.prepare_params("p88", cli.parse_params(P88), None, False)
    assert r == 2 and p["r"] == 2
    with pytest.raises(cli.UsageError, match="does not match"):
        cli.prepare_params("p88", cli.parse_params(P88), 3, False)
    with pytest.raises(cli.UsageError, match="rational"):
        cli.prepare_params("pbz2", cli.parse_params("a=0.5,c=2,q=1/3,k=2"), None, True)


def test_eval_pass(capsys):
    code, out, _ = run(capsys, "eval", "--identity", "rogers65", "--params", ROGERS)
    assert code == cli.EXIT_OK
    assert out.startswith("# vwpsum eval {")
    header = json.loads(out.splitlines()[0].split(" ", 3)[3])
    assert header["identity"] == "rogers65" and header["samples"] == 10
    assert "PASS" in out


def test_eval_exact(capsys):
    code, out, _ = run(capsys, "eval", "--identity", "pbz2", "--exact",
                       "--params", "a=2/3,c=5/7,q=1/3,k=4")
    assert code == cli.EXIT_OK
    assert "residual: 0 (exact)" in out


def test_eval_residual_failure(capsys):
    code, out, _ = run(capsys, "eval", "--identity", "m88", "--params", M88, "--box=-2:3")
    assert code == cli.EXIT_FAIL
    assert "FAIL" in out


def test_eval_fixed_box_passes(capsys):
    code, out, _ = run(capsys, "eval", "--identity", "m88", "--params", M88, "--box=-15:25")
    assert code == cli.EXIT_OK
    assert "box: [-15, -15] .. [25, 25]" in out


@pytest.mark.parametrize("argv, message", [
    (["eval", "--identity", "rogers65", "--params", "a=0.2,b=0.8,q=0.4"], "missing required"),
    (["eval", "--identity", "nope", "--params", "a=1"], "unknown identity"),
    (["eval", "--identity", "rogers65"], "needs --params"),
    (["eval", "--identity", "rogers65", "--params", ROGERS, "--r", "2"], "one-dimensional"),
    (["verify", "--identity", "m88", "--exact"], "not exact-capable"),
    (["replay", "--identity", "p88"], "replay needs"),
    (["grid", "--identity", "p88"], "grid needs"),
    (["verify", "--identity", "p88", "--workers", "0"], "--workers"),
    (["verify", "--identity", "p88", "--rho", "2"], "rho"),
])
def test_usage_errors(capsys, argv, message):
    code, _, err = run(capsys, *argv)
    assert code == cli.EXIT_USAGE
    assert message in err


def test_argparse_errors(capsys):
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE
    assert cli.main(["eval", "--format", "xml"]) == cli.EXIT_USAGE
    capsys.readouterr()


def test_domain_error(capsys):
    bad = M88.replace("a=0.5", "a=3")
    code, _, err = run(capsys, "eval", "--identity", "m88", "--params", bad)
    assert code == cli.EXIT_USAGE
    assert "annulus" in err


def test_verify_writes_report(capsys, tmp_path):
    path = tmp_path / "r.jsonl"
    code, out, _ = run(capsys, "verify", "--identity", "p88", "--r", "2", "--samples", "3",
                       "--seed", "2", "--output", str(path))
    assert code == cli.EXIT_OK
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[-1])["summary"]["p88[r=2,float]"]["passed"] == 3
    assert "p88" in out


def test_suite_csv_and_workers(capsys, tmp_path):
    paths = [tmp_path / f"s{w}.csv" for w in (1, 2)]
    for w, path in zip((1, 2), paths):
        code, _, _ = run(capsys, "suite", "--identity", "pfd,rogers65", "--samples", "3",
                         "--workers", str(w), "--format", "csv", "--output", str(path))
        assert code == cli.EXIT_OK
    assert paths[0].read_text() == paths[1].read_text()
    # pfd runs in float and exact mode, rogers65 only in float mode
    assert len(paths[0].read_text().splitlines()) == 1 + 3 * 3


def test_suite_cases():
    cases = cli.suite_cases(["p88", "pfd"], None, False)
    assert [(c.name, c.r, c.mode) for c in cases] == [("p88", 2, "float"), ("pfd", 2, "float"),
                                                      ("pfd", 2, "exact")]
    assert all(c.mode == "exact" for c in cli.suite_cases(["pfd", "lemma312"], 3, True))


def test_infeasible_domain_exit(capsys, monkeypatch):
    monkeypatch.setattr(h, "MAX_ATTEMPTS", 300)
    code, out, _ = run(capsys, "verify", "--identity", "rogers65", "--rho", "1e-9")
    assert code == cli.EXIT_USAGE
    assert "infeasible-domain" in out


def test_replay(capsys):
    code, out, _ = run(capsys, "replay", "--identity", "replay-rd", "--params", P88)
    assert code == cli.EXIT_OK
    for stage in ("split", "index-shift", "milne", "combined", "e-product", "final"):
        assert stage in out


def test_replay_failing_stage(capsys):
    # below rounding level every stage with a nonzero residual fails
    code, out, _ = run(capsys, "replay", "--identity", "replay-1d", "--tol", "1e-30",
                       "--params", "a=0.2,c=0.7,e=0.8,f=0.9,g=3,q=0.4")
    assert code == cli.EXIT_FAIL
    first = next(ln.split()[0] for ln in out.splitlines() if ln.endswith("FAIL"))
    assert f"first failing stage: {first}" in out


def test_replay_domain_stage(capsys):
    code, _, err = run(capsys, "replay", "--identity", "replay-1d",
                       "--params", "a=50,c=0.7,e=0.8,f=0.9,g=3,q=0.4")
    assert code == cli.EXIT_USAGE
    assert "failed at stage series" in err


def test_grid(capsys):
    code, out, _ = run(capsys, "grid", "--identity", "special-1d", "--max-m", "3")
    assert code == cli.EXIT_OK
    assert out.count("pass") == 4
    code, out, _ = run(capsys, "grid", "--identity", "special-rd", "--max-m", "1")
    assert code == cli.EXIT_OK
    assert out.count("pass") == 4


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"identity": "rogers65", "params": ROGERS, "tol": 1e-20}))
    code, out, _ = run(capsys, "eval", "--config", str(cfg))
    assert code == cli.EXIT_FAIL  # the file's tolerance is too strict
    code, out, _ = run(capsys, "eval", "--config", str(cfg), "--tol", "1e-9")
    assert code == cli.EXIT_OK  # flags override the file
    cfg.write_text(json.dumps({"identity": "rogers65", "colour": 1}))
    assert run(capsys, "eval", "--config", str(cfg))[0] == cli.EXIT_USAGE
    cfg.write_text("{not json")
    assert run(capsys, "eval", "--config", str(cfg))[0] == cli.EXIT_USAGE


def test_io_errors(capsys, tmp_path):
    code, _, err = run(capsys, "eval", "--config", str(tmp_path / "missing.json"))
    assert code == cli.EXIT_IO
    code, _, err = run(capsys, "verify", "--identity", "pbz2", "--samples", "1",
                       "--output", str(tmp_path / "no" / "such" / "dir.jsonl"))
    assert code == cli.EXIT_IO
    assert "I/O error" in err
