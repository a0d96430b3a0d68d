from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

import pytest

from vwpsum import harness as h
from vwpsum.core import InfeasibleDomain
from vwpsum.lattice import LatticeBox


def test_registry_covers_every_case():
    names = {"rogers65", "eq87", "shukla88-form1", "shukla88-form2", "bailey66-limit", "milne65",
             "p88", "m88", "gustafson66-limit", "pbz2", "pfd", "lemma-pbz", "lemma-pbz-rewritten",
             "prefactor-1d", "prefactor-rd", "lemma312", "e-products", "replay-1d", "replay-rd",
             "special-1d", "special-rd"}
    assert set(h.REGISTRY) == names
    for name in ("pbz2", "pfd", "lemma312", "e-products", "milne65"):
        assert name in h.EXACT_CAPABLE
    assert "m88" not in h.EXACT_CAPABLE


def test_case_validation():
    with pytest.raises(ValueError):
        h.IdentityCase("nope")
    with pytest.raises(ValueError):
        h.IdentityCase("rogers65", r=2)
    with pytest.raises(ValueError):
        h.IdentityCase("m88", mode="exact")
    with pytest.raises(ValueError):
        h.IdentityCase("p88", r=0)
    assert h.IdentityCase("pfd", 3, "exact").tolerance() == 0
    assert h.IdentityCase("pfd", 3).tolerance() == h.ALGEBRAIC_TOL


@pytest.mark.parametrize("kw", [dict(rho=1.0), dict(q_range=(0.5, 0.2)), dict(count=0),
                                dict(pole_margin=0)])
def test_sample_config_validation(kw):
    with pytest.raises(ValueError):
        h.SampleConfig(**kw)


def test_sampling_is_deterministic():
    case = h.IdentityCase("p88", 2)
    cfg = h.SampleConfig(seed=3, count=5)
    a = list(h.sample_params(case, cfg))
    b = list(h.sample_params(case, cfg))
    assert a == b
    c = list(h.sample_params(case, h.SampleConfig(seed=4, count=5)))
    assert a != c


@pytest.mark.parametrize("name, r", [("rogers65", 1), ("shukla88-form2", 1), ("p88", 2),
                                     ("m88", 2), ("milne65", 3)])
def test_samples_respect_the_domain(name, r):
    cfg = h.SampleConfig(seed=1, count=8, rho=0.6, q_range=(0.3, 0.5))
    for p in h.sample_params(h.IdentityCase(name, r), cfg):
        assert 0.3 <= abs(p["q"]) <= 0.5
        if name == "rogers65":
            assert abs(p["a"] * p["q"] / (p["b"] * p["c"] * p["d"])) <= 0.6
        if name == "m88":
            a, B, E = p["a"], p["b"][0] * p["b"][1], p["e"][0] * p["e"][1]
            assert abs(a**3 / (B * E * p["f"] * p["g"])) < 1


def test_exact_samples_are_rational():
    case = h.IdentityCase("lemma-pbz", 3, "exact")
    for p in h.sample_params(case, h.SampleConfig(count=5)):
        assert isinstance(p["t"], Fraction)
        rec = h.check_identity(case, p)
        assert rec["passed"] and rec["residual"] == 0


def test_infeasible_domain(monkeypatch):
    monkeypatch.setattr(h, "MAX_ATTEMPTS", 500)
    cfg = h.SampleConfig(rho=1e-9)
    with pytest.raises(InfeasibleDomain):
        list(h.sample_params(h.IdentityCase("rogers65"), cfg))
    report = h.run_suite([h.IdentityCase("rogers65"), h.IdentityCase("pbz2")], cfg)
    assert "infeasible-domain" in report.summary["rogers65[r=1,float]"]["error"]
    assert report.summary["pbz2[r=1,float]"]["flagged"] == 0
    assert not report.ok


def test_check_identity_flags_errors():
    case = h.IdentityCase("rogers65")
    p = dict(h.REFERENCE_POINTS["1d"])
    p = dict(a=p["a"], b=p["e"], c=p["f"], d=p["g"], q=p["q"])
    good = h.check_identity(case, p)
    assert good["passed"] and good["flags"] == []
    bad = h.check_identity(case, dict(p, d=0.01))
    assert not bad["passed"]
    assert bad["flags"][0].startswith("error")


def test_loose_truncation_is_flagged():
    case = h.IdentityCase("m88", 2)
    p = h.reference_point("m88", 2)
    p.update(a=0.5, b=(0.7, 0.6), e=(1.4, 1.2), f=1.6, g=2.2)
    rec = h.check_identity(case, p, box=LatticeBox.cube(2, -2, 3))
    assert not rec["passed"]
    assert any(f.startswith("truncation") or f.startswith("residual") for f in rec["flags"])
    assert rec["box"] == [[-2, -2], [3, 3]]


def test_box_only_for_bilateral_cases():
    with pytest.raises(ValueError):
        h.evaluate(h.IdentityCase("p88", 2), h.reference_point("p88", 2), box=LatticeBox.cube(2, 0, 3))
    with pytest.raises(ValueError):
        h.evaluate(h.IdentityCase("m88", 2), h.reference_point("m88", 2), box=LatticeBox.cube(3, 0, 3))


def test_replay_records_have_stages():
    rec = h.check_identity(h.IdentityCase("replay-rd", 2), h.reference_point("replay-rd", 2))
    assert rec["passed"]
    assert [s["name"] for s in rec["stages"]] == ["split", "index-shift", "milne", "combined",
                                                  "e-product", "final"]


def test_stage_failure_is_flagged():
    rec = h.new_record(h.IdentityCase("replay-1d"), {}, 1e-9)
    out = dict(lhs=1.0, rhs=1.0, stages=[dict(name="split", residual=0.0),
                                         dict(name="rogers", residual=1e-3)])
    h.finish_record(rec, out)
    assert not rec["passed"]
    assert rec["flags"] == ["stage failure: rogers"]


def test_grid():
    recs = h.ismail_grid_check("special-1d", 3, h.reference_point("special-1d"))
    assert len(recs) == 4 and all(r["passed"] for r in recs)
    recs = h.ismail_grid_check("special-rd", 1, h.reference_point("special-rd", 2))
    assert len(recs) == 4 and all(r["passed"] for r in recs)
    with pytest.raises(ValueError):
        h.ismail_grid_check("p88", 1, {})


@pytest.mark.parametrize("name", ["bailey66-limit", "gustafson66-limit"])
def test_limit_rates(name):
    r = 2 if name.startswith("gustafson") else 1
    p = h.reference_point(name, r)
    if r == 2:
        p.update(a=0.5, b=(0.7, 0.6), e=(1.4, 1.2), f=1.6, g=2.2)
    else:
        p.update(b=0.6)
    out = h.limit_rate_check(name, p)
    assert out["passed"], out


def _suite(workers):
    cases = [h.IdentityCase("rogers65"), h.IdentityCase("p88", 2), h.IdentityCase("pfd", 2, "exact")]
    return h.run_suite(cases, h.SampleConfig(seed=5, count=4), workers=workers)


def test_reports_are_reproducible():
    one, four = _suite(1), _suite(4)
    assert one.ok and four.ok
    assert one.records == four.records
    assert h.render_report(one, "csv") == h.render_report(four, "csv")
    strip = lambda rep: [ln for ln in h.render_report(rep).splitlines() if "summary" not in ln]
    assert strip(one) == strip(four)
    s1, s4 = dict(one.summary), dict(four.summary)
    assert s1.pop("_run")["workers"] == 1 and s4.pop("_run")["workers"] == 4
    assert s1 == s4


def test_jsonl_schema(tmp_path):
    rep = _suite(1)
    path = tmp_path / "out.jsonl"
    h.write_report(rep, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == len(rep.records) + 1
    first = json.loads(lines[0])
    for key in ("identity", "r", "mode", "seed", "index", "params", "lhs", "rhs", "residual",
                "est_lhs", "est_rhs", "tolerance", "flags", "passed"):
        assert key in first
    assert isinstance(first["lhs"], list) and len(first["lhs"]) == 2
    summary = json.loads(lines[-1])["summary"]
    assert summary["p88[r=2,float]"]["count"] == 4
    exact = [json.loads(ln) for ln in lines[:-1] if json.loads(ln)["mode"] == "exact"]
    assert exact and all(isinstance(rec["params"]["t"], str) and "/" in rec["params"]["t"]
                         for rec in exact)


def test_csv_render():
    rep = _suite(1)
    rows = list(csv.DictReader(io.StringIO(h.render_report(rep, "csv"))))
    assert len(rows) == len(rep.records)
    assert tuple(rows[0]) == h.CSV_FIELDS
    with pytest.raises(ValueError):
        h.render_report(rep, "xml")


def test_to_jsonable():
    assert h.to_jsonable(Fraction(-3, 4)) == "-3/4"
    assert h.to_jsonable(1 + 2j) == [1.0, 2.0]
    assert h.to_jsonable(float("inf")) == "inf"
    assert h.to_jsonable({"b": (Fraction(1), 0.5)}) == {"b": ["1/1", 0.5]}


def test_run_suite_needs_cases():
    with pytest.raises(ValueError):
        h.run_suite([], h.SampleConfig())
