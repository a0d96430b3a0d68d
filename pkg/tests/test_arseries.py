from __future__ import annotations

import itertools
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from vwpsum import arseries as ar
from vwpsum import classical as cl
from vwpsum.core import DomainError, PoleError, relative_residual
from vwpsum.lattice import LatticeBox

fracs = st.fractions(min_value=-5, max_value=5, max_denominator=7).filter(lambda x: x != 0)
qfracs = st.fractions(min_value=Fraction(1, 7), max_value=Fraction(5, 7), max_denominator=7)


def close(x, y, tol):
    return abs(x - y) <= tol * abs(y)


def ar_params(point, **kw) -> ar.ArParams:
    d = dict(point, **kw)
    return ar.ArParams(d["r"], d["a"], d["b"], d["c"], d["e"], d["f"], d["g"], d["z"], d["q"])


def bilateral(point) -> ar.ArParams:
    # b != a so the negative branches of the 8psi8 are populated
    return ar_params(point, a=0.5, b=(0.7, 0.6 + 0.2j), e=(1.4, 1.2), f=1.6, g=2.2)


def distinct(values) -> bool:
    return len(set(values)) == len(values)


# --- r = 1 reductions --------------------------------------------------------


def test_milne_r1_is_rogers(point_1d):
    a, e, f, g, q = (point_1d[k] for k in "aefgq")
    m = ar.Phi65rParams.milne(a, (e,), f, g, (1.0,), q)
    rogers = cl.Rogers65Params(a, e, f, g, q)
    assert close(ar.eval_6Phi5r(m)[0], cl.rogers_65_lhs(rogers), 1e-13)
    assert close(ar.milne_65_rhs(m), cl.rogers_65_rhs(rogers), 1e-13)


def test_p88_and_m88_r1_are_the_1d_series(point_1d):
    p = ar_params(point_1d, r=1, b=(0.5,), e=(point_1d["e"],), z=(1.0,))
    sp = cl.ShuklaParams(p.a, 0.5, p.c, p.e[0], p.f, p.g, p.q)
    assert close(ar.eval_p88_lhs(p), cl.eval_87_lhs(sp), 1e-12)
    assert close(ar.eval_p88_rhs(p), cl.eval_87_rhs(sp), 1e-12)
    assert close(ar.eval_m88_lhs(p).value, cl.shukla_88_lhs(sp), 1e-11)
    assert close(ar.eval_m88_rhs(p), cl.shukla_88_rhs_form2(sp), 1e-12)


# --- the summations themselves -------------------------------------------------


def test_milne_rd(point_rd):
    p = ar.Phi65rParams.milne(0.3, (0.9, 1.1 + 0.3j), 1.4, 2.0, point_rd["z"], 0.4)
    assert close(ar.eval_6Phi5r(p)[0], ar.milne_65_rhs(p), 1e-11)


def test_p88_rd(point_rd):
    p = ar_params(point_rd)
    assert close(ar.eval_p88_lhs(p), ar.eval_p88_rhs(p), 1e-11)


def test_m88_rd(point_rd):
    p = bilateral(point_rd)
    assert abs(p.argument) < 0.5
    lhs = ar.eval_m88_lhs(p)
    assert min(lhs.box.lower) < 0
    assert close(lhs.value, ar.eval_m88_rhs(p), 1e-9)


def test_m88_annulus(point_rd):
    with pytest.raises(DomainError, match="annulus"):
        ar.eval_m88_lhs(ar_params(point_rd, a=2.0))


@pytest.mark.parametrize("perm", [(1, 0)])
def test_permutation_invariance(point_rd, perm):
    p = bilateral(point_rd)
    pp = p.permuted(perm)
    assert close(ar.eval_p88_lhs(pp), ar.eval_p88_lhs(p), 1e-12)
    assert close(ar.eval_m88_rhs(pp), ar.eval_m88_rhs(p), 1e-12)


def test_vandermonde_factor():
    q = 0.4
    z = (1.0, 1.5, 0.7)
    k = (2, -1, 0)
    expected = 1.0
    for i, j in itertools.combinations(range(3), 2):
        expected *= (z[i] * q ** k[i] - z[j] * q ** k[j]) / (z[i] - z[j])
    assert close(ar.vandermonde_factor(z, k, q), expected, 1e-14)
    assert ar.vandermonde_factor(z, (0, 0, 0), q) == 1


def test_p88_three_dimensional():
    p = ar.ArParams(3, 0.2, (0.2, 0.2, 0.2), 0.5, (0.8, 0.9, 1.1), 1.2, 2.0, (1.0, 1.3, 0.8), 0.3)
    assert close(ar.eval_p88_lhs(p), ar.eval_p88_rhs(p), 1e-10)


# --- c -> 0 ------------------------------------------------------------------


def test_c0_reduction(point_rd):
    out = ar.p88_c0_reduction(ar_params(point_rd))
    assert close(out["p88_rhs_c0"], out["milne_rhs"], 1e-13)
    assert close(out["p88_lhs_c0"], out["milne_lhs"], 1e-13)
    assert close(out["p88_lhs_c0"], out["p88_rhs_c0"], 1e-11)


def test_gustafson_limit(point_rd):
    p = bilateral(point_rd)
    lhs, rhs = ar.gustafson_66_limit(p)
    assert close(lhs.value, rhs, 1e-9)


def test_gustafson_limit_is_the_small_c_limit(point_rd):
    p = bilateral(point_rd)
    _, limit = ar.gustafson_66_limit(p)
    gaps = [abs(ar.eval_m88_rhs(replace(p, c=c)) - limit) for c in (1e-2, 1e-3)]
    assert 5 < gaps[0] / gaps[1] < 20


def test_negative_branch_ratio(point_rd):
    p = bilateral(point_rd)
    ratio = ar.negative_branch_ratio(p, t=60)
    assert abs(ratio - abs(p.argument)) <= 0.05 * abs(p.argument)
    # with b = a every term off the nonnegative cone vanishes
    assert ar.negative_branch_ratio(ar_params(point_rd)) == 0


# --- finite identities, exact ---------------------------------------------------


@given(st.integers(1, 4), fracs, fracs, st.lists(fracs, min_size=4, max_size=4),
       st.lists(fracs, min_size=4, max_size=4))
@settings(max_examples=60)
def test_partial_fractions_exact(r, t, u, y, z):
    z = z[:r]
    assume(distinct(z))
    inp = ar.PartialFractionInput(r, t, u, y[:r], z)
    try:
        assert ar.pfd_check(inp) == 0
        assert ar.lemma_pbz_check(inp) == 0
    except PoleError:
        assume(False)


def test_partial_fractions_clear_poles():
    # t z_1 = 1 is a simple pole on both sides; the cleared comparison holds
    inp = ar.PartialFractionInput(2, Fraction(1, 2), Fraction(3), (Fraction(1, 3), Fraction(4)),
                                  (Fraction(2), Fraction(5, 3)))
    lhs, rhs = ar.pfd_sides(inp)
    assert lhs == rhs
    with pytest.raises(PoleError):
        ar.pfd_sides(inp, cleared=False)


@given(st.integers(1, 3), fracs, fracs, st.lists(fracs, min_size=3, max_size=3), fracs,
       st.lists(fracs, min_size=3, max_size=3), qfracs, st.sampled_from(["c-split", "e-product"]),
       st.lists(st.integers(-3, 5), min_size=3, max_size=3))
@settings(max_examples=60)
def test_rewritten_lemma_exact(r, a, c, e, f, z, q, variant, k):
    z = z[:r]
    assume(distinct(z))
    p = ar.ArParams(r, a, (1,) * r, c, e[:r], f, 1, z, q)
    try:
        assert ar.lemma_pbz_rewritten_check(p, variant, k[:r]) == 0
    except PoleError:
        assume(False)


def test_rewritten_lemma_bad_variant(point_rd):
    with pytest.raises(ValueError):
        ar.lemma_pbz_rewritten_check(ar_params(point_rd), "other")
    with pytest.raises(ValueError):
        ar.lemma_pbz_rewritten_check(ar_params(point_rd), "c-split")


@given(st.integers(1, 3), fracs, fracs, st.lists(fracs, min_size=3, max_size=3), fracs, fracs,
       qfracs)
def test_prefactor_rd_exact(r, a, c, e, f, g, q):
    p = ar.ArParams(r, a, (1,) * r, c, e[:r], f, g, (1,) * r, q)
    try:
        assert ar.prefactor_identity_check_rd(p) == 0
    except PoleError:
        assume(False)


@given(st.integers(1, 4), st.lists(fracs, min_size=4, max_size=4), qfracs,
       st.lists(st.integers(0, 3), min_size=4, max_size=4))
@settings(max_examples=60)
def test_lemma_312_exact(r, z, q, m):
    z = z[:r]
    assume(distinct(z))
    try:
        assert ar.lemma_312_check(z, m[:r], q) == 0
    except PoleError:
        assume(False)


def test_lemma_312_rejects_negative_m():
    q = Fraction(7, 10)
    z = (Fraction(1), Fraction(7, 5))
    assert ar.lemma_312_check(z, (1, 2), q) == 0
    with pytest.raises(ValueError):
        ar.lemma_312_sides(z, (1, -1), q)


def test_specialization_degenerate_point(point_rd):
    # z_2 = 1.4, m = (1, 2): the shifted c-block factor a z_2 q / c equals 1
    p = ar_params(point_rd, z=(1.0, 1.4))
    assert close(ar.eval_p88_lhs(p), ar.eval_p88_rhs(p), 1e-11)
    with pytest.raises(PoleError) as info:
        ar.specialization_check_rd(p, (1, 2))
    assert info.value.stage == "shifted"
    # the closed form at b_i = aq^-m_i divides by 1 - c/(b_2 z_2 q) = 0 as well
    with pytest.raises(PoleError):
        ar.eval_m88_rhs(ar.specialized_params_rd(p, (1, 2)))


@given(st.integers(1, 3), st.lists(fracs, min_size=3, max_size=3),
       st.lists(fracs, min_size=3, max_size=3), qfracs,
       st.lists(st.integers(0, 3), min_size=3, max_size=3))
@settings(max_examples=60)
def test_e_product_identities_exact(r, e, z, q, m):
    z = z[:r]
    assume(distinct(z))
    p = ar.ArParams(r, 1, (1,) * r, 1, e[:r], 1, 1, z, q)
    try:
        assert ar.e_product_identity_checks(p, m[:r]) == (0, 0)
    except (PoleError, ZeroDivisionError):
        assume(False)


def test_milne_terminating_exact():
    q = Fraction(1, 3)
    N = 2
    p = ar.Phi65rParams.milne(Fraction(2, 5), (Fraction(3), Fraction(-1, 2)), Fraction(5, 4),
                              q**-N, (Fraction(1), Fraction(7, 3)), q)
    lhs, est = ar.eval_6Phi5r(p)
    assert est == 0
    assert lhs == ar.milne_65_rhs_terminating(p, N)


# --- chains ------------------------------------------------------------------


def test_replay_rd(point_rd):
    report = ar.proof_replay_rd(ar_params(point_rd))
    assert [s.name for s in report.stages] == ["split", "index-shift", "milne", "combined",
                                               "e-product", "final"]
    assert report.passed(1e-10)


def test_replay_rd_domain(point_rd):
    with pytest.raises(DomainError) as info:
        ar.proof_replay_rd(ar_params(point_rd, a=20.0))
    assert info.value.stage == "series"


@pytest.mark.parametrize("m", [(0, 0), (1, 0), (1, 2), (2, 2)])
def test_specialization_rd(point_rd, m):
    report = ar.specialization_check_rd(ar_params(point_rd), m)
    assert [s.name for s in report.stages] == ["truncated", "shifted", "closed-form",
                                               "simplified", "transformed", "rhs"]
    assert report.passed(1e-9)
    assert report.notes.get("mass_below_lower_bounds", 0.0) == 0.0


def test_specialization_rd_rejects_bad_m(point_rd):
    with pytest.raises(ValueError):
        ar.specialization_check_rd(ar_params(point_rd), (1,))
    with pytest.raises(ValueError):
        ar.specialization_check_rd(ar_params(point_rd), (1, -1))


def test_specialized_params(point_rd):
    p = ar.specialized_params_rd(ar_params(point_rd), (1, 2))
    assert all(close(b, p.a * p.q**-m, 1e-15) for b, m in zip(p.b, (1, 2)))


def test_fixed_box_m88(point_rd):
    p = bilateral(point_rd)
    box = LatticeBox.cube(2, -15, 25)
    res = ar.eval_m88_lhs(p, box, adaptive=False)
    assert res.box == box
    assert relative_residual(res.value, ar.eval_m88_rhs(p)) < 1e-9
