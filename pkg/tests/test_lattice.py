from __future__ import annotations

import cmath
import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from vwpsum.core import ConvergenceError, PoleError, TailConfig, inf_product
from vwpsum.lattice import (
    LatticeBox,
    LatticeSummand,
    box_sum,
    direct_box_sum,
    sum_bilateral,
    sum_terminating_exact,
    sum_unilateral,
)


@st.composite
def cvals(draw, lo=0.3, hi=2.5):
    return cmath.rect(draw(st.floats(lo, hi)), draw(st.floats(-math.pi, math.pi)))


def one_phi_zero(a, z, q) -> LatticeSummand:
    """sum_k (a;q)_k/(q;q)_k z^k as a one-axis lattice summand."""
    return LatticeSummand(q=q, z=(1.0,), vwp=None, axis_num=((a,),), axis_den=((q,),), w=z)


def test_box_basics():
    box = LatticeBox((-1, 0), (2, 3))
    assert box.r == 2 and box.size == 16
    assert len(list(box.points())) == 16
    assert box.enlarged(1) == LatticeBox((-2, -1), (3, 4))
    assert LatticeBox.cube(3, 0, 2).size == 27
    with pytest.raises(ValueError):
        LatticeBox((0, 1), (0, 0))
    with pytest.raises(ValueError):
        LatticeBox((0,), (1, 2))


def test_unilateral_r1_is_q_binomial():
    a, z, q = 0.7 + 0.2j, 0.5 - 0.3j, 0.45 + 0.1j
    res = sum_unilateral(one_phi_zero(a, z, q))
    ref = inf_product([a * z], [z], q)[0]
    assert abs(res.value - ref) <= 1e-13 * abs(ref)
    assert abs(res.value - ref) <= res.error + 1e-15 * abs(ref)


def test_unilateral_product_of_two_series():
    # with no coupling the r = 2 sum factors: w^{|k|} = w^{k_1} w^{k_2}
    a1, a2, z, q = 0.3 + 0.4j, 1.7, 0.4 + 0.2j, 0.5
    s = LatticeSummand(q=q, z=(1.0, 2.0), vwp=None, axis_num=((a1,), (a2,)),
                       axis_den=((q,), (q,)), w=z, vandermonde=False)
    res = sum_unilateral(s)
    ref = inf_product([a1 * z], [z], q)[0] * inf_product([a2 * z], [z], q)[0]
    assert abs(res.value - ref) <= 1e-12 * abs(ref)


def test_bilateral_r1_is_ramanujan():
    a, b, z, q = 0.5 + 0.3j, 0.2, 0.6 - 0.1j, 0.5
    s = LatticeSummand(q=q, z=(1.0,), vwp=None, axis_num=((a,),), axis_den=((b,),), w=z)
    res = sum_bilateral(s)
    ref = inf_product([q, b / a, a * z, q / (a * z)], [b, q / a, z, b / (a * z)], q)[0]
    assert abs(res.value - ref) <= 1e-12 * abs(ref)
    assert res.box.lower[0] < 0


def test_bilateral_product_of_two_series():
    a1, b1, a2, b2, z, q = 0.9, 0.2, 0.5 + 0.5j, 0.1j, 0.55, 0.4 + 0.2j
    s = LatticeSummand(q=q, z=(1.0, 3.0), vwp=None, axis_num=((a1,), (a2,)),
                       axis_den=((b1,), (b2,)), w=z, vandermonde=False)
    res = sum_bilateral(s)

    def psi(a, b):
        return inf_product([q, b / a, a * z, q / (a * z)], [b, q / a, z, b / (a * z)], q)[0]

    ref = psi(a1, b1) * psi(a2, b2)
    assert abs(res.value - ref) <= 1e-11 * abs(ref)


@given(cvals(), cvals(), cvals(), cvals(0.2, 0.7), cvals(0.6, 1.6), cvals(0.6, 1.6),
       cvals(0.2, 0.9))
@settings(max_examples=30, deadline=None)
def test_table_path_matches_direct_terms(alpha, u, v, q, z1, z2, w):
    assume(abs(q) < 0.8 and abs(z1 - z2) > 0.1)
    s = LatticeSummand(q=q, z=(z1, z2), vwp=(alpha * z1, alpha * z2),
                       axis_num=((u * z1 / z2, u), (v, v * z2 / z1)),
                       axis_den=((q, q * z1 / z2), (q * z2 / z1, q)),
                       total_num=(v,), total_den=(u * q,), axis_lin=((u,), (v,)),
                       total_lin=(alpha,), w=w)
    box = LatticeBox((-3, -2), (4, 5))
    try:
        fast = box_sum(s, box).value
        slow = direct_box_sum(s, box)
    except (PoleError, ZeroDivisionError):
        assume(False)
    scale = max(abs(slow), sum(abs(s.term(k)) for k in box.points()) * 1e-3)
    assert abs(fast - slow) <= 1e-11 * scale


def test_pole_inside_box():
    q = 0.5
    # (q^-1; q)_k vanishes for k >= 2, so the terms there have a pole
    s = LatticeSummand(q=q, z=(1.0,), vwp=None, axis_num=((0.3,),), axis_den=((1 / q,),), w=0.5)
    with pytest.raises(PoleError):
        box_sum(s, LatticeBox((0,), (3,)))
    with pytest.raises(PoleError):
        s.term((2,))
    assert s.term((1,)) != 0


def test_structural_zeros_skip_cleanly():
    q = 0.5
    # 1/(q; q)_k vanishes for k < 0, so the bilateral sum is the unilateral one
    s = one_phi_zero(0.3, 0.4, q)
    a = box_sum(s, LatticeBox((-5,), (60,))).value
    b = sum_unilateral(s).value
    assert abs(a - b) <= 1e-14


def test_exact_terminating_sum():
    q = Fraction(1, 3)
    # (q^-3 z; q)_3 via the q-binomial theorem with a = q^-3
    # termination is detected through total-index factors
    s = LatticeSummand(q=q, z=(Fraction(1),), vwp=None, axis_num=((),), axis_den=((q,),),
                       total_num=(q**-3,), w=Fraction(2))
    res = sum_terminating_exact(s, 50)
    assert res.value == (1 - 2 * q**-3) * (1 - 2 * q**-2) * (1 - 2 * q**-1)
    assert res.error == 0
    assert res.value == direct_box_sum(s, LatticeBox((0,), (6,)))


def test_exact_non_terminating_raises():
    q = Fraction(1, 3)
    s = LatticeSummand(q=q, z=(Fraction(1),), vwp=None, axis_num=((Fraction(1, 5),),),
                       axis_den=((q,),), total_num=(Fraction(2, 7),), w=Fraction(1, 2))
    with pytest.raises(ConvergenceError):
        sum_terminating_exact(s, 8)


def test_bilateral_point_budget():
    s = LatticeSummand(q=0.9, z=(1.0, 2.0), vwp=None, axis_num=((0.5,), (0.5,)),
                       axis_den=((0.4,), (0.4,)), w=0.95, vandermonde=False)
    with pytest.raises(ConvergenceError, match="box instability"):
        sum_bilateral(s, TailConfig(), max_points=5000)


def test_fixed_box_is_not_grown():
    s = one_phi_zero(0.3, 0.6, 0.5)
    box = LatticeBox((0,), (5,))
    res = sum_bilateral(s, box=box, adaptive=False)
    assert res.box == box
    assert res.error > 1e-6  # a truncated sum must report its tail


def test_mismatched_box():
    with pytest.raises(ValueError):
        box_sum(one_phi_zero(0.3, 0.6, 0.5), LatticeBox.cube(2, 0, 3))
    with pytest.raises(ValueError):
        one_phi_zero(0.3, 0.6, 0.5).term((1, 2))
