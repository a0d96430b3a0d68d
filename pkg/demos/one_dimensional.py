"""Walk through the one-dimensional identities at a single parameter point.

Run with ``python demos/one_dimensional.py``.
"""

from __future__ import annotations

from fractions import Fraction

from vwpsum import classical as cl
from vwpsum.core import qpoch, relative_residual

# A q-shifted factorial carries its zero/pole order next to the finite part,
# so terminating and singular cases are visible rather than silently 0 or inf.
q = Fraction(1, 3)
print("(q^-2; q)_4 ->", qpoch(q**-2, q, 4).kind)
print("(q^2; q)_-3 ->", qpoch(q**2, q, -3).kind)
print("(2; q)_-2   =", qpoch(Fraction(2), q, -2).scalar())

# Rogers' very-well-poised 6phi5 sum: series side against product side.
rp = cl.Rogers65Params(a=0.2, b=0.8, c=0.9, d=3.0, q=0.4)
lhs, rhs = cl.rogers_65_lhs(rp), cl.rogers_65_rhs(rp)
print(f"\n6phi5   lhs {lhs.real:.15f}  rhs {rhs.real:.15f}  residual {relative_residual(lhs, rhs):.1e}")

# The 8phi7 sum with the extra c parameters, and Shukla's bilateral 8psi8.
sp = cl.ShuklaParams(a=0.2, b=0.5 + 0.2j, c=0.7, e=0.8, f=0.9, g=3.0, q=0.4)
print(f"8phi7   residual {relative_residual(cl.eval_87_lhs(sp), cl.eval_87_rhs(sp)):.1e}")
lhs = cl.shukla_88_lhs(sp)
for form, rhs in ((1, cl.shukla_88_rhs_form1(sp)), (2, cl.shukla_88_rhs_form2(sp))):
    print(f"8psi8   form {form} residual {relative_residual(lhs, rhs):.1e}")

# As c -> 0 the 8psi8 tends to Bailey's 6psi6 sum; the gap shrinks linearly in c.
limit_lhs, _ = cl.bailey_66_limit(sp)
for c in (1e-3, 1e-4, 1e-5):
    gap = abs(cl.shukla_88_lhs(cl.ShuklaParams(0.2, 0.5 + 0.2j, c, 0.8, 0.9, 3.0, 0.4)) - limit_lhs)
    print(f"c = {c:.0e}: distance to the 6psi6 limit {gap:.2e}")

# The derivation replayed: each stage is a rewriting of the previous value.
report = cl.proof_replay_1d(sp)
print("\nreplay of the 8phi7 derivation")
for stage in report.stages:
    print(f"  {stage.name:<12s} {stage.residual:.1e}  {stage.detail}")

# b = a q^-m truncates the bilateral series from below; the chain of
# rewritings lands on the bilateral closed form for every m.
for m in range(4):
    rep = cl.specialization_check_1d(sp, m)
    print(f"m = {m}: worst stage residual {rep.max_residual:.1e}")
