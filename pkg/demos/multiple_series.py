"""The r-dimensional sums at r = 2: lattice evaluation, limits and specializations.

Run with ``python demos/multiple_series.py``.
"""

from __future__ import annotations

import time

from vwpsum import arseries as ar
from vwpsum.core import relative_residual
from vwpsum.lattice import LatticeBox, box_sum, direct_box_sum

# Milne's 6phi5 sum over the cone k_i >= 0.
mp = ar.Phi65rParams.milne(0.3, (0.9, 1.1 + 0.3j), 1.4, 2.0, (1.0, 1.3), 0.4)
lhs, est = ar.eval_6Phi5r(mp)
print(f"6Phi5   residual {relative_residual(lhs, ar.milne_65_rhs(mp)):.1e}  (tail estimate {est:.1e})")

# The unilateral 8phi7 with the c-block, and its c = 0 collapse onto the 6Phi5.
p = ar.ArParams(2, 0.15, (0.15, 0.15), 0.6, (0.7, 0.8), 0.9, 2.5, (1.0, 1.3), 0.35)
print(f"8phi7   residual {relative_residual(ar.eval_p88_lhs(p), ar.eval_p88_rhs(p)):.1e}")
c0 = ar.p88_c0_reduction(p)
print(f"c = 0   8phi7 rhs {c0['p88_rhs_c0'].real:.12f}  6Phi5 rhs {c0['milne_rhs'].real:.12f}")

# The bilateral 8psi8 needs b != a to populate the negative directions.
pb = ar.ArParams(2, 0.5, (0.7, 0.6 + 0.2j), 0.6, (1.4, 1.2), 1.6, 2.2, (1.0, 1.3), 0.35)
res = ar.eval_m88_lhs(pb)
print(f"8psi8   residual {relative_residual(res.value, ar.eval_m88_rhs(pb)):.1e}"
      f"  box {res.box.lower}..{res.box.upper}")
print(f"        term ratio along -e_i {ar.negative_branch_ratio(pb, t=60):.4f},"
      f" |argument| {abs(pb.argument):.4f}")

# A fixed box that is too small leaves a visible tail.
small = ar.eval_m88_lhs(pb, LatticeBox.cube(2, -3, 4), adaptive=False)
print(f"box [-3,4]^2: residual {relative_residual(small.value, ar.eval_m88_rhs(pb)):.1e},"
      f" reported tail {small.error:.1e}")

# Cumulative log tables against term-by-term evaluation on the same box.
s = ar.m88_summand(pb)
box = LatticeBox.cube(2, -10, 20)
t0 = time.perf_counter()
fast = box_sum(s, box).value
t1 = time.perf_counter()
slow = direct_box_sum(s, box)
t2 = time.perf_counter()
print(f"\n961 terms: tables {1e3 * (t1 - t0):.1f} ms, direct {1e3 * (t2 - t1):.0f} ms,"
      f" relative difference {abs(fast - slow) / abs(slow):.1e}")

# Setting b_i = a q^-m_i cuts the lattice below -m_i; the chain of rewritings
# ends at the bilateral closed form.
for m in ((0, 0), (1, 0), (2, 1), (2, 2)):
    rep = ar.specialization_check_rd(p, m)
    print(f"m = {m}: " + ", ".join(f"{st.name} {st.residual:.0e}" for st in rep.stages))

rep = ar.proof_replay_rd(p)
print("\nreplay of the 8phi7 derivation")
for stage in rep.stages:
    print(f"  {stage.name:<12s} {stage.residual:.1e}  {stage.detail}")
