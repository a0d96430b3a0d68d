"""A_{r-1} very-well-poised series: Milne's 6phi5 sum, the r-dimensional
8phi7 and 8psi8 summations, and the finite identities behind their proofs."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_TAIL,
    ConvergenceError,
    DomainError,
    PoleError,
    QPochValue,
    QSeriesError,
    Scalar,
    TailConfig,
    coerce,
    inf_product,
    is_exact,
    one_minus,
    qpoch,
    relative_residual,
)
from .lattice import (
    LatticeBox,
    LatticeSum,
    LatticeSummand,
    _build_tables,
    _eval_points,
    sum_bilateral,
    sum_terminating_exact,
    sum_unilateral,
)
from .stages import StagedReport


def _prod(values, start=1):
    out = start
    for v in values:
        out = out * v
    return out


@dataclass(frozen=True)
class Phi65rParams:
    r: int
    a: Scalar
    b: tuple
    c: Scalar
    d: Scalar
    z: tuple
    q: Scalar
    w: Scalar

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(self.b))
        object.__setattr__(self, "z", tuple(self.z))
        if len(self.b) != self.r or len(self.z) != self.r:
            raise ValueError("b and z must have r entries")

    @property
    def B(self) -> Scalar:
        return _prod(self.b)

    @classmethod
    def milne(cls, a, b, c, d, z, q) -> Phi65rParams:
        """Parameters with the summable argument ``w = aq/Bcd``."""
        b, z = tuple(b), tuple(z)
        return cls(len(b), a, b, c, d, z, q, a * q / (_prod(b) * c * d))


@dataclass(frozen=True)
class ArParams:
    r: int
    a: Scalar
    b: tuple
    c: Scalar
    e: tuple
    f: Scalar
    g: Scalar
    z: tuple
    q: Scalar

    def __post_init__(self):
        for name in ("b", "e", "z"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if len(getattr(self, name)) != self.r:
                raise ValueError(f"{name} must have r entries")

    @property
    def B(self) -> Scalar:
        return _prod(self.b)

    @property
    def E(self) -> Scalar:
        return _prod(self.e)

    @property
    def argument(self) -> Scalar:
        """The bilateral series argument ``a^{r+1}/BEfg``."""
        return self.a ** (self.r + 1) / (self.B * self.E * self.f * self.g)

    @property
    def unilateral_argument(self) -> Scalar:
        return self.a / (self.E * self.f * self.g)

    def permuted(self, perm: Sequence[int]) -> ArParams:
        return replace(self, b=tuple(self.b[i] for i in perm), e=tuple(self.e[i] for i in perm),
                       z=tuple(self.z[i] for i in perm))


@dataclass(frozen=True)
class PartialFractionInput:
    r: int
    t: Scalar
    u: Scalar
    y: tuple
    z: tuple

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(self.y))
        object.__setattr__(self, "z", tuple(self.z))
        if len(self.y) != self.r or len(self.z) != self.r:
            raise ValueError("y and z must have r entries")

    @property
    def Y(self) -> Scalar:
        return _prod(self.y)


def _common(*groups):
    """Coerce scalars and tuples of scalars to one arithmetic mode."""
    flat, shape = [], []
    for g in groups:
        if isinstance(g, (tuple, list)):
            shape.append(len(g))
            flat.extend(g)
        else:
            shape.append(None)
            flat.append(g)
    vals = coerce(flat)
    out, pos = [], 0
    for s in shape:
        if s is None:
            out.append(vals[pos])
            pos += 1
        else:
            out.append(tuple(vals[pos:pos + s]))
            pos += s
    return out


def vandermonde_factor(z: Sequence[Scalar], k: Sequence[int], q: Scalar) -> Scalar:
    """``prod_{1<=i<j<=r} (z_i q^{k_i} - z_j q^{k_j}) / (z_i - z_j)``."""
    z, q = _common(tuple(z), q)
    out = Fraction(1) if is_exact(*z, q) else 1 + 0j
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            if z[i] == z[j]:
                raise DomainError("coincident z_i in the Vandermonde factor")
            out *= (z[i] * q**k[i] - z[j] * q**k[j]) / (z[i] - z[j])
    return out


# --- the 6Phi5 series and Milne's summation ---------------------------------


def phi65r_summand(p: Phi65rParams) -> LatticeSummand:
    a, b, c, d, z, q, w = _common(p.a, p.b, p.c, p.d, p.z, p.q, p.w)
    r = p.r
    return LatticeSummand(
        q=q, z=z, vwp=tuple(a * zi for zi in z),
        axis_num=tuple(tuple(b[j] * z[i] / z[j] for j in range(r)) + (c * z[i],) for i in range(r)),
        axis_den=tuple(tuple(q * z[i] / z[j] for j in range(r)) + (a * z[i] * q / d,)
                       for i in range(r)),
        total_num=tuple(a * zi for zi in z) + (d,),
        total_den=tuple(a * z[i] * q / b[i] for i in range(r)) + (a * q / c,),
        w=w)


def term_6Phi5r(p: Phi65rParams, k: Sequence[int]) -> Scalar:
    return phi65r_summand(p).term(k)


def _terminates_total(values, q) -> bool:
    from .classical import q_exponent
    return any((n := q_exponent(v, q)) is not None and n <= 0 for v in values)


def eval_6Phi5r(p: Phi65rParams, cfg: TailConfig = DEFAULT_TAIL) -> tuple[Scalar, float]:
    s = phi65r_summand(p)
    if s.is_exact():
        res = sum_terminating_exact(s, cfg.max_factors)
        return res.value, 0.0
    if not abs(p.w) < 1 and not _terminates_total([p.d, *(bj for bj in p.b)], p.q):
        raise DomainError(f"radius |w| < 1 violated (|w| = {abs(p.w):.6g})")
    res = sum_unilateral(s, cfg)
    return res.value, res.error


def milne_65_rhs(p: Phi65rParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    """Product side of Milne's summation (requires ``w = aq/Bcd``)."""
    a, b, c, d, z, q = _common(p.a, p.b, p.c, p.d, p.z, p.q)
    B = _prod(b)
    nums = [a * q / (B * c), a * q / (c * d)]
    dens = [a * q / (B * c * d), a * q / c]
    for zi, bi in zip(z, b):
        nums += [a * zi * q, a * zi * q / (bi * d)]
        dens += [a * zi * q / d, a * zi * q / bi]
    return inf_product(nums, dens, q, cfg)[0]


def milne_65_rhs_terminating(p: Phi65rParams, N: int) -> Scalar:
    """Finite form of the product side when ``d = q^{-N}``.

    With ``d = q^{-N}``, ``(x/d;q)_inf/(x;q)_inf = (x;q)_N`` after pairing
    ``aq/cd`` with ``aq/c`` and ``az_iq/b_id`` with ``az_iq/b_i`` (and the
    reverse pairing for the two denominators), which leaves
    ``(aq/Bc;q)_N prod_i (az_iq;q)_N / ((aq/c;q)_N prod_i (az_iq/b_i;q)_N)``.
    """
    a, b, c, z, q = _common(p.a, p.b, p.c, p.z, p.q)
    B = _prod(b)
    val = qpoch(a * q / (B * c), q, N) / qpoch(a * q / c, q, N)
    for zi, bi in zip(z, b):
        val = val * qpoch(a * zi * q, q, N) / qpoch(a * zi * q / bi, q, N)
    return val.scalar()


# --- the r-dimensional 8phi7 and 8psi8 --------------------------------------


def _c_block(a, c, z, q, r):
    if c == 0:
        raise DomainError("c = 0 needs the limit summand (c_limit=True)")
    axis_lin = tuple((a * z[i] * q / c,) for i in range(r))
    total_lin = (c / q,)
    scale = 1 / (one_minus(c / q, "c/q") * _prod(one_minus(a * zi * q / c, "az_iq/c") for zi in z))
    return axis_lin, total_lin, scale


def p88_summand(p: ArParams, c_limit: bool = False) -> LatticeSummand:
    """Summand of the unilateral r-dimensional 8phi7 (``b`` is not used).

    With ``c_limit`` the c-block is replaced by its c -> 0 limit ``q^{|k|}``:
    ``(1 - c q^{|k|-1})/(1 - c/q) -> 1`` and each
    ``(1 - az_iq^{k_i+1}/c)/(1 - az_iq/c) -> q^{k_i}``.
    """
    a, c, e, f, g, z, q = _common(p.a, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    E = _prod(e)
    w = a / (E * f * g)
    extra = {}
    if c_limit:
        w = w * q
    else:
        axis_lin, total_lin, scale = _c_block(a, c, z, q, r)
        extra = dict(axis_lin=axis_lin, total_lin=total_lin, scale=scale)
    return LatticeSummand(
        q=q, z=z, vwp=tuple(a * zi for zi in z),
        axis_num=tuple(tuple(e[j] * z[i] / z[j] for j in range(r)) + (f * z[i],) for i in range(r)),
        axis_den=tuple(tuple(q * z[i] / z[j] for j in range(r)) + (a * z[i] * q / g,)
                       for i in range(r)),
        total_num=tuple(a * zi for zi in z) + (g,),
        total_den=tuple(a * z[i] * q / e[i] for i in range(r)) + (a * q / f,),
        w=w, **extra)


def m88_summand(p: ArParams, c_limit: bool = False) -> LatticeSummand:
    """Summand of the bilateral r-dimensional 8psi8 (``c_limit`` as for p88)."""
    a, b, c, e, f, g, z, q = _common(p.a, p.b, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    B, E = _prod(b), _prod(e)
    w = a ** (r + 1) / (B * E * f * g)
    extra = {}
    if c_limit:
        w = w * q
    else:
        axis_lin, total_lin, scale = _c_block(a, c, z, q, r)
        extra = dict(axis_lin=axis_lin, total_lin=total_lin, scale=scale)
    return LatticeSummand(
        q=q, z=z, vwp=tuple(a * zi for zi in z),
        axis_num=tuple(tuple(e[j] * z[i] / z[j] for j in range(r)) + (f * z[i],) for i in range(r)),
        axis_den=tuple(tuple(a * z[i] * q / (b[j] * z[j]) for j in range(r)) + (a * z[i] * q / g,)
                       for i in range(r)),
        total_num=tuple(b[i] * z[i] for i in range(r)) + (g,),
        total_den=tuple(a * z[i] * q / e[i] for i in range(r)) + (a * q / f,),
        w=w, **extra)


def eval_p88_lhs_sum(p: ArParams, cfg: TailConfig = DEFAULT_TAIL, c_limit: bool = False) -> LatticeSum:
    s = p88_summand(p, c_limit)
    if s.is_exact():
        return sum_terminating_exact(s, cfg.max_factors)
    if not abs(s.w) < 1:
        raise DomainError(f"|a/Efg| < 1 violated (|a/Efg| = {abs(p.unilateral_argument):.6g})")
    return sum_unilateral(s, cfg)


def eval_p88_lhs(p: ArParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    return eval_p88_lhs_sum(p, cfg).value


def p88_prefactor(p: ArParams) -> Scalar:
    a, c, e, f, g, z, q = _common(p.a, p.c, p.e, p.f, p.g, p.z, p.q)
    E = _prod(e)
    ratio = ((1 - 1 / g) * (1 - c * f / (a * q))
             / (one_minus(c / (g * q), "c/gq") * one_minus(E * f / a, "Ef/a")))
    for ei, zi in zip(e, z):
        ratio = ratio * (1 - c * ei / (a * zi * q)) / one_minus(c / (a * zi * q), "c/az_iq")
    return (1 - ratio) * (1 - c / (g * q)) / one_minus(c / q, "c/q")


def _p88_products(p: ArParams, cfg: TailConfig) -> Scalar:
    a, e, f, g, z, q = _common(p.a, p.e, p.f, p.g, p.z, p.q)
    E = _prod(e)
    nums = [a / (E * f), a * q / (f * g)]
    dens = [a / (E * f * g), a * q / f]
    for ei, zi in zip(e, z):
        nums += [a * zi * q, a * zi * q / (ei * g)]
        dens += [a * zi * q / ei, a * zi * q / g]
    return inf_product(nums, dens, q, cfg)[0]


def eval_p88_rhs(p: ArParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    return p88_prefactor(p) * _p88_products(p, cfg)


def p88_c0_reduction(p: ArParams, cfg: TailConfig = DEFAULT_TAIL) -> dict[str, Scalar]:
    """The c = 0 case of the r-dimensional 8phi7 next to Milne's summation.

    At ``c = 0`` the summand equals the 6Phi5 summand with
    ``(b, c, d, w) -> (e, f, g, aq/Efg)``; the closed form has no ``1/c``
    and is evaluated directly.
    """
    p0 = replace(p, c=0 * p.c)
    milne = Phi65rParams.milne(p.a, p.e, p.f, p.g, p.z, p.q)
    return {"p88_rhs_c0": eval_p88_rhs(p0, cfg), "milne_rhs": milne_65_rhs(milne, cfg),
            "p88_lhs_c0": eval_p88_lhs_sum(p, cfg, c_limit=True).value,
            "milne_lhs": eval_6Phi5r(milne, cfg)[0]}


def negative_branch_ratio(p: ArParams, t: int = 40, c_limit: bool = False) -> float:
    """Largest empirical term ratio ``|S((t+1)d)/S(t d)|`` over the directions ``d = -e_i``."""
    s = m88_summand(p, c_limit)
    r = p.r
    lo, hi = (-(t + 1),) * r, (0,) * r
    tb = _build_tables(s, lo, hi)
    worst = 0.0
    for i in range(r):
        K = np.zeros((2, r), dtype=np.int64)
        K[0, i], K[1, i] = -t, -(t + 1)
        _, lm = _eval_points(s, tb, K)
        if np.isfinite(lm[0]) and np.isfinite(lm[1]):
            worst = max(worst, float(np.exp(lm[1] - lm[0])))
    return worst


def eval_m88_lhs(p: ArParams, box: LatticeBox | None = None, cfg: TailConfig = DEFAULT_TAIL,
                 c_limit: bool = False, adaptive: bool = True) -> LatticeSum:
    arg = p.argument * (p.q if c_limit else 1)
    if not abs(arg) < 1:
        raise DomainError("annulus |a^{r+1}/BEfg| < 1 violated "
                          f"(|a^(r+1)/BEfg| = {abs(p.argument):.6g})")
    return sum_bilateral(m88_summand(p, c_limit), cfg, box, adaptive=adaptive)


def _m88_products(p: ArParams, cfg: TailConfig) -> Scalar:
    a, b, e, f, g, z, q = _common(p.a, p.b, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    B, E = _prod(b), _prod(e)
    nums = [a / (E * f), a * q / (f * g), a**r * q / (B * g)]
    dens = [a ** (r + 1) / (B * E * f * g), a * q / f, q / g]
    for i in range(r):
        for j in range(r):
            nums += [q * z[i] / z[j], a * z[i] * q / (b[j] * e[i] * z[j])]
            dens += [a * z[i] * q / (b[j] * z[j]), z[i] * q / (e[i] * z[j])]
    for i in range(r):
        nums += [a * z[i] * q, q / (a * z[i]), a * z[i] * q / (e[i] * g), a * q / (b[i] * f * z[i])]
        dens += [a * z[i] * q / e[i], a * z[i] * q / g, q / (b[i] * z[i]), q / (f * z[i])]
    return inf_product(nums, dens, q, cfg)[0]


def m88_prefactor(p: ArParams) -> Scalar:
    a, b, c, e, f, g, z, q = _common(p.a, p.b, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    B, E = _prod(b), _prod(e)
    ratio = ((1 - a**r / (B * g)) * (1 - c * f / (a * q))
             / (one_minus(c / (g * q), "c/gq") * one_minus(E * f / a, "Ef/a")))
    outer = (1 - c / (g * q)) / one_minus(c / q, "c/q")
    for i in range(r):
        ratio = ratio * (1 - c * e[i] / (a * z[i] * q)) / one_minus(c / (b[i] * z[i] * q),
                                                                   "c/b_iz_iq")
        outer = outer * (1 - c / (b[i] * z[i] * q)) / one_minus(c / (a * z[i] * q), "c/az_iq")
    return (1 - ratio) * outer


def eval_m88_rhs(p: ArParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    return m88_prefactor(p) * _m88_products(p, cfg)


def gustafson_66_limit(p: ArParams, cfg: TailConfig = DEFAULT_TAIL,
                       box: LatticeBox | None = None,
                       adaptive: bool = True) -> tuple[LatticeSum, Scalar]:
    """Analytic c -> 0 limits of both sides of the r-dimensional 8psi8.

    Left: the c-block becomes ``q^{|k|}`` so the argument is
    ``a^{r+1}q/BEfg``.  Right: every factor containing ``c`` tends to 1,
    so the prefactor becomes ``1 - (1 - a^r/Bg)/(1 - Ef/a)``.
    """
    lhs = eval_m88_lhs(p, box, cfg, c_limit=True, adaptive=adaptive)
    a, B, E, f, g = p.a, p.B, p.E, p.f, p.g
    pre = 1 - (1 - a**p.r / (B * g)) / one_minus(E * f / a, "Ef/a")
    return lhs, pre * _m88_products(p, cfg)


# --- finite identities -------------------------------------------------------


def _pfd_sum(t, y, z, r, extra=None, cleared=False):
    """``sum_l prod_i (1 - y_i z_i/z_l) / ((1 - t z_l) prod_{i!=l} (1 - z_i/z_l)) * extra(l)``.

    With ``cleared`` every summand is multiplied by ``prod_i (1 - t z_i)``,
    i.e. ``1/(1 - t z_l)`` is replaced by ``prod_{i!=l} (1 - t z_i)``.
    """
    total = 0 * t
    for l in range(r):
        num = _prod((1 - y[i] * z[i] / z[l]) for i in range(r))
        den = _prod(one_minus(z[i] / z[l], "z_i/z_l") for i in range(r) if i != l)
        if cleared:
            num = num * _prod((1 - t * z[i]) for i in range(r) if i != l)
        else:
            den = den * one_minus(t * z[l], "tz_l")
        term = num / den
        if extra is not None:
            term = term * extra(l)
        total = total + term
    return total


def _needs_clearing(t, z) -> bool:
    # an exact rational t z_i = 1 puts the same simple pole on both sides;
    # the identity is then compared with that denominator cleared
    return is_exact(t, *z) and any(t * zi == 1 for zi in z)


def pfd_sides(inp: PartialFractionInput, cleared: bool | None = None) -> tuple[Scalar, Scalar]:
    t, u, y, z = _common(inp.t, inp.u, inp.y, inp.z)
    r = inp.r
    if cleared is None:
        cleared = _needs_clearing(t, z)
    Y = _prod(y)
    if cleared:
        lhs = _prod((1 - t * z[i] * y[i]) for i in range(r))
        rhs = Y * _prod((1 - t * zi) for zi in z) + _pfd_sum(t, y, z, r, cleared=True)
        return lhs, rhs
    lhs = _prod((1 - t * z[i] * y[i]) / one_minus(t * z[i], "tz_i") for i in range(r))
    return lhs, Y + _pfd_sum(t, y, z, r)


def pfd_check(inp: PartialFractionInput) -> Scalar:
    lhs, rhs = pfd_sides(inp)
    return relative_residual(lhs, rhs)


def pfd_inner_check(inp: PartialFractionInput) -> Scalar:
    """Residual of ``1 - Y = sum_l prod_i (1 - y_i z_i/z_l) / prod_{i!=l} (1 - z_i/z_l)``."""
    _, u, y, z = _common(inp.t, inp.u, inp.y, inp.z)
    Y = _prod(y)
    rhs = _pfd_sum(0 * u, y, z, inp.r)
    return relative_residual(1 - Y, rhs)


def lemma_pbz_sides(inp: PartialFractionInput, cleared: bool | None = None) -> tuple[Scalar, Scalar]:
    t, u, y, z = _common(inp.t, inp.u, inp.y, inp.z)
    r = inp.r
    if cleared is None:
        cleared = _needs_clearing(t, z)
    Y = _prod(y)
    du = one_minus(u, "u")
    if cleared:
        lhs = (1 - u * Y) / du * _prod((1 - t * z[i] * y[i]) for i in range(r))
        rhs = (Y * _prod((1 - t * zi) for zi in z)
               + _pfd_sum(t, y, z, r, extra=lambda l: (1 - u * Y * t * z[l]) / du, cleared=True))
        return lhs, rhs
    lhs = (1 - u * Y) / du * _prod((1 - t * z[i] * y[i]) / one_minus(t * z[i], "tz_i")
                                   for i in range(r))
    rhs = Y + _pfd_sum(t, y, z, r, extra=lambda l: (1 - u * Y * t * z[l]) / du)
    return lhs, rhs


def lemma_pbz_check(inp: PartialFractionInput) -> Scalar:
    """Residual of the lemma; the inner ``1 - Y`` step is checked as well and
    the larger of the two residuals is returned."""
    lhs, rhs = lemma_pbz_sides(inp)
    main = relative_residual(lhs, rhs)
    inner = pfd_inner_check(inp)
    return max(main, inner)


def lemma_pbz_rewritten_sides(p: ArParams, variant: str, k: Sequence[int] | None = None):
    a, c, e, f, z, q = _common(p.a, p.c, p.e, p.f, p.z, p.q)
    r = p.r
    if variant == "c-split":
        if k is None:
            raise ValueError("the c-split instance needs a lattice index k")
        n = sum(k)
        den = one_minus(c / q, "c/q")
        lhs = (1 - c * q ** (n - 1)) / den
        for i in range(r):
            lhs = lhs * (1 - a * z[i] * q ** (k[i] + 1) / c) / one_minus(a * z[i] * q / c, "az_iq/c")
        rhs = q**n
        for l in range(r):
            num = (1 - a * z[l] * q**n) * _prod((1 - q ** k[i] * z[i] / z[l]) for i in range(r))
            dd = den * one_minus(a * z[l] * q / c, "az_lq/c") * _prod(
                one_minus(z[i] / z[l], "z_i/z_l") for i in range(r) if i != l)
            rhs = rhs + num / dd
        return lhs, rhs
    if variant == "e-product":
        E = _prod(e)
        dE = one_minus(c * E * f / (a * q), "cEf/aq")
        lhs = 0 * a
        for l in range(r):
            num = (1 - f * z[l]) * _prod((1 - e[i] * z[l] / z[i]) for i in range(r))
            dd = dE * one_minus(a * z[l] * q / c, "az_lq/c") * _prod(
                one_minus(z[l] / z[i], "z_l/z_i") for i in range(r) if i != l)
            lhs = lhs + num / dd
        rhs = 1 - (1 - c * f / (a * q)) / dE * _prod(
            (1 - c * e[i] / (a * z[i] * q)) / one_minus(c / (a * z[i] * q), "c/az_iq")
            for i in range(r))
        return lhs, rhs
    raise ValueError("variant must be 'c-split' or 'e-product'")


def lemma_pbz_rewritten_check(p: ArParams, variant: str, k: Sequence[int] | None = None) -> Scalar:
    lhs, rhs = lemma_pbz_rewritten_sides(p, variant, k)
    return relative_residual(lhs, rhs)


def prefactor_identity_rd(p: ArParams) -> tuple[Scalar, Scalar]:
    a, c, e, f, g, q = _common(p.a, p.c, p.e, p.f, p.g, p.q)
    E = _prod(e)
    lhs = 1 - (1 - g) * (1 - c * E * f / (a * q)) / (one_minus(c / q, "c/q")
                                                    * one_minus(E * f * g / a, "Efg/a"))
    rhs = ((1 - c / (g * q)) * (1 - a / (E * f))
           / (one_minus(c / q, "c/q") * one_minus(a / (E * f * g), "a/Efg")))
    return lhs, rhs


def prefactor_identity_check_rd(p: ArParams) -> Scalar:
    lhs, rhs = prefactor_identity_rd(p)
    return relative_residual(lhs, rhs)


def _binom2(n: int) -> int:
    return n * (n - 1) // 2


def _regular(v: QPochValue, what: str) -> Scalar:
    if v.order != 0:
        raise PoleError(f"{what} has a {v.kind} of order {v.multiplicity}")
    return v.value


def lemma_312_sides(z: Sequence[Scalar], m: Sequence[int], q: Scalar) -> tuple[Scalar, Scalar]:
    z, q = _common(tuple(z), q)
    r = len(z)
    m = [int(v) for v in m]
    if any(v < 0 for v in m):
        raise ValueError("m must be nonnegative")
    M = sum(m)
    lhs = 1
    for i in range(r):
        for j in range(r):
            lhs = lhs * _regular(qpoch(q * z[i] / z[j], q, m[j] - m[i]), "(qz_i/z_j;q)")
    # exponents kept as exact integers
    sign = -1 if ((r - 1) * M) % 2 else 1
    qexp = -(M + 1) * M // 2 + r * sum((mi + 1) * mi // 2 for mi in m)
    rhs = sign * q**qexp
    for i in range(r):
        rhs = rhs * z[i] ** (M - r * m[i])
    for i in range(r):
        for j in range(i + 1, r):
            rhs = rhs * (z[i] * q ** (-m[i]) - z[j] * q ** (-m[j])) / (z[i] - z[j])
    return lhs, rhs


def lemma_312_check(z: Sequence[Scalar], m: Sequence[int], q: Scalar) -> Scalar:
    lhs, rhs = lemma_312_sides(z, m, q)
    return relative_residual(lhs, rhs)


def e_product_identity_sides(p: ArParams, m: Sequence[int]):
    e, z, q = _common(p.e, p.z, p.q)
    r = p.r
    m = [int(v) for v in m]
    M = sum(m)
    E = _prod(e)
    l1 = 1
    for i in range(r):
        for j in range(r):
            l1 = l1 * _regular(qpoch(e[j] * z[i] / z[j], q, -m[i]), "(e_jz_i/z_j;q)")
    sign = -1 if (r * M) % 2 else 1
    r1 = sign * E ** (-M) * q ** (r * sum((mi + 1) * mi // 2 for mi in m))
    for i in range(r):
        r1 = r1 * z[i] ** (M - r * m[i])
    for i in range(r):
        for j in range(r):
            r1 = r1 / _regular(qpoch(z[i] * q / (e[i] * z[j]), q, m[j]), "(z_iq/e_iz_j;q)")
    l2 = 1
    r2 = 1
    for i in range(r):
        for j in range(r):
            l2 = l2 / _regular(qpoch(q ** (1 + m[j]) * z[i] / z[j], q, -m[i]), "(q^{1+m_j}z_i/z_j;q)")
            r2 = r2 * (_regular(qpoch(q * z[i] / z[j], q, m[j]), "(qz_i/z_j;q)")
                       / _regular(qpoch(q * z[i] / z[j], q, m[j] - m[i]), "(qz_i/z_j;q)"))
    return (l1, r1), (l2, r2)


def e_product_identity_checks(p: ArParams, m: Sequence[int]) -> tuple[Scalar, Scalar]:
    (l1, r1), (l2, r2) = e_product_identity_sides(p, m)
    return relative_residual(l1, r1), relative_residual(l2, r2)


# --- specialization chain and proof replay ---------------------------------


def _tagged(stage: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except QSeriesError as exc:
        exc.stage = exc.stage or stage
        raise
    except ZeroDivisionError as exc:
        raise PoleError(str(exc), stage) from exc


def specialized_params_rd(p: ArParams, m: Sequence[int]) -> ArParams:
    """``p`` with ``b_i = a q^{-m_i}``."""
    return replace(p, b=tuple(p.a * p.q ** (-int(mi)) for mi in m))


def shifted_p88_params(p: ArParams, m: Sequence[int]) -> ArParams:
    """``a -> aq^{-|m|}, c -> cq^{-|m|}, e_i -> e_iq^{-m_i}, g -> gq^{-|m|}, z_i -> z_iq^{-m_i}``."""
    q = p.q
    M = sum(m)
    s = q ** (-M)
    return replace(p, a=p.a * s, c=p.c * s, g=p.g * s,
                   e=tuple(ei * q ** (-mi) for ei, mi in zip(p.e, m)),
                   z=tuple(zi * q ** (-mi) for zi, mi in zip(p.z, m)))


def _truncated_summand(p: ArParams, m: Sequence[int]) -> LatticeSummand:
    """The bilateral summand at ``b_i = aq^{-m_i}`` written with those values substituted."""
    a, c, e, f, g, z, q = _common(p.a, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    E = _prod(e)
    M = sum(m)
    axis_lin, total_lin, scale = _c_block(a, c, z, q, r)
    return LatticeSummand(
        q=q, z=z, vwp=tuple(a * zi for zi in z),
        axis_num=tuple(tuple(e[j] * z[i] / z[j] for j in range(r)) + (f * z[i],) for i in range(r)),
        axis_den=tuple(tuple(q ** (1 + m[j]) * z[i] / z[j] for j in range(r)) + (a * z[i] * q / g,)
                       for i in range(r)),
        total_num=tuple(a * z[i] * q ** (-m[i]) for i in range(r)) + (g,),
        total_den=tuple(a * z[i] * q / e[i] for i in range(r)) + (a * q / f,),
        axis_lin=axis_lin, total_lin=total_lin, scale=scale, w=a * q**M / (E * f * g))


def _simplified_display(p: ArParams, m: Sequence[int], cfg: TailConfig) -> Scalar:
    a, c, e, f, g, z, q = _common(p.a, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    M = sum(m)
    E = _prod(e)
    val = (-1) ** M * q ** (-_binom2(M)) * (f * g / a) ** M
    for i in range(r):
        val *= (1 - a * z[i] * q ** (-m[i] - M)) / (1 - a * z[i])
    for i in range(r):
        for j in range(r):
            val *= qpoch(q * z[i] / z[j], q, m[j]).scalar() / qpoch(z[i] * q / (e[i] * z[j]), q, m[j]).scalar()
    for i in range(r):
        val *= (qpoch(a * z[i] * q ** (-m[i]), q, -M).scalar() * qpoch(f * z[i], q, -m[i]).scalar()
                / (qpoch(a * z[i] * q / e[i], q, -M).scalar()
                   * qpoch(a * z[i] * q / g, q, -m[i]).scalar()))
    val *= qpoch(g, q, -M).scalar() / qpoch(a * q / f, q, -M).scalar()
    val *= (1 - c * q ** (-M - 1)) / (1 - c / q)
    for i in range(r):
        val *= (1 - a * z[i] * q ** (1 - m[i]) / c) / (1 - a * z[i] * q / c)
    ratio = (1 - q**M / g) * (1 - c * f / (a * q)) / ((1 - c / (g * q)) * (1 - E * f / a))
    for i in range(r):
        ratio *= (1 - c * e[i] / (a * z[i] * q)) / (1 - c * q ** m[i] / (a * z[i] * q))
    val *= (1 - ratio) * (1 - c / (g * q)) / one_minus(c * q ** (-M - 1), "cq^{-|m|-1}")
    nums = [a / (E * f), a * q / (f * g)]
    dens = [a * q**M / (E * f * g), a * q ** (1 - M) / f]
    for i in range(r):
        nums += [a * z[i] * q ** (1 - m[i] - M), a * z[i] * q / (e[i] * g)]
        dens += [a * z[i] * q ** (1 - M) / e[i], a * z[i] * q ** (1 - m[i]) / g]
    return val * inf_product(nums, dens, q, cfg)[0]


def _transformed_display(p: ArParams, m: Sequence[int], cfg: TailConfig) -> Scalar:
    a, c, e, f, g, z, q = _common(p.a, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    M = sum(m)
    E = _prod(e)
    ratio = (1 - q**M / g) * (1 - c * f / (a * q)) / ((1 - c / (g * q)) * (1 - E * f / a))
    outer = (1 - c / (g * q)) / (1 - c / q)
    for i in range(r):
        ratio *= (1 - c * e[i] / (a * z[i] * q)) / (1 - c * q ** m[i] / (a * z[i] * q))
        outer *= (1 - c * q ** m[i] / (a * z[i] * q)) / (1 - c / (a * z[i] * q))
    nums = [a / (E * f), a * q / (f * g), q ** (1 + M) / g]
    dens = [a * q**M / (E * f * g), a * q / f, q / g]
    for i in range(r):
        for j in range(r):
            nums += [q * z[i] / z[j], z[i] * q ** (1 + m[j]) / (e[i] * z[j])]
            dens += [q ** (1 + m[j]) * z[i] / z[j], z[i] * q / (e[i] * z[j])]
    for i in range(r):
        nums += [a * z[i] * q, q / (a * z[i]), a * z[i] * q / (e[i] * g), q ** (1 + m[i]) / (f * z[i])]
        dens += [a * z[i] * q / e[i], a * z[i] * q / g, q ** (1 + m[i]) / (a * z[i]), q / (f * z[i])]
    return (1 - ratio) * outer * inf_product(nums, dens, q, cfg)[0]


def specialization_check_rd(p: ArParams, m: Sequence[int], cfg: TailConfig = DEFAULT_TAIL) -> StagedReport:
    """Check the r-dimensional 8psi8 at ``b_i = aq^{-m_i}`` through each rewriting.

    Stages: ``truncated`` (sum over ``k_i >= -m_i`` with b substituted),
    ``shifted`` (``k_i -> k_i - m_i``: the ``k = -m`` term times a p88 sum at
    shifted parameters), ``closed-form`` (that p88 sum summed),
    ``simplified`` (prefactor rewritten with the lattice product and e-product
    identities), ``transformed`` (merged product form) and ``rhs`` (the
    closed form of the bilateral sum at ``b_i = aq^{-m_i}``).
    """
    m = [int(v) for v in m]
    if len(m) != p.r or any(v < 0 for v in m):
        raise ValueError("m must have r nonnegative entries")
    sp = specialized_params_rd(p, m)
    bil = _tagged("bilateral", eval_m88_lhs, sp, None, cfg)
    report = StagedReport(bil.value)
    report.notes["box"] = (bil.box.lower, bil.box.upper)
    report.notes["est_bilateral"] = bil.error

    ts = _tagged("truncated", _truncated_summand, p, m)
    lower = tuple(-v for v in m)
    start = LatticeBox(lower, tuple(12 for _ in m))
    trunc = _tagged("truncated", sum_bilateral, ts, cfg, start)
    if any(lo < -mi for lo, mi in zip(trunc.box.lower, m)):
        # the lower faces were pushed out; they must be exactly empty
        outside = _tagged("truncated", _outside_mass, ts, trunc.box, m)
        report.notes["mass_below_lower_bounds"] = outside
    report.add("truncated", trunc.value, "terms with some k_i < -m_i vanish")

    pref = _tagged("shifted", ts.term, lower)
    shifted_p = shifted_p88_params(p, m)
    shifted_sum = _tagged("shifted", eval_p88_lhs, shifted_p, cfg)
    report.add("shifted", pref * shifted_sum, "k_i -> k_i - m_i")
    report.add("closed-form", pref * _tagged("closed-form", eval_p88_rhs, shifted_p, cfg),
               "unilateral summation at shifted parameters")
    report.add("simplified", _tagged("simplified", _simplified_display, p, m, cfg),
               "prefactor simplified by the product identities")
    report.add("transformed", _tagged("transformed", _transformed_display, p, m, cfg),
               "merged into the bilateral product form")
    report.add("rhs", _tagged("rhs", eval_m88_rhs, sp, cfg), "closed form at b_i = aq^-m_i")
    return report


def _outside_mass(s: LatticeSummand, box: LatticeBox, m: Sequence[int]) -> float:
    total = 0.0
    for k in box.points():
        if any(ki < -mi for ki, mi in zip(k, m)):
            total += abs(s.term(k))
    return total


def _split_summand(p: ArParams, l: int) -> LatticeSummand:
    """The l-th correction sum produced by the partial fraction split."""
    a, c, e, f, g, z, q = _common(p.a, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    base = p88_summand(p, c_limit=True)
    scale = 1 / (one_minus(c / q, "c/q") * one_minus(a * z[l] * q / c, "az_lq/c")
                 * _prod(one_minus(z[i] / z[l], "z_i/z_l") for i in range(r) if i != l))
    return replace(base, w=base.w / q, axis_lin=tuple((z[i] / z[l],) for i in range(r)),
                   total_lin=(a * z[l],), scale=scale)


def proof_replay_rd(p: ArParams, cfg: TailConfig = DEFAULT_TAIL) -> StagedReport:
    """Replay the derivation of the r-dimensional 8phi7 sum.

    Stages: ``split`` (the c-block expanded by the partial fraction lemma
    into 1 + r multisums), ``index-shift`` (``k_l -> k_l + 1`` in the l-th
    correction, giving a 6Phi5 with ``a -> aq, e_l -> e_lq, g -> gq,
    z_l -> z_lq``), ``milne`` (all 1 + r series summed by Milne's theorem),
    ``combined`` (collected over the common product), ``e-product`` (the
    l-sum closed by the second partial fraction instance) and ``final``
    (the closed form).
    """
    a, c, e, f, g, z, q = _common(p.a, p.c, p.e, p.f, p.g, p.z, p.q)
    r = p.r
    E = _prod(e)
    if not abs(a / (E * f * g)) < 1:
        raise DomainError("|a/Efg| < 1 violated", "series")
    lhs = _tagged("series", eval_p88_lhs, p, cfg)
    report = StagedReport(lhs)

    milne0 = Phi65rParams.milne(a, e, f, g, z, q)
    s0 = _tagged("split", eval_6Phi5r, milne0, cfg)[0]
    corrections = [_tagged("split", sum_unilateral, _split_summand(p, l), cfg).value
                   for l in range(r)]
    report.add("split", s0 + sum(corrections), "1 + r multisums")

    coeffs, shifted = [], []
    for l in range(r):
        C = (a * (1 - f * z[l]) * (1 - g) * (1 - a * z[l] * q * q)
             / (E * f * g * (1 - c / q) * (1 - a * z[l] * q / c) * (1 - a * z[l] * q / g)
                * (1 - a * q / f)))
        C *= _prod(1 - a * zi * q for zi in z) * _prod(1 - e[i] * z[l] / z[i] for i in range(r))
        C /= _prod(1 - a * z[i] * q / e[i] for i in range(r)) * _prod(
            1 - z[l] / z[i] for i in range(r) if i != l)
        el = tuple(e[i] * q if i == l else e[i] for i in range(r))
        zl = tuple(z[i] * q if i == l else z[i] for i in range(r))
        coeffs.append(C)
        shifted.append(Phi65rParams(r, a * q, el, f, g * q, zl, q, a / (E * f * g)))
    vals = [_tagged("index-shift", eval_6Phi5r, sp, cfg)[0] for sp in shifted]
    report.add("index-shift", s0 + sum(C * v for C, v in zip(coeffs, vals)),
               "k_l -> k_l + 1 in the l-th correction")

    m0 = _tagged("milne", milne_65_rhs, milne0, cfg)
    ml = [_tagged("milne", milne_65_rhs, sp, cfg) for sp in shifted]
    report.add("milne", m0 + sum(C * v for C, v in zip(coeffs, ml)), "Milne's summation applied")

    lsum = 0
    for l in range(r):
        num = (1 - f * z[l]) * (1 - g) * _prod(1 - e[i] * z[l] / z[i] for i in range(r))
        den = ((1 - c / q) * (1 - a * z[l] * q / c) * (1 - E * f * g / a)
               * _prod(1 - z[l] / z[i] for i in range(r) if i != l))
        lsum = lsum + num / den
    report.add("combined", (1 - lsum) * m0, "collected over the common product")

    inner = 1 - (1 - c * f / (a * q)) / (1 - c * E * f / (a * q)) * _prod(
        (1 - c * e[i] / (a * z[i] * q)) / (1 - c / (a * z[i] * q)) for i in range(r))
    pre = 1 - (1 - g) * (1 - c * E * f / (a * q)) / ((1 - c / q) * (1 - E * f * g / a)) * inner
    report.add("e-product", pre * m0, "l-sum closed by the partial fraction lemma")
    report.add("final", _tagged("final", eval_p88_rhs, p, cfg), "closed form")
    return report
