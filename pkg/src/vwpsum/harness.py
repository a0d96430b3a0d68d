"""Identity registry, seeded parameter sampling, and verification reports."""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
import statistics
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from . import arseries as ar
from . import classical as cl
from .core import (
    DEFAULT_TAIL,
    InfeasibleDomain,
    QSeriesError,
    TailConfig,
    inf_product,
    relative_residual,
)
from .lattice import LatticeBox

Q_MAX = 0.9  # keeps geometric tails short; samplers reject larger |q|
MARGIN_N = 40
ALGEBRAIC_TOL = 1e-10  # float mode of the finite rational identities
MAX_ATTEMPTS = 100_000
LIMIT_CS = (1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class SampleConfig:
    seed: int = 0
    count: int = 10
    rho: float = 0.7
    pole_margin: float = 1e-4
    q_range: tuple = (0.2, 0.6)

    def __post_init__(self):
        object.__setattr__(self, "q_range", tuple(float(v) for v in self.q_range))
        lo, hi = self.q_range
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 < lo <= hi < 1:
            raise ValueError("q_range must be an interval inside (0, 1)")
        if self.count < 1:
            raise ValueError("count must be positive")
        if not self.pole_margin > 0:
            raise ValueError("pole_margin must be positive")


@dataclass
class Entry:
    name: str
    multi: bool
    exact: bool
    sample: Callable
    evaluate: Callable
    required: tuple
    tolerance: Callable
    bilateral: bool = False
    sample_exact: Callable | None = None


REGISTRY: dict[str, Entry] = {}


@dataclass(frozen=True)
class IdentityCase:
    name: str
    r: int = 1
    mode: str = "float"

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise ValueError(f"unknown identity {self.name!r}")
        entry = REGISTRY[self.name]
        if self.mode not in ("float", "exact"):
            raise ValueError("mode must be 'float' or 'exact'")
        if self.mode == "exact" and not entry.exact:
            raise ValueError(f"{self.name} is not exact-capable")
        if self.r < 1 or (not entry.multi and self.r != 1):
            raise ValueError(f"{self.name} needs r = 1" if not entry.multi else "r must be >= 1")

    @property
    def entry(self) -> Entry:
        return REGISTRY[self.name]

    def tolerance(self) -> float:
        return 0.0 if self.mode == "exact" else self.entry.tolerance(self.r)


# --- sampling helpers ------------------------------------------------------


def _cx(rng, lo: float, hi: float) -> complex:
    mod = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    return cmath.rect(mod, rng.uniform(-math.pi, math.pi))


def _qdraw(rng, cfg: SampleConfig) -> complex:
    return cmath.rect(rng.uniform(*cfg.q_range), rng.uniform(-math.pi, math.pi))


def _zdraw(rng, r: int) -> tuple:
    return tuple(_cx(rng, 0.5, 2.0) for _ in range(r))


def _rat(rng, lo: int = 1, hi: int = 9, positive: bool = False) -> Fraction:
    v = Fraction(int(rng.integers(lo, hi + 1)), int(rng.integers(1, hi + 1)))
    return v if positive or rng.random() < 0.5 else -v


def _qrat(rng) -> Fraction:
    return Fraction(int(rng.integers(1, 4)), int(rng.integers(4, 10)))


def _distinct(rng, r: int) -> tuple:
    while True:
        z = tuple(_rat(rng) for _ in range(r))
        if len(set(z)) == r:
            return z


def margins_ok(q: complex, series: Sequence, singles: Sequence, margin: float,
               n_lo: int, n_hi: int = MARGIN_N) -> bool:
    """Pole-margin test ``|1 - x q^n| >= margin (1 + |x q^n|)``.

    ``series`` bases are tested for ``n_lo <= n <= n_hi``, ``singles`` at n = 0.
    """
    q = complex(q)
    if series:
        n = np.arange(n_lo, n_hi + 1)
        xs = np.asarray([complex(x) for x in series])[:, None] * q ** n[None, :]
        if np.any(np.abs(1 - xs) < margin * (1 + np.abs(xs))):
            return False
    if singles:
        xs = np.asarray([complex(x) for x in singles])
        if np.any(np.abs(1 - xs) < margin * (1 + np.abs(xs))):
            return False
    return True


def _z_ratios(z):
    return [z[i] / z[j] for i in range(len(z)) for j in range(len(z)) if i != j]


def _prod(values):
    out = 1
    for v in values:
        out = out * v
    return out


# --- per-family samplers (float) --------------------------------------------


def _s_rogers(rng, cfg, r):
    q = _qdraw(rng, cfg)
    a = _cx(rng, 0.1, 1.5)
    b, c, d = (_cx(rng, 0.4, 3.0) for _ in range(3))
    if abs(q) > Q_MAX or abs(a * q / (b * c * d)) > cfg.rho:
        return None
    series = [a * q / b, a * q / c, a * q / d, a * q / (b * c * d)]
    return dict(a=a, b=b, c=c, d=d, q=q), series, [a], 0


def _s_eq87(rng, cfg, r):
    q = _qdraw(rng, cfg)
    a = _cx(rng, 0.1, 1.5)
    c = _cx(rng, 0.3, 3.0)
    e, f, g = (_cx(rng, 0.4, 3.0) for _ in range(3))
    if abs(q) > Q_MAX or abs(a / (e * f * g)) > cfg.rho:
        return None
    series = [a * q / c, c / q, a * q / e, a * q / f, a * q / g, a / (e * f * g), c / (a * q)]
    singles = [a, a * q * q, c / (g * q), e * f / a, e * f * g / a, a / (e * f)]
    return dict(a=a, b=a, c=c, e=e, f=f, g=g, q=q), series, singles, 0


def _shukla_draw(rng, cfg):
    q = _qdraw(rng, cfg)
    a = _cx(rng, 0.1, 1.5)
    b, c, e, f, g = (_cx(rng, 0.4, 3.0) for _ in range(5))
    return q, a, b, c, e, f, g


def _s_shukla(rng, cfg, r):
    q, a, b, c, e, f, g = _shukla_draw(rng, cfg)
    arg = a * a / (b * e * f * g)
    if abs(q) > Q_MAX or abs(arg) > cfg.rho:
        return None
    series = [a * q / b, a * q / c, c / q, a * q / e, a * q / f, a * q / g, b, c, a * q * q / c,
              e, f, g, q / b, q / e, q / f, q / g, arg]
    singles = [a, b * q / c, b * c / (a * q), 1 / arg, c / (a * q), c / (g * q), e * f / a,
               c / (b * q)]
    return dict(a=a, b=b, c=c, e=e, f=f, g=g, q=q), series, singles, -MARGIN_N


def _s_special1d(rng, cfg, r):
    q, a, _, c, e, f, g = _shukla_draw(rng, cfg)
    m = int(rng.integers(0, 5))
    if abs(q) > Q_MAX or abs(a * q**m / (e * f * g)) > cfg.rho:
        return None
    series = [a * q / c, c / q, a * q / e, a * q / f, a * q / g, c, a * q * q / c, e, f, g,
              q / e, q / f, q / g, q / a, a / (e * f * g), c / (a * q), a, a / (e * f)]
    singles = [c / (g * q), e * f / a]
    return dict(a=a, b=a * q**(-m), c=c, e=e, f=f, g=g, q=q, m=m), series, singles, -MARGIN_N


def _s_milne(rng, cfg, r):
    q = _qdraw(rng, cfg)
    a = _cx(rng, 0.1, 1.2)
    b = tuple(_cx(rng, 0.4, 2.5) for _ in range(r))
    c, d = _cx(rng, 0.4, 3.0), _cx(rng, 0.4, 3.0)
    z = _zdraw(rng, r)
    B = _prod(b)
    if abs(q) > Q_MAX or abs(a * q / (B * c * d)) > cfg.rho:
        return None
    series = _z_ratios(z) + [a * zi * q / d for zi in z] + [a * zi * q / bi for zi, bi in zip(z, b)]
    series += [a * q / c, a * q / (B * c * d)]
    return dict(r=r, a=a, b=b, c=c, d=d, z=z, q=q), series, [a * zi for zi in z], 0


def _ar_draw(rng, cfg, r):
    q = _qdraw(rng, cfg)
    a = _cx(rng, 0.1, 1.2)
    b = tuple(_cx(rng, 0.4, 2.5) for _ in range(r))
    e = tuple(_cx(rng, 0.4, 2.5) for _ in range(r))
    c = _cx(rng, 0.3, 3.0)
    f, g = _cx(rng, 0.4, 3.0), _cx(rng, 0.4, 3.0)
    z = _zdraw(rng, r)
    return dict(r=r, a=a, b=b, c=c, e=e, f=f, g=g, z=z, q=q)


def _p88_bases(p):
    a, c, e, f, g, z, q, r = (p[k] for k in ("a", "c", "e", "f", "g", "z", "q", "r"))
    E = _prod(e)
    series = _z_ratios(z) + [a * zi * q / g for zi in z] + [a * zi * q / ei for zi, ei in zip(z, e)]
    series += [a * q / f, a / (E * f * g)] + [a * zi for zi in z]
    singles = [c / q, c / (g * q), E * f / a, E * f * g / a, c * E * f / (a * q)]
    singles += [a * zi * q / c for zi in z] + [c / (a * zi * q) for zi in z]
    return series, singles


def _s_p88(rng, cfg, r):
    p = _ar_draw(rng, cfg, r)
    p["b"] = tuple(p["a"] for _ in range(r))
    E = _prod(p["e"])
    if abs(p["q"]) > Q_MAX or abs(p["a"] / (E * p["f"] * p["g"])) > cfg.rho:
        return None
    series, singles = _p88_bases(p)
    return p, series, singles, 0


def _m88_bases(p, with_b=True):
    a, b, c, e, f, g, z, q, r = (p[k] for k in ("a", "b", "c", "e", "f", "g", "z", "q", "r"))
    E = _prod(e)
    series = _z_ratios(z) + [a * zi * q / g for zi in z] + [a * zi * q / ei for zi, ei in zip(z, e)]
    series += [a * q / f, g, q / g] + [e[j] * z[i] / z[j] for i in range(r) for j in range(r)]
    series += [z[i] * q / (e[i] * z[j]) for i in range(r) for j in range(r)]
    series += [f * zi for zi in z] + [q / (f * zi) for zi in z] + [a * zi for zi in z]
    singles = [c / q, c / (g * q), E * f / a] + [a * zi * q / c for zi in z]
    singles += [c / (a * zi * q) for zi in z]
    if with_b:
        series += [a * z[i] * q / (b[j] * z[j]) for i in range(r) for j in range(r)]
        series += [bi * zi for bi, zi in zip(b, z)] + [q / (bi * zi) for bi, zi in zip(b, z)]
        series += [a ** (r + 1) / (_prod(b) * E * f * g)]
        singles += [c / (bi * zi * q) for bi, zi in zip(b, z)]
    return series, singles


def _s_m88(rng, cfg, r):
    p = _ar_draw(rng, cfg, r)
    arg = p["a"] ** (r + 1) / (_prod(p["b"]) * _prod(p["e"]) * p["f"] * p["g"])
    if abs(p["q"]) > Q_MAX or abs(arg) > cfg.rho:
        return None
    series, singles = _m88_bases(p)
    return p, series, singles, -MARGIN_N


def _m88_accept(p, cfg) -> bool:
    """Reject samples whose empirical negative-branch term ratio exceeds rho."""
    try:
        return ar.negative_branch_ratio(_ar(p)) <= cfg.rho
    except (QSeriesError, ZeroDivisionError):
        return False


def _s_special_rd(rng, cfg, r):
    p = _ar_draw(rng, cfg, r)
    m = tuple(int(v) for v in rng.integers(0, 3, size=r))
    a, q = p["a"], p["q"]
    E = _prod(p["e"])
    if abs(q) > Q_MAX or abs(a * q ** sum(m) / (E * p["f"] * p["g"])) > cfg.rho:
        return None
    p["b"] = tuple(a * q ** (-mi) for mi in m)
    p["m"] = m
    series, singles = _m88_bases(p, with_b=False)
    series += [q / (a * zi) for zi in p["z"]] + [p["c"] / q, a / (E * p["f"] * p["g"])]
    series += [a * zi * q / p["c"] for zi in p["z"]] + [p["c"] / (a * zi * q) for zi in p["z"]]
    return p, series, singles, -MARGIN_N


def _s_pbz2(rng, cfg, r):
    q = _qdraw(rng, cfg)
    a, c = _cx(rng, 0.2, 3.0), _cx(rng, 0.2, 3.0)
    if abs(q) > Q_MAX:
        return None
    return dict(a=a, c=c, q=q, k=int(rng.integers(-6, 9))), [], [c / q, a * q / c], 0


def _s_pfi(rng, cfg, r):
    t, u = _cx(rng, 0.2, 3.0), _cx(rng, 0.2, 3.0)
    y = tuple(_cx(rng, 0.3, 3.0) for _ in range(r))
    z = _zdraw(rng, r)
    singles = [u] + [t * zi for zi in z] + _z_ratios(z)
    return dict(r=r, t=t, u=u, y=y, z=z), [], singles, 0


def _s_rewritten(rng, cfg, r):
    p = _ar_draw(rng, cfg, r)
    if abs(p["q"]) > Q_MAX:
        return None
    p["variant"] = "c-split" if rng.random() < 0.5 else "e-product"
    p["k"] = tuple(int(v) for v in rng.integers(-3, 7, size=r))
    a, c, e, f, z, q = (p[k] for k in ("a", "c", "e", "f", "z", "q"))
    E = _prod(e)
    singles = [c / q, c * E * f / (a * q)] + [a * zi * q / c for zi in z]
    singles += [c / (a * zi * q) for zi in z] + _z_ratios(z)
    return p, [], singles, 0


def _s_prefactor_1d(rng, cfg, r):
    q = _qdraw(rng, cfg)
    a, c = _cx(rng, 0.1, 2.0), _cx(rng, 0.2, 3.0)
    e, f, g = (_cx(rng, 0.3, 3.0) for _ in range(3))
    if abs(q) > Q_MAX:
        return None
    singles = [c / q, a * q / c, e * f * g / a, a / (e * f), c / (g * q), e * f / a, c / (a * q)]
    return dict(a=a, c=c, e=e, f=f, g=g, q=q), [], singles, 0


def _s_prefactor_rd(rng, cfg, r):
    p = _ar_draw(rng, cfg, r)
    if abs(p["q"]) > Q_MAX:
        return None
    E = _prod(p["e"])
    a, c, f, g, q = p["a"], p["c"], p["f"], p["g"], p["q"]
    return p, [], [c / q, E * f * g / a, a / (E * f * g)], 0


def _s_lemma312(rng, cfg, r):
    q = _qdraw(rng, cfg)
    if abs(q) > Q_MAX:
        return None
    z = _zdraw(rng, r)
    m = tuple(int(v) for v in rng.integers(0, 4, size=r))
    return dict(r=r, z=z, m=m, q=q), _z_ratios(z), [], -MARGIN_N


def _s_eproducts(rng, cfg, r):
    p = _ar_draw(rng, cfg, r)
    if abs(p["q"]) > Q_MAX:
        return None
    p["m"] = tuple(int(v) for v in rng.integers(0, 4, size=r))
    e, z = p["e"], p["z"]
    series = _z_ratios(z) + [e[j] * z[i] / z[j] for i in range(r) for j in range(r)]
    series += [z[i] * p["q"] / (e[i] * z[j]) for i in range(r) for j in range(r)]
    return p, series, [], -MARGIN_N


# --- exact samplers -----------------------------------------------------------


def _x_pbz2(rng, r):
    return dict(a=_rat(rng), c=_rat(rng), q=_qrat(rng), k=int(rng.integers(-6, 9)))


def _x_pfi(rng, r):
    return dict(r=r, t=_rat(rng), u=_rat(rng), y=tuple(_rat(rng) for _ in range(r)),
                z=_distinct(rng, r))


def _x_ar(rng, r):
    return dict(r=r, a=_rat(rng), b=tuple(_rat(rng) for _ in range(r)), c=_rat(rng),
                e=tuple(_rat(rng) for _ in range(r)), f=_rat(rng), g=_rat(rng),
                z=_distinct(rng, r), q=_qrat(rng))


def _x_rewritten(rng, r):
    p = _x_ar(rng, r)
    p["variant"] = "c-split" if rng.random() < 0.5 else "e-product"
    p["k"] = tuple(int(v) for v in rng.integers(-3, 7, size=r))
    return p


def _x_prefactor_1d(rng, r):
    return dict(a=_rat(rng), c=_rat(rng), e=_rat(rng), f=_rat(rng), g=_rat(rng), q=_qrat(rng))


def _x_lemma312(rng, r):
    return dict(r=r, z=_distinct(rng, r), m=tuple(int(v) for v in rng.integers(0, 4, size=r)),
                q=_qrat(rng))


def _x_eproducts(rng, r):
    p = _x_ar(rng, r)
    p["m"] = tuple(int(v) for v in rng.integers(0, 4, size=r))
    return p


def _x_milne(rng, r):
    q = _qrat(rng)
    N = int(rng.integers(1, 4))
    return dict(r=r, a=_rat(rng), b=tuple(_rat(rng) for _ in range(r)), c=_rat(rng),
                d=q ** (-N), z=_distinct(rng, r), q=q)


# --- typed parameter builders --------------------------------------------------


def _ar(p) -> ar.ArParams:
    r = int(p.get("r", len(p["z"])))
    b = p.get("b", tuple(p["a"] for _ in range(r)))
    return ar.ArParams(r, p["a"], b, p["c"], p["e"], p["f"], p["g"], p["z"], p["q"])


def _shukla(p) -> cl.ShuklaParams:
    return cl.ShuklaParams(p["a"], p.get("b", p["a"]), p["c"], p["e"], p["f"], p["g"], p["q"])


def _milne(p) -> ar.Phi65rParams:
    return ar.Phi65rParams.milne(p["a"], p["b"], p["c"], p["d"], p["z"], p["q"])


def _pfi(p) -> ar.PartialFractionInput:
    return ar.PartialFractionInput(len(p["z"]), p["t"], p["u"], p["y"], p["z"])


# --- evaluators --------------------------------------------------------------


def _rhs_est(value, n_products: int, tail: TailConfig) -> float:
    return float(abs(value)) * tail.eps_tail * n_products


def _e_rogers(p, tail):
    rp = cl.Rogers65Params(p["a"], p["b"], p["c"], p["d"], p["q"])
    lhs, est = cl.eval_phi(cl.rogers_65_series(rp), tail)
    rhs = cl.rogers_65_rhs(rp, tail)
    return dict(lhs=lhs, rhs=rhs, est_lhs=est, est_rhs=_rhs_est(rhs, 8, tail))


def _e_eq87(p, tail):
    sp = _shukla(p)
    lhs, est = cl.eval_phi(cl.eq87_series(sp), tail)
    rhs = cl.eval_87_rhs(sp, tail)
    return dict(lhs=lhs, rhs=rhs, est_lhs=est, est_rhs=_rhs_est(rhs, 8, tail))


def _shukla_lhs(sp, tail):
    if not abs(sp.argument) < 1:
        raise cl.DomainError("annulus |a^2/befg| < 1 violated")
    return cl.eval_psi(cl.shukla_88_series(sp), tail)


def _e_shukla2(p, tail):
    sp = _shukla(p)
    lhs, est = _shukla_lhs(sp, tail)
    rhs = cl.shukla_88_rhs_form2(sp, tail)
    return dict(lhs=lhs, rhs=rhs, est_lhs=est, est_rhs=_rhs_est(rhs, 18, tail))


def _e_shukla1(p, tail):
    sp = _shukla(p)
    lhs, est = _shukla_lhs(sp, tail)
    rhs = cl.shukla_88_rhs_form1(sp, tail)
    form2 = cl.shukla_88_rhs_form2(sp, tail)
    gap = float(relative_residual(rhs, form2))
    flags = [] if gap < 1e-12 else [f"closed-form mismatch (form 1 vs form 2: {gap:.3g})"]
    return dict(lhs=lhs, rhs=rhs, est_lhs=est, est_rhs=_rhs_est(rhs, 18, tail),
                extra={"form_gap": gap}, flags=flags)


def _e_bailey(p, tail):
    sp = _shukla({"c": 1, **p})  # c plays no role in the limit
    lhs, rhs = cl.bailey_66_limit(sp, tail, form=2)
    _, rhs1 = cl.bailey_66_limit(sp, tail, form=1)
    est = cl.eval_psi(cl.bailey_66_series(sp), tail)[1]
    return dict(lhs=lhs, rhs=rhs, est_lhs=est, est_rhs=_rhs_est(rhs, 18, tail),
                extra={"form_gap": float(relative_residual(rhs1, rhs))})


def _e_milne(p, tail):
    mp = _milne(p)
    lhs, est = ar.eval_6Phi5r(mp, tail)
    if isinstance(lhs, Fraction):
        N = cl.q_exponent(mp.d, mp.q)
        rhs = ar.milne_65_rhs_terminating(mp, -N)
        return dict(lhs=lhs, rhs=rhs, est_lhs=0.0, est_rhs=0.0)
    rhs = ar.milne_65_rhs(mp, tail)
    return dict(lhs=lhs, rhs=rhs, est_lhs=est, est_rhs=_rhs_est(rhs, 4 + 4 * mp.r, tail))


def _e_p88(p, tail):
    ap = _ar(p)
    res = ar.eval_p88_lhs_sum(ap, tail)
    rhs = ar.eval_p88_rhs(ap, tail)
    return dict(lhs=res.value, rhs=rhs, est_lhs=res.error,
                est_rhs=_rhs_est(rhs, 4 + 4 * ap.r, tail), box=res.box)


def _e_m88(p, tail, box=None):
    ap = _ar(p)
    res = ar.eval_m88_lhs(ap, box, tail, adaptive=box is None)
    rhs = ar.eval_m88_rhs(ap, tail)
    return dict(lhs=res.value, rhs=rhs, est_lhs=res.error,
                est_rhs=_rhs_est(rhs, 6 + 4 * ap.r * ap.r + 8 * ap.r, tail), box=res.box)


def _e_gustafson(p, tail, box=None):
    ap = _ar({"c": 1, **p})  # c plays no role in the limit
    res, rhs = ar.gustafson_66_limit(ap, tail, box, adaptive=box is None)
    return dict(lhs=res.value, rhs=rhs, est_lhs=res.error,
                est_rhs=_rhs_est(rhs, 6 + 4 * ap.r * ap.r + 8 * ap.r, tail), box=res.box)


def _e_pbz2(p, tail):
    lhs, rhs = cl.pbz2_sides(p["a"], p["c"], p["q"], int(p["k"]))
    return dict(lhs=lhs, rhs=rhs)


def _e_pfd(p, tail):
    lhs, rhs = ar.pfd_sides(_pfi(p))
    return dict(lhs=lhs, rhs=rhs)


def _e_lemma_pbz(p, tail):
    inp = _pfi(p)
    lhs, rhs = ar.lemma_pbz_sides(inp)
    inner = ar.pfd_inner_check(inp)
    return dict(lhs=lhs, rhs=rhs, residual=max(relative_residual(lhs, rhs), inner),
                extra={"inner_residual": inner})


def _e_rewritten(p, tail):
    lhs, rhs = ar.lemma_pbz_rewritten_sides(_ar(p), p["variant"], p.get("k"))
    return dict(lhs=lhs, rhs=rhs)


def _e_prefactor_1d(p, tail):
    lhs, rhs = cl.prefactor_identity_1d(p["a"], p["c"], p["e"], p["f"], p["g"], p["q"])
    return dict(lhs=lhs, rhs=rhs)


def _e_prefactor_rd(p, tail):
    lhs, rhs = ar.prefactor_identity_rd(_ar(p))
    return dict(lhs=lhs, rhs=rhs)


def _e_lemma312(p, tail):
    lhs, rhs = ar.lemma_312_sides(p["z"], p["m"], p["q"])
    return dict(lhs=lhs, rhs=rhs)


def _e_eproducts(p, tail):
    (l1, r1), (l2, r2) = ar.e_product_identity_sides(_ar(p), p["m"])
    res1, res2 = relative_residual(l1, r1), relative_residual(l2, r2)
    return dict(lhs=l1, rhs=r1, residual=max(res1, res2),
                extra={"second_lhs": l2, "second_rhs": r2, "second_residual": res2})


def _staged(report, est=0.0):
    stages = [dict(name=s.name, value=s.value, residual=s.residual, detail=s.detail)
              for s in report.stages]
    return dict(lhs=report.reference, rhs=report.final, residual=report.max_residual,
                est_lhs=est, stages=stages, extra=dict(report.notes))


def _e_replay1d(p, tail):
    return _staged(cl.proof_replay_1d(_shukla(p), tail))


def _e_replayrd(p, tail):
    return _staged(ar.proof_replay_rd(_ar(p), tail))


def _e_special1d(p, tail):
    sp = replace(_shukla(p), b=p["a"] * p["q"] ** (-int(p["m"])))
    return _staged(cl.specialization_check_1d(sp, int(p["m"]), tail))


def _e_specialrd(p, tail):
    report = ar.specialization_check_rd(_ar(p), p["m"], tail)
    return _staged(report, float(report.notes.get("est_bilateral", 0.0)))


def _tol_milne(r):
    return 1e-8 if r <= 2 else 1e-7


def _const(v):
    return lambda r: v


_SHUKLA_KEYS = ("a", "b", "c", "e", "f", "g", "q")
_AR_KEYS = ("a", "b", "c", "e", "f", "g", "z", "q")
_P88_KEYS = ("a", "c", "e", "f", "g", "z", "q")

for _e in [
    Entry("rogers65", False, False, _s_rogers, _e_rogers, ("a", "b", "c", "d", "q"), _const(1e-9)),
    Entry("eq87", False, False, _s_eq87, _e_eq87, ("a", "c", "e", "f", "g", "q"), _const(1e-9)),
    Entry("shukla88-form1", False, False, _s_shukla, _e_shukla1, _SHUKLA_KEYS, _const(1e-8), True),
    Entry("shukla88-form2", False, False, _s_shukla, _e_shukla2, _SHUKLA_KEYS, _const(1e-8), True),
    Entry("bailey66-limit", False, False, _s_shukla, _e_bailey, ("a", "b", "e", "f", "g", "q"),
          _const(1e-8), True),
    Entry("milne65", True, True, _s_milne, _e_milne, ("a", "b", "c", "d", "z", "q"), _tol_milne,
          sample_exact=_x_milne),
    Entry("p88", True, False, _s_p88, _e_p88, _P88_KEYS, _const(1e-7)),
    Entry("m88", True, False, _s_m88, _e_m88, _AR_KEYS, _const(1e-6), True),
    Entry("gustafson66-limit", True, False, _s_m88, _e_gustafson,
          ("a", "b", "e", "f", "g", "z", "q"), _const(1e-6), True),
    Entry("pbz2", False, True, _s_pbz2, _e_pbz2, ("a", "c", "q", "k"), _const(ALGEBRAIC_TOL),
          sample_exact=_x_pbz2),
    Entry("pfd", True, True, _s_pfi, _e_pfd, ("t", "y", "z"), _const(ALGEBRAIC_TOL),
          sample_exact=_x_pfi),
    Entry("lemma-pbz", True, True, _s_pfi, _e_lemma_pbz, ("t", "u", "y", "z"),
          _const(ALGEBRAIC_TOL), sample_exact=_x_pfi),
    Entry("lemma-pbz-rewritten", True, True, _s_rewritten, _e_rewritten,
          ("a", "c", "e", "f", "z", "q", "variant"), _const(ALGEBRAIC_TOL),
          sample_exact=_x_rewritten),
    Entry("prefactor-1d", False, True, _s_prefactor_1d, _e_prefactor_1d,
          ("a", "c", "e", "f", "g", "q"), _const(ALGEBRAIC_TOL), sample_exact=_x_prefactor_1d),
    Entry("prefactor-rd", True, True, _s_prefactor_rd, _e_prefactor_rd,
          ("a", "c", "e", "f", "g", "q"), _const(ALGEBRAIC_TOL), sample_exact=_x_ar),
    Entry("lemma312", True, True, _s_lemma312, _e_lemma312, ("z", "m", "q"),
          _const(ALGEBRAIC_TOL), sample_exact=_x_lemma312),
    Entry("e-products", True, True, _s_eproducts, _e_eproducts, ("e", "z", "q", "m"),
          _const(ALGEBRAIC_TOL), sample_exact=_x_eproducts),
    Entry("replay-1d", False, False, _s_eq87, _e_replay1d, ("a", "c", "e", "f", "g", "q"),
          _const(1e-9)),
    Entry("replay-rd", True, False, _s_p88, _e_replayrd, _P88_KEYS, _const(1e-7)),
    Entry("special-1d", False, False, _s_special1d, _e_special1d,
          ("a", "c", "e", "f", "g", "q", "m"), _const(1e-8), True),
    Entry("special-rd", True, False, _s_special_rd, _e_specialrd,
          ("a", "c", "e", "f", "g", "z", "q", "m"), _const(1e-6), True),
]:
    REGISTRY[_e.name] = _e

EXACT_CAPABLE = tuple(n for n, e in REGISTRY.items() if e.exact)


# --- sampling -----------------------------------------------------------------


def case_rng(case: IdentityCase, seed: int) -> np.random.Generator:
    key = zlib.crc32(f"{case.name}/{case.mode}".encode())
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, key, case.r])


def sample_params(case: IdentityCase, cfg: SampleConfig) -> Iterator[dict]:
    """Yield ``cfg.count`` in-domain parameter sets, deterministically in ``cfg.seed``."""
    rng = case_rng(case, cfg.seed)
    entry = case.entry
    produced = attempts = 0
    while produced < cfg.count:
        attempts += 1
        if attempts >= MAX_ATTEMPTS and produced / attempts < 0.01:
            raise InfeasibleDomain(
                f"{case.name}: rejection rate above 99% over {attempts} attempts")
        if case.mode == "exact":
            p = entry.sample_exact(rng, case.r)
            if "z" in p and "q" in p and any(cl.q_exponent(x, p["q"], MARGIN_N) is not None
                                             for x in _z_ratios(p["z"])):
                continue
            try:
                out = entry.evaluate(p, DEFAULT_TAIL)
            except (QSeriesError, ZeroDivisionError):
                continue
            if out.get("lhs") is None:
                continue
        else:
            drawn = entry.sample(rng, cfg, case.r)
            if drawn is None:
                continue
            p, series, singles, n_lo = drawn
            if not margins_ok(p.get("q", 0), series, singles, cfg.pole_margin, n_lo):
                continue
            if case.name in ("m88", "gustafson66-limit") and not _m88_accept(p, cfg):
                continue
        produced += 1
        yield p


# --- checking -----------------------------------------------------------------


BOX_CASES = ("m88", "gustafson66-limit")


def evaluate(case: IdentityCase, params: dict, tail: TailConfig = DEFAULT_TAIL,
             box: LatticeBox | None = None) -> dict:
    """Raw evaluation of one case; errors propagate."""
    if box is None:
        return case.entry.evaluate(params, tail)
    if case.name not in BOX_CASES:
        raise ValueError(f"a fixed box only applies to {', '.join(BOX_CASES)}")
    if box.r != case.r:
        raise ValueError(f"box has {box.r} axes, expected {case.r}")
    return case.entry.evaluate(params, tail, box=box)


def new_record(case: IdentityCase, params: dict, tol: float, seed: int | None = None,
               index: int | None = None) -> dict:
    return dict(identity=case.name, r=case.r, mode=case.mode, seed=seed, index=index,
                params=params, lhs=None, rhs=None, residual=None, est_lhs=0.0, est_rhs=0.0,
                tolerance=tol, flags=[], passed=False)


def finish_record(record: dict, out: dict) -> dict:
    """Fill a record from an evaluator result and decide pass/fail."""
    tol = record["tolerance"]
    residual = out.get("residual")
    if residual is None:
        residual = relative_residual(out["lhs"], out["rhs"])
    record.update(lhs=out["lhs"], rhs=out["rhs"], residual=residual,
                  est_lhs=float(out.get("est_lhs", 0.0)), est_rhs=float(out.get("est_rhs", 0.0)))
    if "stages" in out:
        record["stages"] = out["stages"]
        failed = [st["name"] for st in out["stages"] if not st["residual"] <= tol]
        if failed:
            record["flags"].append(f"stage failure: {failed[0]}")
    if "box" in out:
        record["box"] = [list(out["box"].lower), list(out["box"].upper)]
    if out.get("extra"):
        record["extra"] = out["extra"]
    record["flags"].extend(out.get("flags", []))
    exact = record["mode"] == "exact"
    if not exact and record["est_lhs"] + record["est_rhs"] >= tol:
        record["flags"].append("truncation estimates exceed tolerance")
    ok = residual == 0 if exact else residual <= tol
    if not ok:
        record["flags"].append(f"residual {float(residual):.3g} above tolerance {tol:.3g}")
    hard = ("error", "stage", "truncation")
    record["passed"] = bool(ok) and not any(f.startswith(hard) for f in record["flags"])
    return record


def check_identity(case: IdentityCase, params: dict, tail: TailConfig = DEFAULT_TAIL,
                   seed: int | None = None, index: int | None = None,
                   tol: float | None = None, box: LatticeBox | None = None) -> dict:
    """Evaluate both sides for one parameter set; errors become flags."""
    tol = case.tolerance() if tol is None else tol
    record = new_record(case, params, tol, seed, index)
    try:
        out = evaluate(case, params, tail, box)
    except (QSeriesError, ZeroDivisionError, ValueError, OverflowError) as exc:
        stage = getattr(exc, "stage", None)
        where = f" [stage {stage}]" if stage else ""
        record["flags"].append(f"error{where}: {type(exc).__name__}: {exc}")
        return record
    return finish_record(record, out)


def ismail_grid_check(case_name: str, max_m: int, params: dict,
                      tail: TailConfig = DEFAULT_TAIL, r: int | None = None) -> list[dict]:
    """Run the specialization chain on every grid point ``m <= max_m``."""
    if max_m < 0:
        raise ValueError("max_m must be nonnegative")
    out = []
    if case_name == "special-1d":
        case = IdentityCase("special-1d")
        for m in range(max_m + 1):
            p = dict(params, m=m, b=params["a"] * params["q"] ** (-m))
            out.append(check_identity(case, p, tail, index=m))
    elif case_name == "special-rd":
        r = r or len(params["z"])
        case = IdentityCase("special-rd", r)
        for i, m in enumerate(np.ndindex(*([max_m + 1] * r))):
            m = tuple(int(v) for v in m)
            p = dict(params, r=r, m=m, b=tuple(params["a"] * params["q"] ** (-v) for v in m))
            out.append(check_identity(case, p, tail, index=i))
    else:
        raise ValueError("grid checks exist for special-1d and special-rd")
    return out


def limit_rate_check(case_name: str, params: dict, cs: Sequence[float] = LIMIT_CS,
                     tail: TailConfig = DEFAULT_TAIL) -> dict:
    """Distance between the identity at ``c`` and its c -> 0 limit for decreasing ``|c|``.

    The direction of ``c`` in the complex plane is taken from ``params['c']``.
    Both sides are compared separately; ``ratios`` holds successive quotients
    of the larger of the two distances.
    """
    phase = params["c"] / abs(params["c"]) if params.get("c") else 1
    dists = []
    if case_name == "bailey66-limit":
        sp = _shukla(params)
        llim, rlim = cl.bailey_66_limit(sp, tail)
        for c in cs:
            spc = replace(sp, c=c * phase)
            dl = abs(cl.shukla_88_lhs(spc, tail) - llim) / abs(llim)
            dr = abs(cl.shukla_88_rhs_form2(spc, tail) - rlim) / abs(rlim)
            dists.append((float(dl), float(dr)))
    elif case_name == "gustafson66-limit":
        ap = _ar(params)
        lres, rlim = ar.gustafson_66_limit(ap, tail)
        llim = lres.value
        for c in cs:
            apc = replace(ap, c=c * phase)
            dl = abs(ar.eval_m88_lhs(apc, None, tail).value - llim) / abs(llim)
            dr = abs(ar.eval_m88_rhs(apc, tail) - rlim) / abs(rlim)
            dists.append((float(dl), float(dr)))
    else:
        raise ValueError("limit rates exist for bailey66-limit and gustafson66-limit")
    worst = [max(d) for d in dists]
    ratios = [worst[i] / worst[i + 1] for i in range(len(worst) - 1)]
    return dict(identity=case_name, cs=list(cs), distances=dists, ratios=ratios,
                passed=all(5 <= x <= 20 for x in ratios))


@dataclass
class VerificationReport:
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        cases = {k: v for k, v in self.summary.items() if not k.startswith("_")}
        return bool(cases) and all(v.get("flagged", 0) == 0 and "error" not in v
                                   for v in cases.values())


def _run_one(args):
    case, params, tail, seed, index, tol, box = args
    return check_identity(case, params, tail, seed, index, tol, box)


def summarize(case: IdentityCase, records: list, tol: float) -> dict:
    res = [float(r["residual"]) for r in records if r["residual"] is not None]
    flagged = sum(1 for r in records if not r["passed"])
    return dict(identity=case.name, r=case.r, mode=case.mode, count=len(records),
                passed=len(records) - flagged, flagged=flagged, tolerance=tol,
                max_residual=max(res) if res else None,
                median_residual=statistics.median(res) if res else None)


def run_suite(cases: Sequence[IdentityCase], cfg: SampleConfig, tail: TailConfig = DEFAULT_TAIL,
              workers: int = 1, tol: float | None = None,
              box: LatticeBox | None = None) -> VerificationReport:
    """Sample and check every case; failures are flagged, never raised."""
    if not cases:
        raise ValueError("run_suite needs at least one case")
    report = VerificationReport()
    jobs, spans = [], []
    for case in cases:
        key = f"{case.name}[r={case.r},{case.mode}]"
        try:
            params = list(sample_params(case, cfg))
        except InfeasibleDomain as exc:
            report.summary[key] = dict(identity=case.name, r=case.r, mode=case.mode, count=0,
                                       passed=0, flagged=0, error=f"infeasible-domain: {exc}")
            continue
        t = case.tolerance() if tol is None else tol
        spans.append((key, case, t, len(jobs), len(jobs) + len(params)))
        b = box if case.name in BOX_CASES else None
        jobs += [(case, p, tail, cfg.seed, i, t, b) for i, p in enumerate(params)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=1))
    else:
        records = [_run_one(j) for j in jobs]
    report.records = records
    for key, case, t, a, b in spans:
        report.summary[key] = summarize(case, records[a:b], t)
    report.summary["_run"] = dict(seed=cfg.seed, count=cfg.count, rho=cfg.rho,
                                  pole_margin=cfg.pole_margin, q_range=list(cfg.q_range),
                                  workers=workers, eps_tail=tail.eps_tail, window=tail.window,
                                  max_factors=tail.max_factors)
    return report


# --- serialization ------------------------------------------------------------


def to_jsonable(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "__dataclass_fields__"):
        return to_jsonable(asdict(value))
    return str(value)


CSV_FIELDS = ("identity", "r", "mode", "seed", "index", "residual", "tolerance", "passed",
              "est_lhs", "est_rhs", "lhs", "rhs", "flags", "params")


def render_report(report: VerificationReport, fmt: str = "jsonl") -> str:
    if fmt == "jsonl":
        lines = [json.dumps(to_jsonable(r), sort_keys=True) for r in report.records]
        lines.append(json.dumps(to_jsonable({"summary": report.summary}), sort_keys=True))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in report.records:
            row = {}
            for k in CSV_FIELDS:
                v = to_jsonable(r.get(k))
                row[k] = json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v
            writer.writerow(row)
        return buf.getvalue()
    raise ValueError("format must be jsonl or csv")


def write_report(report: VerificationReport, path: str, fmt: str = "jsonl") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_report(report, fmt))


# --- fixed reference points -----------------------------------------------------

# One in-domain point per family, used by the grid and replay commands when no
# parameters are given.
REFERENCE_POINTS: dict[str, dict] = {
    "1d": dict(a=0.2, b=0.2, c=0.7, e=0.8, f=0.9, g=3.0, q=0.4),
    "rd": dict(r=2, a=0.15, b=(0.15, 0.15), c=0.6, e=(0.7, 0.8), f=0.9, g=2.5, z=(1.0, 1.3),
               q=0.35),
}


def reference_point(case_name: str, r: int = 1) -> dict:
    entry = REGISTRY[case_name]
    if not entry.multi:
        return dict(REFERENCE_POINTS["1d"])
    base = REFERENCE_POINTS["rd"]
    if r == 2:
        return dict(base)
    z = tuple(1.0 + 0.3 * i for i in range(r))
    e = tuple(0.7 + 0.1 * i for i in range(r))
    return dict(base, r=r, z=z, e=e, b=tuple(base["a"] for _ in range(r)))


def product_tail(nums, dens, q, tail: TailConfig = DEFAULT_TAIL) -> float:
    return inf_product(nums, dens, q, tail)[1]
