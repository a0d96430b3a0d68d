"""One-dimensional basic hypergeometric series and their summations.

Covers the unilateral ``t phi t-1`` and bilateral ``t psi t`` evaluators,
Rogers' nonterminating very-well-poised 6phi5 sum, the unilateral 8phi7
sum with the extra ``c`` parameters, both closed forms of Shukla's
very-well-poised 8psi8 sum, their Bailey 6psi6 limit, and stage-by-stage
replays of the one-dimensional proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .core import (
    DEFAULT_TAIL,
    EPS,
    ZERO_TOL,
    ConvergenceError,
    DomainError,
    PoleError,
    QPochValue,
    QSeriesError,
    Scalar,
    TailConfig,
    UnsupportedOperation,
    coerce,
    inf_product,
    is_exact,
    one_minus,
    qpoch_ratio,
    relative_residual,
)
from .stages import StagedReport


@dataclass(frozen=True)
class PhiSeriesSpec:
    """``sum_{k>=0} (upper)_k / (q, lower)_k z^k``.

    ``vwp`` (optional) multiplies term k by ``(1 - vwp q^{2k})/(1 - vwp)``;
    ``lin`` multiplies it by ``prod_v (1 - v q^k)``.
    """

    upper: tuple
    lower: tuple
    q: Scalar
    z: Scalar
    vwp: Scalar | None = None
    lin: tuple = ()

    def __post_init__(self):
        if len(self.upper) != len(self.lower) + 1:
            raise ValueError("a phi series needs one more upper than lower parameter")


@dataclass(frozen=True)
class PsiSeriesSpec:
    """``sum_{k in Z} (upper)_k / (lower)_k z^k`` with the same optional extras."""

    upper: tuple
    lower: tuple
    q: Scalar
    z: Scalar
    vwp: Scalar | None = None
    lin: tuple = ()

    def __post_init__(self):
        if len(self.upper) != len(self.lower):
            raise ValueError("a psi series needs as many upper as lower parameters")


def q_exponent(x: Scalar, q: Scalar, max_abs: int = 2000) -> int | None:
    """Return n with ``x == q**n`` (to rounding), or None."""
    if x == 0 or q == 0:
        return None
    lq = math.log(abs(q))
    if lq == 0:
        return None
    guess = round(math.log(abs(x)) / lq)
    for n in (guess - 1, guess, guess + 1):
        if abs(n) > max_abs:
            continue
        if is_exact(x, q):
            if Fraction(x) == Fraction(q) ** n:
                return n
        elif abs(x * q**(-n) - 1) <= 1e-11:
            return n
    return None


def _terminates_above(upper, q) -> bool:
    return any((n := q_exponent(u, q)) is not None and n <= 0 for u in upper)


def _terminates_below(lower, q) -> bool:
    return any((n := q_exponent(b, q)) is not None and n >= 1 for b in lower)


@dataclass
class _Branch:
    terms: list = field(default_factory=list)
    abs_sum: float = 0.0
    tail: float = 0.0
    structural_end: bool = False


def _run_branch(nums, dens, vwp, lin, z, q, cfg: TailConfig, direction: int,
                ratio: float, exact: bool) -> _Branch:
    """Accumulate one direction of a (bi)lateral series.

    The running product ``R_k = (nums)_k/(dens)_k z^k`` is updated one factor
    pair per step; each term is ``R_k`` times the optional vwp/linear factors.
    """
    out = _Branch()
    one = Fraction(1) if exact else 1 + 0j
    R = QPochValue(one)
    k = 0
    qk = one  # q**k
    if direction < 0:
        # step to k = -1 before the first term
        R, qk, k = _step_down(R, nums, dens, z, q, qk), qk / q, -1
    small = 0
    running = 0 * one
    stop_at = None
    last_nonzero: list = []
    while True:
        if abs(k) > cfg.max_factors:
            raise ConvergenceError(f"series did not converge within {cfg.max_factors} terms")
        if R.order < 0:
            raise PoleError(f"pole in the series term at k = {k}")
        if R.order > 0:
            t = 0 * one
        else:
            t = R.value
            if vwp is not None:
                t = t * (1 - vwp * qk * qk) / (1 - vwp)
            for v in lin:
                t = t * (1 - v * qk)
        at = abs(t)
        if not exact and not math.isfinite(at):
            if stop_at is not None:
                # already negligible; the guard run left the float range
                break
            raise ConvergenceError(f"non-finite series term at k = {k}")
        out.terms.append(t)
        if not exact:
            out.abs_sum += float(at)
            if at != 0:
                last_nonzero = (last_nonzero + [float(at)])[-2:]
        running = running + t
        partial = abs(running)
        negligible = (at == 0) if exact else (at <= cfg.eps_tail * partial or at == 0)
        small = small + 1 if negligible else 0
        if stop_at is not None and abs(k) >= stop_at:
            if small >= cfg.window:
                break
            stop_at = None
        if stop_at is None and small >= cfg.window:
            # guard against a slow start: continue to twice the length once
            stop_at = 2 * abs(k)
            if R.order > 0 or exact:
                out.structural_end = R.order > 0
                break
        if direction > 0:
            R = _step_up(R, nums, dens, z, qk)
            qk = qk * q
            k += 1
        else:
            R = _step_down(R, nums, dens, z, q, qk)
            qk = qk / q
            k -= 1
    if exact or out.structural_end:
        out.tail = 0.0
    elif last_nonzero:
        rho = ratio
        if len(last_nonzero) == 2 and last_nonzero[0] > 0:
            rho = max(rho, last_nonzero[1] / last_nonzero[0])
        rho = min(rho, 0.99)
        out.tail = last_nonzero[-1] * rho / (1 - rho)
    return out


def _step_up(R: QPochValue, nums, dens, z, qk) -> QPochValue:
    for u in nums:
        x = u * qk
        R = R.times_factor(1 - x, x)
    for b in dens:
        x = b * qk
        R = R.divide_factor(1 - x, x)
    return R * z


def _step_down(R: QPochValue, nums, dens, z, q, qk) -> QPochValue:
    # (x)_{k-1} = (x)_k / (1 - x q^{k-1})
    qkm1 = qk / q
    for b in dens:
        x = b * qkm1
        R = R.times_factor(1 - x, x)
    for u in nums:
        x = u * qkm1
        R = R.divide_factor(1 - x, x)
    return R / z


def _total(branches: Sequence[_Branch], exact: bool) -> tuple[Scalar, float]:
    terms = [t for b in branches for t in b.terms]
    if exact:
        return sum(terms, Fraction(0)), 0.0
    value = complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    abs_sum = sum(b.abs_sum for b in branches)
    est = sum(b.tail for b in branches) + 16 * EPS * abs_sum
    return value, est


def _prepare(spec):
    vals = coerce([*spec.upper, *spec.lower, spec.q, spec.z,
                   *(() if spec.vwp is None else (spec.vwp,)), *spec.lin])
    exact = isinstance(vals[0], Fraction)
    nu, nl = len(spec.upper), len(spec.lower)
    upper, lower = vals[:nu], vals[nu:nu + nl]
    q, z = vals[nu + nl], vals[nu + nl + 1]
    rest = vals[nu + nl + 2:]
    vwp = None
    if spec.vwp is not None:
        vwp, rest = rest[0], rest[1:]
        if vwp == 1:
            raise DomainError("the special parameter must differ from 1")
    return exact, upper, lower, q, z, vwp, tuple(rest)


def eval_phi(spec: PhiSeriesSpec, cfg: TailConfig = DEFAULT_TAIL) -> tuple[Scalar, float]:
    """Sum a unilateral series; returns ``(value, error_estimate)``."""
    exact, upper, lower, q, z, vwp, lin = _prepare(spec)
    if not exact and not abs(q) < 1:
        raise DomainError(f"|q| < 1 required, got |q| = {abs(q):.6g}")
    terminating = _terminates_above(upper, q)
    if not terminating:
        if exact:
            raise UnsupportedOperation("exact mode needs a terminating series")
        if not abs(z) < 1:
            raise DomainError(f"radius |z| < 1 violated (|z| = {abs(z):.6g})")
    branch = _run_branch(upper, [q, *lower], vwp, lin, z, q, cfg, +1, float(abs(z)), exact)
    return _total([branch], exact)


def psi_negative_ratio(spec: PsiSeriesSpec) -> float:
    """Asymptotic modulus of term(k-1)/term(k) as k -> -inf."""
    num = math.prod(abs(b) for b in spec.lower)
    den = math.prod(abs(a) for a in spec.upper) * abs(spec.z)
    if spec.vwp is not None:
        den *= abs(spec.q) ** 2
    den *= math.prod(abs(v) for v in spec.lin)
    if den == 0:
        return math.inf
    return float(num / den)


def eval_psi(spec: PsiSeriesSpec, cfg: TailConfig = DEFAULT_TAIL) -> tuple[Scalar, float]:
    """Sum a bilateral series; the two directions are truncated independently."""
    exact, upper, lower, q, z, vwp, lin = _prepare(spec)
    if not exact and not abs(q) < 1:
        raise DomainError(f"|q| < 1 required, got |q| = {abs(q):.6g}")
    above = _terminates_above(upper, q)
    below = _terminates_below(lower, q)
    if exact and not (above and below):
        raise UnsupportedOperation("exact mode needs a series terminating in both directions")
    if not above and not abs(z) < 1:
        raise DomainError(f"annulus |z| < 1 violated (|z| = {abs(z):.6g})")
    neg_ratio = psi_negative_ratio(spec)
    if not below and not neg_ratio < 1:
        raise DomainError("annulus |b_1...b_t/(a_1...a_t)| < |z| violated "
                          f"(negative-branch ratio {neg_ratio:.6g})")
    pos = _run_branch(upper, lower, vwp, lin, z, q, cfg, +1, float(abs(z)), exact)
    neg = _run_branch(upper, lower, vwp, lin, z, q, cfg, -1, neg_ratio, exact)
    return _total([pos, neg], exact)


# --- Rogers' 6phi5 ---------------------------------------------------------


@dataclass(frozen=True)
class Rogers65Params:
    a: Scalar
    b: Scalar
    c: Scalar
    d: Scalar
    q: Scalar

    @property
    def argument(self) -> Scalar:
        return self.a * self.q / (self.b * self.c * self.d)


def rogers_65_series(p: Rogers65Params) -> PhiSeriesSpec:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    return PhiSeriesSpec((a, b, c, d), (a * q / b, a * q / c, a * q / d), q, p.argument, vwp=a)


def rogers_65_lhs(p: Rogers65Params, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    return eval_phi(rogers_65_series(p), cfg)[0]


def rogers_65_rhs(p: Rogers65Params, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    return inf_product([a * q, a * q / (b * c), a * q / (b * d), a * q / (c * d)],
                       [a * q / b, a * q / c, a * q / d, a * q / (b * c * d)], q, cfg)[0]


# --- Shukla parameters: the unilateral 8phi7 and the bilateral 8psi8 --------


@dataclass(frozen=True)
class ShuklaParams:
    """Parameters of the bilateral 8psi8 (``b`` is unused by the 8phi7)."""

    a: Scalar
    b: Scalar
    c: Scalar
    e: Scalar
    f: Scalar
    g: Scalar
    q: Scalar

    def __post_init__(self):
        a, q = self.a, self.q
        target = a * q
        for up, low in shukla_pairs(self):
            prod = up * low
            if isinstance(prod, Fraction) and isinstance(target, Fraction):
                ok = prod == target
            else:
                ok = abs(prod - target) <= 1e-12 * max(1.0, abs(target))
            if not ok:
                raise DomainError("parameter layout is not well-poised")

    @property
    def argument(self) -> Scalar:
        return self.a**2 / (self.b * self.e * self.f * self.g)


def shukla_pairs(p: ShuklaParams) -> list[tuple[Scalar, Scalar]]:
    """Upper/lower pairs of the 8psi8 excluding the vwp pair; each product is aq."""
    a, b, c, e, f, g, q = p.a, p.b, p.c, p.e, p.f, p.g, p.q
    return [(b, a * q / b), (c, a * q / c), (a * q * q / c, c / q),
            (e, a * q / e), (f, a * q / f), (g, a * q / g)]


def eq87_series(p: ShuklaParams) -> PhiSeriesSpec:
    a, c, e, f, g, q = p.a, p.c, p.e, p.f, p.g, p.q
    return PhiSeriesSpec((a, c, a * q * q / c, e, f, g),
                         (a * q / c, c / q, a * q / e, a * q / f, a * q / g),
                         q, a / (e * f * g), vwp=a)


def eval_87_lhs(p: ShuklaParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    return eval_phi(eq87_series(p), cfg)[0]


def eq87_prefactor(p: ShuklaParams) -> Scalar:
    a, c, e, f, g, q = p.a, p.c, p.e, p.f, p.g, p.q
    ratio = ((1 - 1 / g) * (1 - c * f / (a * q)) * (1 - c * e / (a * q))
             / (one_minus(c / (g * q), "c/gq") * one_minus(e * f / a, "ef/a")
                * one_minus(c / (a * q), "c/aq")))
    return (1 - ratio) * (1 - c / (g * q)) / one_minus(c / q, "c/q")


def eval_87_rhs(p: ShuklaParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    a, e, f, g, q = p.a, p.e, p.f, p.g, p.q
    prod, _ = inf_product([a * q, a / (e * f), a * q / (e * g), a * q / (f * g)],
                          [a * q / e, a * q / f, a * q / g, a / (e * f * g)], q, cfg)
    return eq87_prefactor(p) * prod


def shukla_88_series(p: ShuklaParams) -> PsiSeriesSpec:
    a, q = p.a, p.q
    pairs = shukla_pairs(p)
    return PsiSeriesSpec(tuple(u for u, _ in pairs), tuple(l for _, l in pairs), q,
                         p.argument, vwp=a)


def shukla_88_lhs(p: ShuklaParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    if not abs(p.argument) < 1:
        raise DomainError("annulus |a^2/befg| < 1 violated")
    return eval_psi(shukla_88_series(p), cfg)[0]


def _shukla_products(p: ShuklaParams, second_form: bool, cfg: TailConfig) -> Scalar:
    a, b, e, f, g, q = p.a, p.b, p.e, p.f, p.g, p.q
    nums = [q, a * q, q / a, a * q / (b * e), a * q / (b * f), a * q / (b * g),
            a / (e * f) if second_form else a * q / (e * f), a * q / (e * g), a * q / (f * g)]
    dens = [a * q / b, a * q / e, a * q / f, a * q / g, q / b, q / e, q / f, q / g,
            p.argument if second_form else p.argument * q]
    return inf_product(nums, dens, q, cfg)[0]


def shukla_88_rhs_form1(p: ShuklaParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    """Closed form carrying ``(1 - befg/a^2)`` and ``(a^2 q/befg; q)_inf``."""
    a, b, c, e, f, g, q = p.a, p.b, p.c, p.e, p.f, p.g, p.q
    ratio = ((1 - b * e / a) * (1 - b * f / a) * (1 - b * g / a)
             / (one_minus(b * q / c, "bq/c") * one_minus(b * c / (a * q), "bc/aq")
                * one_minus(b * e * f * g / a**2, "befg/a^2")))
    pre = ((1 - ratio) * (1 - c / (b * q)) * (1 - b * c / (a * q))
           / (one_minus(c / (a * q), "c/aq") * one_minus(c / q, "c/q")))
    return pre * _shukla_products(p, False, cfg)


def shukla_88_prefactor2(p: ShuklaParams) -> Scalar:
    a, b, c, e, f, g, q = p.a, p.b, p.c, p.e, p.f, p.g, p.q
    ratio = ((1 - a / (b * g)) * (1 - c * f / (a * q)) * (1 - c * e / (a * q))
             / (one_minus(c / (g * q), "c/gq") * one_minus(e * f / a, "ef/a")
                * one_minus(c / (b * q), "c/bq")))
    return ((1 - ratio) * (1 - c / (b * q)) * (1 - c / (g * q))
            / (one_minus(c / (a * q), "c/aq") * one_minus(c / q, "c/q")))


def shukla_88_rhs_form2(p: ShuklaParams, cfg: TailConfig = DEFAULT_TAIL) -> Scalar:
    """Closed form carrying ``(a/ef; q)_inf`` and ``(a^2/befg; q)_inf``."""
    return shukla_88_prefactor2(p) * _shukla_products(p, True, cfg)


def bailey_66_series(p: ShuklaParams) -> PsiSeriesSpec:
    """The c -> 0 limit of the 8psi8.

    In the term, ``(c, aq^2/c)_k / (aq/c, c/q)_k`` equals
    ``(1 - c q^{k-1})(1 - a q^{k+1}/c) / ((1 - c/q)(1 - aq/c))``, whose limit
    is ``q^k``; the argument therefore becomes ``a^2 q/befg``.
    """
    a, b, e, f, g, q = p.a, p.b, p.e, p.f, p.g, p.q
    return PsiSeriesSpec((b, e, f, g), (a * q / b, a * q / e, a * q / f, a * q / g), q,
                         p.argument * q, vwp=a)


def bailey_66_limit(p: ShuklaParams, cfg: TailConfig = DEFAULT_TAIL,
                    form: int = 2) -> tuple[Scalar, Scalar]:
    """Analytic c -> 0 limits of both sides of the 8psi8 summation.

    Right side, second form: every ``c`` factor of the prefactor tends to 1,
    leaving ``1 - (1 - a/bg)/(1 - ef/a)``.  First form: ``(1 - bq/c)`` blows
    up so the bracket tends to 1 and the prefactor to 1.
    """
    lhs = eval_psi(bailey_66_series(p), cfg)[0]
    a, b, e, f, g = p.a, p.b, p.e, p.f, p.g
    if form == 2:
        pre = 1 - (1 - a / (b * g)) / one_minus(e * f / a, "ef/a")
        rhs = pre * _shukla_products(p, True, cfg)
    elif form == 1:
        rhs = _shukla_products(p, False, cfg)
    else:
        raise ValueError("form must be 1 or 2")
    return lhs, rhs


# --- finite identities ------------------------------------------------------


def pbz2_sides(a, c, q, k: int) -> tuple[Scalar, Scalar]:
    """Both sides of the decomposition

    ``(1 - c q^{k-1})(1 - a q^{k+1}/c) / ((1 - c/q)(1 - aq/c))
    = q^k + (1 - a q^k)(1 - q^k) / ((1 - c/q)(1 - aq/c))``.
    """
    a, c, q = coerce([a, c, q])
    den = one_minus(c / q, "c/q") * one_minus(a * q / c, "aq/c")
    qk = q**k
    lhs = (1 - c * qk / q) * (1 - a * qk * q / c) / den
    rhs = qk + (1 - a * qk) * (1 - qk) / den
    return lhs, rhs


def pbz2_check(a, c, q, k: int) -> Scalar:
    """Left minus right side of the decomposition in :func:`pbz2_sides`."""
    lhs, rhs = pbz2_sides(a, c, q, k)
    return lhs - rhs


def prefactor_identity_1d(a, c, e, f, g, q) -> tuple[Scalar, Scalar]:
    """Both sides of the rational prefactor identity used to finish the 8phi7 proof."""
    a, c, e, f, g, q = coerce([a, c, e, f, g, q])
    left = ((1 - (1 - e) * (1 - f) * (1 - g)
             / (one_minus(c / q, "c/q") * one_minus(a * q / c, "aq/c")
                * one_minus(e * f * g / a, "efg/a")))
            * (1 - a / (e * f * g)) / one_minus(a / (e * f), "a/ef"))
    right = ((1 - (1 - 1 / g) * (1 - c * f / (a * q)) * (1 - c * e / (a * q))
              / (one_minus(c / (g * q), "c/gq") * one_minus(e * f / a, "ef/a")
                 * one_minus(c / (a * q), "c/aq")))
             * (1 - c / (g * q)) / one_minus(c / q, "c/q"))
    return left, right


def prefactor_identity_check_1d(a, c, e, f, g, q) -> Scalar:
    left, right = prefactor_identity_1d(a, c, e, f, g, q)
    return relative_residual(left, right)


# --- proof replay and specializations --------------------------------------


def _tagged(stage: str, fn, *args):
    try:
        return fn(*args)
    except QSeriesError as exc:
        exc.stage = exc.stage or stage
        raise
    except ZeroDivisionError as exc:
        raise PoleError(str(exc), stage) from exc


def proof_replay_1d(p: ShuklaParams, cfg: TailConfig = DEFAULT_TAIL) -> StagedReport:
    """Replay the derivation of the 8phi7 sum from two Rogers 6phi5 sums.

    Stages: ``split`` (the decomposition applied termwise), ``index-shift``
    (second sum shifted to a 6phi5 with a -> aq^2, e,f,g -> eq,fq,gq),
    ``rogers`` (both 6phi5 replaced by products), ``combined`` (the two
    products merged), ``final`` (the closed form).
    """
    a, c, e, f, g, q = p.a, p.c, p.e, p.f, p.g, p.q
    if not abs(a / (e * f * g)) < 1:
        raise DomainError("|a/efg| < 1 violated", "series")
    lhs = _tagged("series", eval_87_lhs, p, cfg)
    report = StagedReport(lhs)
    den_c = one_minus(c / q, "c/q") * one_minus(a * q / c, "aq/c")

    first = PhiSeriesSpec((a, e, f, g), (a * q / e, a * q / f, a * q / g), q,
                          a * q / (e * f * g), vwp=a)
    second = PhiSeriesSpec((a, e, f, g), (a * q / e, a * q / f, a * q / g), q,
                           a / (e * f * g), vwp=a, lin=(a, 1))
    s1 = _tagged("split", eval_phi, first, cfg)[0]
    s2 = _tagged("split", eval_phi, second, cfg)[0] / den_c
    report.add("split", s1 + s2, "q^k plus the (1-aq^k)(1-q^k) part")

    shift_pref = (a * (1 - a * q) * (1 - a * q * q) * (1 - e) * (1 - f) * (1 - g)
                  / (e * f * g * den_c * (1 - a * q / e) * (1 - a * q / f) * (1 - a * q / g)))
    shifted = Rogers65Params(a * q * q, e * q, f * q, g * q, q)
    s2_shift = _tagged("index-shift", eval_phi, rogers_65_series(shifted), cfg)[0]
    report.add("index-shift", s1 + shift_pref * s2_shift, "k -> k+1 in the second sum")

    r1 = _tagged("rogers", rogers_65_rhs, Rogers65Params(a, e, f, g, q), cfg)
    r2 = _tagged("rogers", rogers_65_rhs, shifted, cfg)
    report.add("rogers", r1 + shift_pref * r2, "both 6phi5 sums replaced by products")

    bracket = 1 - (1 - e) * (1 - f) * (1 - g) / (den_c * one_minus(e * f * g / a, "efg/a"))
    report.add("combined", bracket * r1, "products combined over a common factor")
    report.add("final", _tagged("final", eval_87_rhs, p, cfg), "8phi7 closed form")
    return report


def _shifted_87_params(p: ShuklaParams, m: int) -> ShuklaParams:
    q = p.q
    s = q**(-m)
    return ShuklaParams(p.a * s * s, p.a * s * s, p.c * s, p.e * s, p.f * s, p.g * s, q)


def specialized_params_1d(p: ShuklaParams, m: int) -> ShuklaParams:
    """``p`` with ``b = a q^{-m}``."""
    return replace(p, b=p.a * p.q**(-m))


def specialization_check_1d(p: ShuklaParams, m: int, cfg: TailConfig = DEFAULT_TAIL) -> StagedReport:
    """Check the 8psi8 sum at ``b = a q^{-m}`` through each displayed rewriting.

    Stages: ``truncated`` (bilateral sum equals the sum from k = -m),
    ``shifted`` (index shift k -> k-m gives a prefactor times an 8phi7),
    ``closed-form`` (that 8phi7 summed), ``transformed`` (prefactor and
    products merged), ``rhs`` (the second closed form at b = a q^{-m}).

    The shifted display's vwp denominator is implemented as
    ``(1 - a q^{-2m})``; the alternative literal reading ``(1 - a^{-2m})`` is
    evaluated as well and its residual stored in ``notes``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    a, c, e, f, g, q = p.a, p.c, p.e, p.f, p.g, p.q
    sp = specialized_params_1d(p, m)
    bilateral = _tagged("bilateral", shukla_88_lhs, sp, cfg)
    report = StagedReport(bilateral)
    arg = a * q**m / (e * f * g)

    trunc_spec = PsiSeriesSpec((a * q**(-m), c, a * q * q / c, e, f, g),
                               (q**(1 + m), a * q / c, c / q, a * q / e, a * q / f, a * q / g),
                               q, arg, vwp=a)
    report.add("truncated", _tagged("truncated", eval_psi, trunc_spec, cfg)[0],
               "terms below k = -m vanish")

    pref_poch = _tagged("shifted", qpoch_ratio,
                        [a * q**(-m), c, a * q * q / c, e, f, g],
                        [q**(1 + m), a * q / c, c / q, a * q / e, a * q / f, a * q / g], q, -m)
    if pref_poch.order != 0:
        raise PoleError("degenerate shift prefactor", "shifted")
    shift_pref = (1 - a * q**(-2 * m)) / (1 - a) * pref_poch.value * arg**(-m)
    sp87 = _shifted_87_params(p, m)
    shifted_sum = _tagged("shifted", eval_phi, eq87_series(sp87), cfg)[0]
    shifted = shift_pref * shifted_sum
    report.add("shifted", shifted, "k -> k-m; an 8phi7 with a,c,e,f,g rescaled")

    # literal reading of the shifted display: vwp denominator (1 - a^{-2m})
    literal_den = 1 - a**(-2 * m)
    if abs(literal_den) > ZERO_TOL:
        literal = shifted * (1 - a * q**(-2 * m)) / literal_den
        report.notes["literal_reading_residual"] = float(abs(literal - bilateral) / abs(bilateral))
    else:
        report.notes["literal_reading_residual"] = math.inf
    report.notes["implemented_reading"] = "(1 - a q^{-2m})"

    report.add("closed-form", shift_pref * _tagged("closed-form", eval_87_rhs, sp87, cfg),
               "8phi7 summation applied")

    inner = ((1 - q**m / g) * (1 - c * f / (a * q)) * (1 - c * e / (a * q))
             / ((1 - c / (g * q)) * (1 - e * f / a) * (1 - c * q**m / (a * q))))
    pre = ((1 - inner) * (1 - c * q**m / (a * q)) * (1 - c / (g * q))
           / ((1 - c / (a * q)) * (1 - c / q)))
    prods = _tagged("transformed", inf_product,
                    [q, a * q, q / a, q**(1 + m) / e, q**(1 + m) / f, q**(1 + m) / g,
                     a / (e * f), a * q / (e * g), a * q / (f * g)],
                    [q**(1 + m), a * q / e, a * q / f, a * q / g, q**(1 + m) / a,
                     q / e, q / f, q / g, arg], q, cfg)[0]
    report.add("transformed", pre * prods, "merged into 8psi8 product form")
    report.add("rhs", _tagged("rhs", shukla_88_rhs_form2, sp, cfg), "closed form at b = aq^-m")
    return report
