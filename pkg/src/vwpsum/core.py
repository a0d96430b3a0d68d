"""Scalars and q-shifted factorials.

Two arithmetic modes are supported. Float mode uses Python ``complex`` at
double precision. Exact mode uses :class:`fractions.Fraction` and is selected
automatically when every input is an ``int`` or ``Fraction``; it is limited to
finite products and sums.

q-shifted factorials can vanish or blow up for special parameters.  Instead of
returning ``0`` or raising on division by zero, :func:`qpoch` returns a
:class:`QPochValue` that carries the product of the non-vanishing factors
together with a signed order (positive for a zero, negative for a pole), so
that a zero in a numerator and a pole in a denominator cancel exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Union

Scalar = Union[complex, Fraction]
Number = Union[int, float, complex, Fraction]

# |1 - x| below this (relative to max(1, |x|)) is treated as an exact zero in
# float mode.  Parameters that are only *close* to a pole are handled by the
# samplers' pole margin, which is eight orders of magnitude larger.
ZERO_TOL = 1e-12

EPS = 2.220446049250313e-16


class QSeriesError(Exception):
    """Base class for evaluation errors.

    ``stage`` names the proof-replay or specialization stage in which the
    error was raised, when there is one.
    """

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.stage = stage


class DomainError(QSeriesError, ValueError):
    pass


class PoleError(QSeriesError, ZeroDivisionError):
    pass


class UnsupportedOperation(QSeriesError):
    pass


class ConvergenceError(QSeriesError):
    pass


class InfeasibleDomain(DomainError):
    pass


@dataclass(frozen=True)
class TailConfig:
    """Truncation controls for infinite products and series.

    eps_tail
        Relative size below which a tail is considered negligible.
    window
        Number of consecutive negligible terms required before a series stops.
    max_factors
        Hard cap on the number of factors or terms per branch.
    """

    eps_tail: float = 1e-14
    window: int = 5
    max_factors: int = 10_000

    def __post_init__(self):
        if not self.eps_tail > 0:
            raise ValueError("eps_tail must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.max_factors < 1:
            raise ValueError("max_factors must be at least 1")


DEFAULT_TAIL = TailConfig()


def is_exact(*values) -> bool:
    """True when every value is an int or Fraction (exact-rational mode)."""
    return all(isinstance(v, Rational) and not isinstance(v, bool) for v in values)


def to_scalar(value: Number | str) -> Scalar:
    """Convert a number or a textual literal to a Scalar.

    Accepted strings: ``"2/3"`` and ``"5"`` (exact), ``"0.3"``, ``"1e-3"``,
    ``"0.3+0.1i"``, ``"-2i"`` (float).
    """
    if isinstance(value, str):
        text = value.strip().replace(" ", "")
        if not text:
            raise ValueError("empty scalar literal")
        if text.endswith(("i", "j")) or "e" in text.lower() or "." in text:
            if text.endswith("i"):
                text = text[:-1] + "j"
            if text in ("j", "+j", "-j"):
                text = text.replace("j", "1j")
            return complex(text)
        return Fraction(text)
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, Rational):
        return Fraction(value)
    return complex(value)


def coerce(values: Iterable[Number]) -> list[Scalar]:
    """Bring values to a common mode: all Fraction if all exact, else complex."""
    values = list(values)
    if is_exact(*values):
        return [Fraction(v) for v in values]
    return [complex(v) for v in values]


def vanishes(factor: Scalar, reference: Scalar = 1) -> bool:
    """Decide whether a factor ``1 - x`` is zero.

    ``reference`` is ``x``; in float mode the test is relative to ``max(1, |x|)``.
    """
    if isinstance(factor, Fraction):
        return factor == 0
    return abs(factor) <= ZERO_TOL * max(1.0, abs(reference))


def margin_ok(x: Scalar, margin: float) -> bool:
    """Pole-margin test for a denominator factor ``1 - x``."""
    return abs(1 - x) >= margin * (1 + abs(x))


@dataclass(frozen=True)
class QPochValue:
    """A product with explicit zero/pole bookkeeping.

    ``value`` is the product of the non-vanishing factors and ``order`` the
    net number of vanishing factors (negative for poles).  ``tail`` is a
    relative truncation estimate and is nonzero only for infinite products.
    """

    value: Scalar = 1
    order: int = 0
    tail: float = 0.0

    @property
    def kind(self) -> str:
        if self.order > 0:
            return "zero"
        if self.order < 0:
            return "pole"
        return "regular"

    @property
    def multiplicity(self) -> int:
        return abs(self.order)

    def __mul__(self, other: QPochValue | Number) -> QPochValue:
        if isinstance(other, QPochValue):
            return QPochValue(self.value * other.value, self.order + other.order,
                              self.tail + other.tail)
        return QPochValue(self.value * other, self.order, self.tail)

    __rmul__ = __mul__

    def __truediv__(self, other: QPochValue | Number) -> QPochValue:
        if isinstance(other, QPochValue):
            return QPochValue(self.value / other.value, self.order - other.order,
                              self.tail + other.tail)
        return QPochValue(self.value / other, self.order, self.tail)

    def reciprocal(self) -> QPochValue:
        return QPochValue(1 / self.value, -self.order, self.tail)

    def times_factor(self, factor: Scalar, reference: Scalar) -> QPochValue:
        """Multiply by ``factor = 1 - reference``, counting it if it vanishes."""
        if vanishes(factor, reference):
            return QPochValue(self.value, self.order + 1, self.tail)
        return QPochValue(self.value * factor, self.order, self.tail)

    def divide_factor(self, factor: Scalar, reference: Scalar) -> QPochValue:
        if vanishes(factor, reference):
            return QPochValue(self.value, self.order - 1, self.tail)
        return QPochValue(self.value / factor, self.order, self.tail)

    def scalar(self) -> Scalar:
        """Collapse to a plain number; zeros give 0, poles raise PoleError."""
        if self.order > 0:
            return 0 * self.value
        if self.order < 0:
            raise PoleError(f"pole of order {-self.order}")
        return self.value


ONE = QPochValue()


def _check_q(q: Scalar, exact: bool) -> None:
    if exact:
        if q == 0:
            raise DomainError("q must be nonzero")
    elif not abs(q) < 1:
        raise DomainError(f"|q| < 1 required, got |q| = {abs(q):.6g}")


def qpoch(a: Number, q: Number, k: int | float, cfg: TailConfig = DEFAULT_TAIL) -> QPochValue:
    """The q-shifted factorial ``(a; q)_k`` for integer k or ``k = inf``.

    For ``k < 0`` the value is ``1 / prod_{j=1}^{-k} (1 - a q^{-j})``.  The
    infinite product is truncated once the geometric bound on the logarithm
    of the remainder falls below ``cfg.eps_tail``; that bound (plus a rounding
    allowance) is reported in ``tail``.
    """
    exact = is_exact(a, q)
    if k == math.inf:
        if exact:
            raise UnsupportedOperation("infinite products are not available in exact mode")
        a, q = complex(a), complex(q)
        _check_q(q, False)
        return _qpoch_inf(a, q, cfg)
    if int(k) != k:
        raise ValueError(f"k must be an integer or inf, got {k!r}")
    k = int(k)
    a, q = (Fraction(a), Fraction(q)) if exact else (complex(a), complex(q))
    if exact:
        if k < 0 and q == 0:
            raise DomainError("q must be nonzero for negative k")
    else:
        _check_q(q, False)
    p = QPochValue(Fraction(1) if exact else 1 + 0j)
    if k >= 0:
        x = a
        for _ in range(k):
            p = p.times_factor(1 - x, x)
            x = x * q
        return p
    x = a / q
    for _ in range(-k):
        p = p.divide_factor(1 - x, x)
        x = x / q
    return p


def _qpoch_inf(a: complex, q: complex, cfg: TailConfig) -> QPochValue:
    aq = abs(q)
    p = QPochValue(1 + 0j)
    x = a
    for j in range(cfg.max_factors):
        ax = abs(x)
        if ax < 1:
            bound = ax / ((1 - aq) * (1 - ax))
            if bound < cfg.eps_tail:
                return QPochValue(p.value, p.order, bound + (j + 1) * EPS)
        p = p.times_factor(1 - x, x)
        x *= q
    ax = abs(x)
    bound = ax / ((1 - aq) * (1 - ax)) if ax < 1 else math.inf
    return QPochValue(p.value, p.order, bound + cfg.max_factors * EPS)


def qpoch_list(values: Sequence[Number], q: Number, k: int | float,
               cfg: TailConfig = DEFAULT_TAIL) -> QPochValue:
    """``(a_1, ..., a_m; q)_k``, the product of the individual factorials."""
    if not values:
        raise ValueError("qpoch_list needs at least one parameter")
    p = qpoch(values[0], q, k, cfg)
    for a in values[1:]:
        p = p * qpoch(a, q, k, cfg)
    return p


def qpoch_shift(p: QPochValue, a: Number, q: Number, k: int, step: int = 1) -> QPochValue:
    """Move ``p = (a; q)_k`` one step along k.

    ``step=+1`` returns ``(a; q)_{k+1} = p * (1 - a q^k)`` and ``step=-1``
    returns ``(a; q)_{k-1} = p / (1 - a q^{k-1})``.
    """
    if step == 1:
        x = a * q**k
        return p.times_factor(1 - x, x)
    if step == -1:
        x = a * q**(k - 1)
        return p.divide_factor(1 - x, x)
    raise ValueError("step must be +1 or -1")


def qpoch_ratio(nums: Sequence[Number], dens: Sequence[Number], q: Number, k: int | float,
                cfg: TailConfig = DEFAULT_TAIL) -> QPochValue:
    """``(nums; q)_k / (dens; q)_k`` with zero/pole bookkeeping."""
    p = QPochValue(Fraction(1) if is_exact(*nums, *dens, q) else 1 + 0j)
    for a in nums:
        p = p * qpoch(a, q, k, cfg)
    for b in dens:
        p = p / qpoch(b, q, k, cfg)
    return p


def inf_product(nums: Sequence[Number], dens: Sequence[Number], q: Number,
                cfg: TailConfig = DEFAULT_TAIL) -> tuple[complex, float]:
    """Evaluate ``(nums; q)_inf / (dens; q)_inf``.

    Returns the value and a relative error estimate.  A vanishing numerator
    gives 0; a vanishing denominator raises PoleError.
    """
    p = qpoch_ratio(nums, dens, q, math.inf, cfg)
    if p.order < 0:
        raise PoleError("vanishing infinite product in a denominator")
    return p.scalar(), p.tail


def vwp_factor(a: Number, q: Number, k: int) -> Scalar:
    """The very-well-poised term ``(1 - a q^{2k}) / (1 - a)``.

    This is the square-root-free form of
    ``(q sqrt(a), -q sqrt(a); q)_k / (sqrt(a), -sqrt(a); q)_k``.
    """
    if a == 1:
        raise DomainError("the special parameter must differ from 1")
    return (1 - a * q**(2 * k)) / (1 - a)


def nonzero(x: Scalar, what: str) -> Scalar:
    """Return ``x`` if it is a usable denominator, else raise PoleError."""
    if isinstance(x, Fraction):
        if x == 0:
            raise PoleError(f"vanishing denominator {what}")
    elif abs(x) <= ZERO_TOL:
        raise PoleError(f"vanishing denominator {what}")
    return x


def one_minus(x: Scalar, what: str = "") -> Scalar:
    """``1 - x`` checked for use as a denominator factor."""
    d = 1 - x
    if vanishes(d, x):
        raise PoleError(f"vanishing denominator factor (1 - {what or x})")
    return d


def relative_residual(lhs: Scalar, rhs: Scalar, floor: float = 1e-300) -> Scalar:
    """``|lhs - rhs| / max(|rhs|, floor)``; exact (Fraction) when both sides are."""
    if isinstance(lhs, Fraction) and isinstance(rhs, Fraction):
        diff = abs(lhs - rhs)
        return diff / abs(rhs) if rhs != 0 else diff
    return abs(lhs - rhs) / max(abs(rhs), floor)
