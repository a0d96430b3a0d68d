"""Multi-index lattice sums over boxes and simplices in Z^r.

A :class:`LatticeSummand` describes terms of the shape

    scale * V(k) * prod_i (1 - alpha_i q^{k_i+|k|}) / (1 - alpha_i)
          * prod_i [axis Pochhammers at k_i] * [total Pochhammers at |k|]
          * prod_i prod_v (1 - v q^{k_i}) * prod_u (1 - u q^{|k|}) * w^{|k|}

where ``V(k) = prod_{i<j} (z_i q^{k_i} - z_j q^{k_j}) / (z_i - z_j)``.  Every
A_{r-1} series used in this package has this form.

Float evaluation builds one table per axis, per total index and per
Vandermonde pair.  Each table is a running (cumulative) sum of
``log(1 - x q^j)`` along its index, with vanishing factors counted in a
parallel integer order table instead of being logged.  A term then costs
``O(r^2)`` table lookups regardless of how far it sits from the origin.
Exact (Fraction) evaluation goes through :meth:`LatticeSummand.term`, which
multiplies q-shifted factorials directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_TAIL,
    EPS,
    ZERO_TOL,
    ConvergenceError,
    DomainError,
    PoleError,
    QPochValue,
    TailConfig,
    is_exact,
    qpoch,
)

CHUNK = 1 << 20
MAX_POINTS = 1 << 25


@dataclass(frozen=True)
class LatticeBox:
    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(int(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(int(v) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box needs lower_i <= upper_i")

    @classmethod
    def cube(cls, r: int, lo: int, hi: int) -> LatticeBox:
        return cls((lo,) * r, (hi,) * r)

    @property
    def r(self) -> int:
        return len(self.lower)

    @property
    def size(self) -> int:
        return math.prod(hi - lo + 1 for lo, hi in zip(self.lower, self.upper))

    def enlarged(self, by: int) -> LatticeBox:
        return LatticeBox(tuple(v - by for v in self.lower), tuple(v + by for v in self.upper))

    def points(self):
        return itertools.product(*(range(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)))


@dataclass(frozen=True)
class LatticeSummand:
    q: object
    z: tuple
    vwp: tuple | None
    axis_num: tuple
    axis_den: tuple
    total_num: tuple = ()
    total_den: tuple = ()
    axis_lin: tuple = ()
    total_lin: tuple = ()
    w: object = 1
    scale: object = 1
    vandermonde: bool = True

    @property
    def r(self) -> int:
        return len(self.z)

    def _axis_lin(self, i):
        return self.axis_lin[i] if self.axis_lin else ()

    def parameters(self) -> list:
        vals = [self.q, *self.z, *(self.vwp or ()), *self.total_num, *self.total_den,
                *self.total_lin, self.w, self.scale]
        for i in range(self.r):
            vals += [*self.axis_num[i], *self.axis_den[i], *self._axis_lin(i)]
        return vals

    def is_exact(self) -> bool:
        return is_exact(*self.parameters())

    def term(self, k: Sequence[int]) -> object:
        """Direct evaluation of one term from q-shifted factorials."""
        k = [int(v) for v in k]
        if len(k) != self.r:
            raise ValueError("index length does not match r")
        exact = self.is_exact()
        conv = Fraction if exact else complex
        q = conv(self.q)
        z = [conv(v) for v in self.z]
        n = sum(k)
        p = QPochValue(conv(1))
        if self.vandermonde:
            for i in range(self.r):
                for j in range(i + 1, self.r):
                    # (z_i q^{k_i} - z_j q^{k_j}) / (z_i - z_j) = q^{k_i} (1 - x) / (1 - z_j/z_i)
                    x = z[j] / z[i] * q**(k[j] - k[i])
                    p = p.times_factor(1 - x, x) * (q**k[i] / (1 - z[j] / z[i]))
        if self.vwp is not None:
            for i, alpha in enumerate(self.vwp):
                alpha = conv(alpha)
                x = alpha * q**(k[i] + n)
                p = p.times_factor(1 - x, x) / (1 - alpha)
        for i in range(self.r):
            for x in self.axis_num[i]:
                p = p * qpoch(conv(x), q, k[i])
            for x in self.axis_den[i]:
                p = p / qpoch(conv(x), q, k[i])
            for v in self._axis_lin(i):
                x = conv(v) * q**k[i]
                p = p.times_factor(1 - x, x)
        for x in self.total_num:
            p = p * qpoch(conv(x), q, n)
        for x in self.total_den:
            p = p / qpoch(conv(x), q, n)
        for u in self.total_lin:
            x = conv(u) * q**n
            p = p.times_factor(1 - x, x)
        p = p * (conv(self.w) ** n * conv(self.scale))
        if p.order < 0:
            raise PoleError(f"pole of order {-p.order} at k = {tuple(k)}")
        return p.scalar()


# --- log-domain tables -----------------------------------------------------


def _log1m(lx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``log(1 - e^{lx})`` and a vanishing flag, stable for any size of ``e^{lx}``."""
    out = np.zeros(lx.shape, dtype=complex)
    zero = np.zeros(lx.shape, dtype=bool)
    finite = np.isfinite(lx.real)
    big = finite & (lx.real > 0)
    small = finite & ~big
    if small.any():
        d = 1 - np.exp(lx[small])
        zero[small] = np.abs(d) <= ZERO_TOL
        out[small] = np.log(np.where(zero[small], 1, d))
    if big.any():
        lb = lx[big]
        d = np.exp(-lb) - 1
        zb = np.abs(d) <= ZERO_TOL
        zero[big] = zb
        out[big] = np.where(zb, 0, lb + np.log(np.where(zb, 1, d)))
    return out, zero


def _log_one_minus_geom(x: complex, logq: complex, j: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``log(1 - x q^j)`` for an integer array ``j`` together with vanishing flags."""
    if x == 0:
        return np.zeros(j.shape, dtype=complex), np.zeros(j.shape, dtype=bool)
    return _log1m(np.log(complex(x)) + j * logq)


def _poch_table(x: complex, logq: complex, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """``log (x;q)_k`` and zero orders for ``k = lo..hi`` (running sums from k = 0)."""
    lo0, hi0 = min(lo, 0), max(hi, 0)
    logs = np.zeros(hi0 - lo0 + 1, dtype=complex)
    orders = np.zeros(hi0 - lo0 + 1, dtype=np.int64)
    if hi0 > 0:
        f, zf = _log_one_minus_geom(x, logq, np.arange(0, hi0))
        logs[-lo0 + 1:] = np.cumsum(f)
        orders[-lo0 + 1:] = np.cumsum(zf)
    if lo0 < 0:
        f, zf = _log_one_minus_geom(x, logq, -np.arange(1, -lo0 + 1))
        logs[:-lo0] = -np.cumsum(f)[::-1]
        orders[:-lo0] = -np.cumsum(zf)[::-1]
    return logs[lo - lo0:hi - lo0 + 1], orders[lo - lo0:hi - lo0 + 1]


def _lin_table(v: complex, logq: complex, lo: int, hi: int):
    return _log_one_minus_geom(v, logq, np.arange(lo, hi + 1))


@dataclass
class _Tables:
    lo: tuple
    hi: tuple
    axis: list
    total: tuple
    total_lo: int
    vwp: list
    pairs: dict
    log_scale: complex
    n_factors: int


def _build_tables(s: LatticeSummand, lo: Sequence[int], hi: Sequence[int]) -> _Tables:
    r = s.r
    q = complex(s.q)
    if not abs(q) < 1:
        raise DomainError(f"|q| < 1 required, got |q| = {abs(q):.6g}")
    logq = np.log(q)
    tlo, thi = sum(lo), sum(hi)
    n_factors = 0

    axis = []
    for i in range(r):
        L = np.zeros(hi[i] - lo[i] + 1, dtype=complex)
        O = np.zeros(hi[i] - lo[i] + 1, dtype=np.int64)
        for x in s.axis_num[i]:
            l, o = _poch_table(complex(x), logq, lo[i], hi[i])
            L += l
            O += o
        for x in s.axis_den[i]:
            l, o = _poch_table(complex(x), logq, lo[i], hi[i])
            L -= l
            O -= o
        for v in s._axis_lin(i):
            l, o = _lin_table(complex(v), logq, lo[i], hi[i])
            L += l
            O += o
        if s.vandermonde:
            # the q^{k_i} part of every pair (i, j > i)
            L += (r - 1 - i) * np.arange(lo[i], hi[i] + 1) * logq
        n_factors += len(s.axis_num[i]) + len(s.axis_den[i]) + len(s._axis_lin(i))
        axis.append((L, O))

    T = np.zeros(thi - tlo + 1, dtype=complex)
    TO = np.zeros(thi - tlo + 1, dtype=np.int64)
    for x in s.total_num:
        l, o = _poch_table(complex(x), logq, tlo, thi)
        T += l
        TO += o
    for x in s.total_den:
        l, o = _poch_table(complex(x), logq, tlo, thi)
        T -= l
        TO -= o
    for u in s.total_lin:
        l, o = _lin_table(complex(u), logq, tlo, thi)
        T += l
        TO += o
    w = complex(s.w)
    if w == 0:
        raise DomainError("series argument must be nonzero")
    T += np.arange(tlo, thi + 1) * np.log(w)
    n_factors += len(s.total_num) + len(s.total_den) + len(s.total_lin) + 1

    vwp = []
    if s.vwp is not None:
        for i, alpha in enumerate(s.vwp):
            alpha = complex(alpha)
            if abs(1 - alpha) <= ZERO_TOL:
                raise DomainError("very-well-poised parameter a z_i must differ from 1")
            l, o = _lin_table(alpha, logq, lo[i] + tlo, hi[i] + thi)
            vwp.append((l - np.log(1 - alpha), o.astype(np.int64)))
        n_factors += r

    pairs = {}
    if s.vandermonde:
        for i in range(r):
            for j in range(i + 1, r):
                zi, zj = complex(s.z[i]), complex(s.z[j])
                ratio = zj / zi
                if abs(1 - ratio) <= ZERO_TOL:
                    raise DomainError("coincident z_i in the Vandermonde factor")
                dlo, dhi = lo[j] - hi[i], hi[j] - lo[i]
                l, o = _lin_table(ratio, logq, dlo, dhi)
                pairs[(i, j)] = (l - np.log(1 - ratio), o.astype(np.int64), dlo)
        n_factors += r * (r - 1) // 2

    scale = complex(s.scale)
    if scale == 0:
        raise DomainError("zero scale")
    return _Tables(tuple(lo), tuple(hi), axis, (T, TO), tlo, vwp, pairs, np.log(scale), n_factors)


def _eval_points(s: LatticeSummand, tb: _Tables, K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Terms and |term| log-magnitudes at the rows of ``K``."""
    n = K.sum(axis=1)
    L = np.full(len(K), tb.log_scale, dtype=complex)
    O = np.zeros(len(K), dtype=np.int64)
    T, TO = tb.total
    L += T[n - tb.total_lo]
    O += TO[n - tb.total_lo]
    for i in range(s.r):
        a, ao = tb.axis[i]
        idx = K[:, i] - tb.lo[i]
        L += a[idx]
        O += ao[idx]
        if tb.vwp:
            v, vo = tb.vwp[i]
            vidx = K[:, i] + n - (tb.lo[i] + tb.total_lo)
            L += v[vidx]
            O += vo[vidx]
    for (i, j), (p, po, dlo) in tb.pairs.items():
        idx = K[:, j] - K[:, i] - dlo
        L += p[idx]
        O += po[idx]
    if (O < 0).any():
        bad = K[np.argmax(O < 0)]
        raise PoleError(f"pole in the summand at k = {tuple(int(v) for v in bad)}")
    live = O == 0
    with np.errstate(over="ignore", under="ignore"):
        t = np.where(live, np.exp(np.where(live, L, -np.inf)), 0)
    if not np.all(np.isfinite(t)):
        raise ConvergenceError("summand overflow; parameters far outside the convergence region")
    return t, np.where(live, L.real, -np.inf)


def _box_points(lo, hi, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the box's points in C order."""
    shape = tuple(h - l + 1 for l, h in zip(lo, hi))
    flat = np.arange(start, stop)
    idx = np.stack(np.unravel_index(flat, shape), axis=1)
    return idx + np.asarray(lo, dtype=np.int64)


@dataclass
class BoxResult:
    value: complex
    abs_sum: float
    layers: list  # per axis: |term| mass of each layer k_i = const
    shells: np.ndarray | None  # per |k| - tlo: signed shell sums (complex)
    shell_abs: np.ndarray | None
    points: int
    chunks: int
    log_weight: float  # sum |t| |log t| for the rounding estimate


def box_sum(s: LatticeSummand, box: LatticeBox, simplex_cap: int | None = None,
            with_shells: bool = False) -> BoxResult:
    """Sum the summand over ``box`` (optionally only points with ``|k| <= simplex_cap``)."""
    if box.r != s.r:
        raise ValueError("box dimension does not match the summand")
    lo, hi = box.lower, box.upper
    if simplex_cap is not None:
        hi = tuple(min(h, simplex_cap - sum(lo) + l) for l, h in zip(lo, hi))
    tb = _build_tables(s, lo, hi)
    total = LatticeBox(lo, hi).size
    tlo, thi = sum(lo), sum(hi)
    value = 0j
    abs_sum = 0.0
    log_weight = 0.0
    layers = [np.zeros(h - l + 1) for l, h in zip(lo, hi)]
    shells = np.zeros(thi - tlo + 1, dtype=complex) if with_shells else None
    shell_abs = np.zeros(thi - tlo + 1) if with_shells else None
    chunks = 0
    points = 0
    for start in range(0, total, CHUNK):
        K = _box_points(lo, hi, start, min(total, start + CHUNK))
        if simplex_cap is not None:
            K = K[K.sum(axis=1) <= simplex_cap]
        if not len(K):
            continue
        t, lmag = _eval_points(s, tb, K)
        at = np.abs(t)
        value += t.sum()
        abs_sum += float(at.sum())
        log_weight += float(np.sum(at * np.abs(np.where(np.isfinite(lmag), lmag, 0))))
        for i in range(s.r):
            layers[i] += np.bincount(K[:, i] - lo[i], weights=at, minlength=len(layers[i]))
        if with_shells:
            n = K.sum(axis=1) - tlo
            shells += (np.bincount(n, weights=t.real, minlength=len(shells))
                       + 1j * np.bincount(n, weights=t.imag, minlength=len(shells)))
            shell_abs += np.bincount(n, weights=at, minlength=len(shell_abs))
        chunks += 1
        points += len(K)
    return BoxResult(complex(value), abs_sum, layers, shells, shell_abs, points, chunks,
                     log_weight)


def direct_box_sum(s: LatticeSummand, box: LatticeBox) -> object:
    """Reference sum that evaluates every term from scratch."""
    return sum((s.term(k) for k in box.points()), Fraction(0) if s.is_exact() else 0j)


def _rounding(res: BoxResult, n_factors: int) -> float:
    return (EPS * (4 + 2 * math.log2(res.points + 1) + res.chunks + 2 * n_factors) * res.abs_sum
            + 4 * EPS * res.log_weight)


@dataclass(frozen=True)
class LatticeSum:
    value: object
    error: float
    box: LatticeBox
    abs_sum: float = 0.0
    points: int = 0


def _n_factors(s: LatticeSummand) -> int:
    r = s.r
    return (sum(len(s.axis_num[i]) + len(s.axis_den[i]) + len(s._axis_lin(i)) for i in range(r))
            + len(s.total_num) + len(s.total_den) + len(s.total_lin) + r * r)


def _extra_layers(face: float, inner: float, target: float) -> int:
    """Layers needed for a geometric tail starting at ``face`` to drop below ``target``."""
    if face <= target:
        return 0
    rho = face / inner if inner > 0 else 0.9
    if not rho < 0.98:
        return 1 << 30
    return int(math.ceil(math.log(target / face) / math.log(rho))) + 2


def sum_unilateral(s: LatticeSummand, cfg: TailConfig = DEFAULT_TAIL, start: int = 12,
                   shell_window: int = 3, max_shell: int | None = None) -> LatticeSum:
    """Sum over ``k_i >= 0`` by shells of constant ``|k|``.

    The shell cap doubles until the last ``shell_window`` shells each carry an
    absolute mass below ``eps_tail * |partial sum|``.
    """
    if s.is_exact():
        return sum_terminating_exact(s, max_shell or cfg.max_factors)
    r = s.r
    N = start
    cap = max_shell or 4096
    while True:
        box = LatticeBox.cube(r, 0, N)
        if box.size > MAX_POINTS * 4:
            raise ConvergenceError(f"unilateral sum did not converge by shell {N}")
        res = box_sum(s, box, simplex_cap=N, with_shells=True)
        sa = res.shell_abs[:N + 1]
        ref = max(abs(res.value), 1e-300)
        tail_shells = sa[-shell_window:]
        if np.all(tail_shells <= cfg.eps_tail * ref) or np.all(sa[-shell_window:] == 0):
            break
        if N >= cap:
            raise ConvergenceError(f"unilateral sum did not converge by shell {N}")
        N = min(2 * N, N + _extra_layers(sa[-1], sa[-2], cfg.eps_tail * ref) + shell_window)
    nz = sa[sa > 0]
    tail = 0.0
    if sa[-1] > 0 and len(nz) >= 2:
        rho = min(0.95, max(sa[-1] / sa[-2] if sa[-2] > 0 else 0.95, 0.0))
        tail = sa[-1] * rho / (1 - rho)
    err = tail + _rounding(res, _n_factors(s))
    return LatticeSum(res.value, err, LatticeBox.cube(r, 0, N), res.abs_sum, res.points)


def sum_terminating_exact(s: LatticeSummand, max_shell: int = 10_000) -> LatticeSum:
    """Exact sum over ``k_i >= 0`` of a series whose shells eventually vanish identically.

    Stops at the first shell ``n >= 1`` whose terms are all zero and whose
    total-index numerator factorials vanish there, which makes every later
    shell zero as well.
    """
    r = s.r
    total = Fraction(0)
    for n in range(max_shell + 1):
        shell_zero = True
        for k in _compositions(n, r):
            t = s.term(k)
            if t != 0:
                shell_zero = False
                total += t
        if n >= 1 and _total_terminates(s, n):
            if not shell_zero:
                # a vanishing total-index factor was cancelled by a pole
                raise DomainError(f"degenerate parameters: 0/0 terms on shell {n}")
            return LatticeSum(total, 0.0, LatticeBox.cube(r, 0, n))
    raise ConvergenceError("exact lattice sum does not terminate")


def _total_terminates(s: LatticeSummand, n: int) -> bool:
    q = Fraction(s.q)
    return any(qpoch(Fraction(x), q, n).order > 0 for x in s.total_num)


def _compositions(n: int, r: int):
    if r == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, r - 1):
            yield (first, *rest)


def sum_bilateral(s: LatticeSummand, cfg: TailConfig = DEFAULT_TAIL,
                  box: LatticeBox | None = None, adaptive: bool = True,
                  max_points: int = MAX_POINTS) -> LatticeSum:
    """Sum over ``Z^r`` by adaptively grown boxes.

    Starting from ``box`` (default ``[-4, 12]^r``), any side whose outer layer
    carries absolute mass above ``eps_tail * |partial|`` is pushed out by the
    number of layers a geometric fit of its two outermost layers needs, but
    by at most about its current distance from the origin.  The error
    estimate extrapolates each face the same way.
    """
    r = s.r
    box = box or LatticeBox.cube(r, -4, 12)
    while True:
        if box.size > max_points:
            raise ConvergenceError(f"box instability: no convergence within {max_points} points")
        res = box_sum(s, box)
        ref = max(abs(res.value), 1e-300)
        lower, upper = list(box.lower), list(box.upper)
        grew = False
        for i, layer in enumerate(res.layers):
            width = upper[i] - lower[i]
            if layer[0] > cfg.eps_tail * ref:
                extra = _extra_layers(layer[0], layer[1] if len(layer) > 1 else 0.0,
                                      cfg.eps_tail * ref)
                lower[i] -= min(max(4, abs(lower[i]), width // 2), max(4, extra))
                grew = True
            if layer[-1] > cfg.eps_tail * ref:
                extra = _extra_layers(layer[-1], layer[-2] if len(layer) > 1 else 0.0,
                                      cfg.eps_tail * ref)
                upper[i] += min(max(4, abs(upper[i]), width // 2), max(4, extra))
                grew = True
        if not grew or not adaptive:
            break
        box = LatticeBox(lower, upper)
    tail = 0.0
    for layer in res.layers:
        for face, inner in ((layer[0], layer[1] if len(layer) > 1 else 0.0),
                            (layer[-1], layer[-2] if len(layer) > 1 else 0.0)):
            if face == 0:
                continue
            rho = min(0.95, face / inner) if inner > 0 else 0.95
            tail += face * rho / (1 - rho)
    err = tail + _rounding(res, _n_factors(s))
    return LatticeSum(res.value, err, box, res.abs_sum, res.points)
