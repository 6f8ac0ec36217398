"""Finite-precision arithmetic in Z_p and Q_p with explicit valuation tracking.

A value is stored as p^v * u where u is a unit residue known modulo p^prec
(its "significant digits"), so the value itself is pinned modulo p^(v+prec).
Exact zero is a distinguished state, never "valuation >= window".  All
operations are exact modulo the propagated window: there is no rounding
error in the float sense, only a shrinking window.

Restricted to p >= 5 throughout, so that valuation >= 1 is strictly greater
than 1/(p-1) and the exponential/logarithm/Mahler machinery converges
without the p = 2, 3 special cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DivisionByZero, DomainError, PrecisionExhausted

DEFAULT_PRECISION = 32

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for the sizes used here (< 3.3e24)."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


_PRIME_CACHE = set()


def require_prime(p: int) -> int:
    """Validate a working prime: prime and >= 5."""
    if p in _PRIME_CACHE:
        return p
    if not isinstance(p, int) or not is_prime(p):
        raise ValueError(f"{p!r} is not prime")
    if p < 5:
        raise ValueError(f"p = {p} is too small; primes >= 5 are required")
    _PRIME_CACHE.add(p)
    return p


def next_prime_at_least(n: int) -> int:
    n = max(n, 5)
    while not is_prime(n):
        n += 1
    return n


def int_valuation(n: int, p: int) -> int:
    """v_p(n) for a nonzero integer n."""
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def fraction_valuation(q: Fraction, p: int) -> int:
    if q == 0:
        raise ValueError("valuation of 0 is undefined")
    return int_valuation(q.numerator, p) - int_valuation(q.denominator, p)


def factorial_valuation(m: int, p: int) -> int:
    """v_p(m!) by Legendre's formula."""
    e, q = 0, p
    while q <= m:
        e += m // q
        q *= p
    return e


@dataclass(frozen=True)
class PrecisionPolicy:
    """Working precision plus the retry schedule used when it runs out."""

    working_precision: int = DEFAULT_PRECISION
    max_retries: int = 3
    growth_factor: int = 2

    def __post_init__(self):
        if self.working_precision < 4:
            raise ValueError("working precision must be at least 4 digits")
        if self.growth_factor < 2:
            raise ValueError("growth factor must be at least 2")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")

    def precisions(self):
        """Yield the precision ladder: N, N*g, N*g^2, ..."""
        n = self.working_precision
        for _ in range(self.max_retries + 1):
            yield n
            n *= self.growth_factor


class PadicNumber:
    """An element of Q_p known to finitely many significant digits.

    Immutable; arithmetic propagates the conservative precision window.
    Integers and Fractions mix freely with PadicNumber in arithmetic and
    are embedded at the partner's precision.
    """

    __slots__ = ("p", "v", "unit", "prec")

    def __init__(self, p: int, v: int, unit: int, prec: int):
        require_prime(p)
        if unit == 0:
            v, prec = 0, 0
        else:
            if prec < 1:
                raise PrecisionExhausted("no significant digits left")
            unit %= p**prec
            if unit % p == 0 or unit == 0:
                raise ValueError("unit residue must be coprime to p")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "unit", unit)
        object.__setattr__(self, "prec", prec)

    def __setattr__(self, *a):  # immutable
        raise AttributeError("PadicNumber is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, p: int) -> "PadicNumber":
        return cls(p, 0, 0, 0)

    @classmethod
    def from_int(cls, a: int, p: int, prec: int = DEFAULT_PRECISION) -> "PadicNumber":
        if a == 0:
            return cls.zero(p)
        v = int_valuation(a, p)
        return cls(p, v, a // p**v, prec)

    @classmethod
    def from_rational(cls, a: int, b: int, p: int, prec: int = DEFAULT_PRECISION) -> "PadicNumber":
        """The class of a/b in Q_p to `prec` digits; valuation v_p(a) - v_p(b)."""
        if b == 0:
            raise ZeroDivisionError("denominator is zero")
        if a == 0:
            return cls.zero(p)
        va, vb = int_valuation(a, p), int_valuation(b, p)
        ua, ub = a // p**va, b // p**vb
        unit = ua * pow(ub, -1, p**prec)
        return cls(p, va - vb, unit, prec)

    @classmethod
    def from_fraction(cls, q: Fraction, p: int, prec: int = DEFAULT_PRECISION) -> "PadicNumber":
        return cls.from_rational(q.numerator, q.denominator, p, prec)

    @classmethod
    def from_residue(cls, r: int, p: int, window: int) -> "PadicNumber":
        """A value known to equal r modulo p^window (vanishing residue reads as zero)."""
        r %= p**window
        if r == 0:
            return cls.zero(p)
        v = int_valuation(r, p)
        return cls(p, v, r // p**v, window - v)

    # -- inspection --------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.unit == 0

    @property
    def valuation(self):
        """v_p of the value; +inf for exact zero."""
        return math.inf if self.is_zero else self.v

    @property
    def abs_window(self):
        """Exponent w such that the value is pinned modulo p^w."""
        return math.inf if self.is_zero else self.v + self.prec

    def residue(self, k: int) -> int:
        """The value mod p^k as an integer in [0, p^k); requires v >= 0."""
        if self.is_zero:
            return 0
        if self.v < 0:
            raise DomainError("negative valuation has no integer residue")
        if self.v + self.prec < k:
            raise PrecisionExhausted(f"value known only mod p^{self.v + self.prec}, asked mod p^{k}")
        return self.unit * self.p**self.v % self.p**k

    def digits(self, count: int):
        """Base-p digits of the unit, least significant first."""
        if self.is_zero:
            return [0] * count
        u, out = self.unit, []
        for _ in range(count):
            u, d = divmod(u, self.p)
            out.append(d)
        return out

    def __repr__(self):
        if self.is_zero:
            return f"<{self.p}-adic 0>"
        return f"<{self.p}-adic {self.unit}*{self.p}^{self.v} ({self.prec} digits)>"

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, PadicNumber):
            if other.p != self.p:
                raise ValueError("mixed primes")
            return other
        if isinstance(other, int):
            return PadicNumber.from_int(other, self.p, max(self.prec, 1) or DEFAULT_PRECISION)
        if isinstance(other, Fraction):
            return PadicNumber.from_fraction(other, self.p, max(self.prec, 1) or DEFAULT_PRECISION)
        return None

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if self.is_zero or o.is_zero:
            return self.is_zero and o.is_zero
        if self.v != o.v:
            return False
        k = min(self.prec, o.prec)
        return (self.unit - o.unit) % self.p**k == 0

    __hash__ = None

    def __neg__(self):
        if self.is_zero:
            return self
        return PadicNumber(self.p, self.v, -self.unit % self.p**self.prec, self.prec)

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if self.is_zero:
            return o
        if o.is_zero:
            return self
        window = min(self.v + self.prec, o.v + o.prec)
        vmin = min(self.v, o.v)
        mod = self.p ** (window - vmin)
        s = (self.unit * self.p ** (self.v - vmin) + o.unit * self.p ** (o.v - vmin)) % mod
        if s == 0:
            # full cancellation inside the window: additive-inverse case
            return PadicNumber.zero(self.p)
        w = int_valuation(s, self.p)
        return PadicNumber(self.p, vmin + w, s // self.p**w, window - vmin - w)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if self.is_zero or o.is_zero:
            return PadicNumber.zero(self.p)
        prec = min(self.prec, o.prec)
        return PadicNumber(self.p, self.v + o.v, self.unit * o.unit % self.p**prec, prec)

    __rmul__ = __mul__

    def inverse(self) -> "PadicNumber":
        if self.is_zero:
            raise DivisionByZero("inverse of exact zero")
        return PadicNumber(self.p, -self.v, pow(self.unit, -1, self.p**self.prec), self.prec)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = PadicNumber.from_int(1, self.p, self.prec or DEFAULT_PRECISION)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def shift(self, k: int) -> "PadicNumber":
        """Multiply by p^k (k may be negative; lowers the absolute window by -k)."""
        if self.is_zero:
            return self
        return PadicNumber(self.p, self.v + k, self.unit, self.prec)


def padic_exp(x: PadicNumber) -> PadicNumber:
    """exp(x) = sum x^k / k!, requiring v(x) >= 1 so the series converges.

    The result is a 1-unit pinned modulo p^(v(x)+prec(x)).
    """
    if x.is_zero:
        return PadicNumber.from_int(1, x.p, DEFAULT_PRECISION)
    if x.v < 1:
        raise DomainError(f"exp needs valuation >= 1, got {x.v}")
    p = x.p
    window = x.v + x.prec
    mod = p**window
    lift = x.unit * p**x.v % mod
    acc, k = 0, 0
    # stop on the monotone bound k*v - (k-1)/(p-1) >= window; the exact
    # term valuation k*v - v_p(k!) is not monotone in k
    while k * x.v * (p - 1) - (k - 1) < window * (p - 1):
        e = factorial_valuation(k, p)
        if k * x.v - e < window:
            big = p ** (window + e)
            num = pow(lift, k, big)  # divisible by p^(k*v) >= p^e
            munit = math.factorial(k) // p**e
            acc = (acc + num // p**e * pow(munit, -1, mod)) % mod
        k += 1
    return PadicNumber(p, 0, acc, window)


def padic_log(u: PadicNumber) -> PadicNumber:
    """log(u) = sum (-1)^(k+1) (u-1)^k / k for u = 1 mod p.

    Satisfies v(log u) = v(u-1) and exp(log u) = u within the window.
    """
    if u.is_zero or u.v != 0 or u.unit % u.p != 1:
        raise DomainError("log needs an argument congruent to 1 mod p")
    p = u.p
    window = u.prec
    mod = p**window
    z = (u.unit - 1) % mod
    if z == 0:
        return PadicNumber.zero(p)
    w = int_valuation(z, p)
    acc, k = 0, 1
    while True:
        # v_p(k) <= slack = floor(log_p k), and k*w - slack is increasing,
        # so once it clears the window every later term is negligible too
        slack = 0
        while p ** (slack + 1) <= k:
            slack += 1
        if k * w - slack >= window:
            break
        d = int_valuation(k, p)
        if k * w - d < window:
            big = p ** (window + d)
            num = pow(z, k, big)
            term = num // p**d * pow(k // p**d, -1, mod) % mod
            acc = (acc - term if k % 2 == 0 else acc + term) % mod
        k += 1
    if acc == 0:
        return PadicNumber.zero(p)
    vr = int_valuation(acc, p)
    return PadicNumber(p, vr, acc // p**vr, window - vr)


def binom_padic(t: PadicNumber, m: int) -> PadicNumber:
    """t(t-1)...(t-m+1)/m! for t in Z_p; the result lies in Z_p.

    Division by the p-part of m! shifts the valuation down exactly, which
    lowers the absolute window by v_p(m!).
    """
    if not t.is_zero and t.v < 0:
        raise DomainError("binomial argument must lie in Z_p")
    if m < 0:
        raise ValueError("m must be a natural number")
    p = t.p
    prec = t.prec if not t.is_zero else DEFAULT_PRECISION
    prod = PadicNumber.from_int(1, p, prec)
    for j in range(m):
        prod = prod * (t - PadicNumber.from_int(j, p, prec))
        if prod.is_zero:
            return prod  # natural t < m: the binomial vanishes exactly
    e = factorial_valuation(m, p)
    munit = math.factorial(m) // p**e
    out = (prod * PadicNumber.from_int(munit, p, prod.prec).inverse()).shift(-e)
    if out.v < 0:
        raise PrecisionExhausted("division by m! consumed the tracked valuation")
    return out
