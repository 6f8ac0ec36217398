"""Truncated multivariate power series and analytic functions on Z_p.

Two representations live here.  TruncatedSeries is a total-degree-capped
polynomial, coefficient-ring agnostic: coefficients may be PadicNumber or
exact rationals (Fraction/int), as long as they support ring arithmetic.
MahlerFunction is a univariate analytic function Z_p -> Q_p^dim stored by
its coefficients against the binomial basis binom(t, m), together with the
decay witness c certifying v(a_m) >= m*c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import CompositionDomain, DecayViolation, DomainError, PrecisionExhausted
from .padic import PadicNumber, binom_padic, factorial_valuation

DEFAULT_DEGREE_CAP = 16


def _is_zero_coeff(c) -> bool:
    return c.is_zero if isinstance(c, PadicNumber) else c == 0


class TruncatedSeries:
    """Multivariate power series truncated at a total-degree cap.

    Stored sparsely as {exponent tuple: coefficient}; zero coefficients are
    dropped.  All arithmetic truncates at the cap.
    """

    __slots__ = ("num_vars", "degree_cap", "coeffs")

    def __init__(self, num_vars, degree_cap, coeffs=None):
        self.num_vars = num_vars
        self.degree_cap = degree_cap
        clean = {}
        for e, c in (coeffs or {}).items():
            e = tuple(e)
            if len(e) != num_vars:
                raise ValueError("exponent vector length mismatch")
            if sum(e) > degree_cap:
                continue
            if not _is_zero_coeff(c):
                clean[e] = c
        self.coeffs = clean

    @classmethod
    def constant(cls, c, num_vars, degree_cap=DEFAULT_DEGREE_CAP):
        return cls(num_vars, degree_cap, {(0,) * num_vars: c})

    @classmethod
    def variable(cls, i, num_vars, degree_cap=DEFAULT_DEGREE_CAP, one=1):
        e = [0] * num_vars
        e[i] = 1
        return cls(num_vars, degree_cap, {tuple(e): one})

    @property
    def constant_term(self):
        return self.coeffs.get((0,) * self.num_vars, 0)

    def degree(self):
        return max((sum(e) for e in self.coeffs), default=0)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        keys = set(self.coeffs) | set(other.coeffs)
        return all(self.coeffs.get(k, 0) == other.coeffs.get(k, 0) for k in keys)

    def __repr__(self):
        terms = ", ".join(f"{e}:{c!r}" for e, c in sorted(self.coeffs.items()))
        return f"TruncatedSeries({self.num_vars} vars, cap {self.degree_cap}, {{{terms}}})"

    def _compat(self, other):
        if self.num_vars != other.num_vars:
            raise ValueError("mixing series in different numbers of variables")
        return min(self.degree_cap, other.degree_cap)

    def __add__(self, other):
        cap = self._compat(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out[e] + c if e in out else c
        return TruncatedSeries(self.num_vars, cap, out)

    def __neg__(self):
        return TruncatedSeries(self.num_vars, self.degree_cap, {e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        cap = self._compat(other)
        out = {}
        for e1, c1 in self.coeffs.items():
            d1 = sum(e1)
            for e2, c2 in other.coeffs.items():
                if d1 + sum(e2) > cap:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                prod = c1 * c2
                out[e] = out[e] + prod if e in out else prod
        return TruncatedSeries(self.num_vars, cap, out)

    def scale(self, c):
        return TruncatedSeries(self.num_vars, self.degree_cap, {e: k * c for e, k in self.coeffs.items()})

    def map_coefficients(self, fn):
        return TruncatedSeries(self.num_vars, self.degree_cap, {e: fn(c) for e, c in self.coeffs.items()})

    def compose(self, inner) -> "TruncatedSeries":
        """Substitute inner[i] for variable i.

        Each inner constant term must be exactly zero, or a PadicNumber of
        valuation >= 1; otherwise substitution into a truncated series is
        not meaningful and CompositionDomain is raised.
        """
        inner = list(inner)
        if len(inner) != self.num_vars:
            raise ValueError("need one inner series per variable")
        for g in inner:
            c0 = g.constant_term
            if _is_zero_coeff(c0):
                continue
            if isinstance(c0, PadicNumber) and c0.valuation >= 1:
                continue
            raise CompositionDomain("inner constant term is a unit (valuation 0)")
        nv = inner[0].num_vars
        cap = min([self.degree_cap] + [g.degree_cap for g in inner])
        # memoized powers of each inner series
        pows = [[TruncatedSeries.constant(1, nv, cap), g] for g in inner]
        out = TruncatedSeries(nv, cap)
        for e, c in sorted(self.coeffs.items()):
            term = None
            for i, ei in enumerate(e):
                while len(pows[i]) <= ei:
                    pows[i].append(pows[i][-1] * pows[i][1])
                if ei:
                    term = pows[i][ei] if term is None else term * pows[i][ei]
            if term is None:
                term = TruncatedSeries.constant(c, nv, cap)
            else:
                term = term.scale(c)
            out = out + term
        return out

    def evaluate(self, point) -> PadicNumber:
        """Evaluate at a point of (pZ_p)^n; the sum is exact at the window."""
        point = list(point)
        if len(point) != self.num_vars:
            raise ValueError("point dimension mismatch")
        for x in point:
            if not isinstance(x, PadicNumber) or x.valuation < 1:
                raise DomainError("evaluation point must have valuation >= 1 in every coordinate")
        p = point[0].p
        acc = PadicNumber.zero(p)
        for e, c in sorted(self.coeffs.items()):
            term = c
            for x, ei in zip(point, e):
                if ei:
                    term = term * x**ei
            acc = acc + term
        return acc


def evaluate_vector(series_vec, point):
    return tuple(f.evaluate(point) for f in series_vec)


# -- Mahler-basis analytic functions ----------------------------------------


_STIRLING_ROWS = [[1]]  # signed first kind: t(t-1)...(t-m+1) = sum_k s(m,k) t^k


def stirling_first_kind(m: int):
    """Row s(m, 0..m) of signed Stirling numbers of the first kind."""
    while len(_STIRLING_ROWS) <= m:
        prev = _STIRLING_ROWS[-1]
        j = len(_STIRLING_ROWS) - 1  # extending falling factorial by (t - j)
        row = [0] * (len(prev) + 1)
        for k, c in enumerate(prev):
            row[k + 1] += c
            row[k] -= j * c
        _STIRLING_ROWS.append(row)
    return _STIRLING_ROWS[m]


class MahlerFunction:
    """Analytic map Z_p -> Q_p^dim stored as binomial-basis coefficients.

    coeffs[m] is the vector coefficient of binom(t, m); the decay witness c
    certifies v(coeffs[m]) >= m*c, which is what makes the series converge
    on all of Z_p.  Construction re-checks the witness on the stored prefix
    and raises DecayViolation when the data does not support it; callers
    holding finitely-supported data (polynomials in t, whose dropped tail
    is exactly zero) may pass check_decay=False, in which case the witness
    only asserts the tail.
    """

    __slots__ = ("prime", "dim", "coeffs", "decay", "_rescache")

    def __init__(self, prime, coeffs, decay, precision=None, check_decay=True):
        self._rescache = {}
        self.prime = prime
        self.decay = Fraction(decay)
        rows = []
        for vec in coeffs:
            if isinstance(vec, PadicNumber) or isinstance(vec, (int, Fraction)):
                vec = (vec,)
            rows.append(tuple(self._lift(c, precision) for c in vec))
        if not rows:
            raise ValueError("need at least the m = 0 coefficient")
        self.dim = len(rows[0])
        if any(len(r) != self.dim for r in rows):
            raise ValueError("ragged coefficient vectors")
        self.coeffs = tuple(rows)
        if check_decay:
            self._check_decay()

    def _lift(self, c, precision):
        if isinstance(c, PadicNumber):
            return c
        q = Fraction(c)
        return PadicNumber.from_fraction(q, self.prime, precision or 32)

    def _check_decay(self):
        for m, vec in enumerate(self.coeffs):
            need = m * self.decay
            for c in vec:
                if c.valuation < need:
                    raise DecayViolation(
                        f"coefficient {m} has valuation {c.valuation} < {need}"
                    )

    @property
    def truncation(self) -> int:
        return len(self.coeffs) - 1

    def component(self, i: int) -> "MahlerFunction":
        # data was vetted at construction of the parent
        return MahlerFunction(self.prime, [(vec[i],) for vec in self.coeffs], self.decay, check_decay=False)

    def tail_valuation(self) -> Fraction:
        """Valuation below which the dropped tail (m > M) is certified."""
        return (self.truncation + 1) * (self.decay - Fraction(1, self.prime - 1))

    def residue_window(self) -> int:
        """Largest w such that every stored coefficient is pinned mod p^w."""
        w = math.inf
        for vec in self.coeffs:
            for c in vec:
                if not c.is_zero:
                    w = min(w, c.v + c.prec)
        return w

    def _residues(self, window: int):
        tab = self._rescache.get(window)
        if tab is None:
            tab = [tuple(c.residue(window) for c in vec) for vec in self.coeffs]
            self._rescache[window] = tab
        return tab

    def evaluate_nat_residues(self, t: int, window: int):
        """Value at a natural t as integer residues mod p^window (fast path)."""
        mod = self.prime**window
        tab = self._residues(window)
        out = [0] * self.dim
        for m, vec in enumerate(tab):
            if m > t:
                break
            cm = math.comb(t, m)
            for i, r in enumerate(vec):
                if r:
                    out[i] = (out[i] + cm * r) % mod
        return tuple(out)

    def evaluate(self, t):
        """Value at t in Z_p; natural t uses exact integer binomials."""
        p = self.prime
        if isinstance(t, int):
            if t < 0:
                raise DomainError("negative integer argument; pass a PadicNumber for general Z_p points")
            w = self.residue_window()
            if w is math.inf:  # all coefficients exactly zero
                return tuple(PadicNumber.zero(p) for _ in range(self.dim))
            if all(c.is_zero or c.v >= 0 for vec in self.coeffs for c in vec):
                res = self.evaluate_nat_residues(t, w)
                return tuple(PadicNumber.from_residue(r, p, w) for r in res)
            t = PadicNumber.from_int(t, p, max(w, 1))
        if not isinstance(t, PadicNumber) or (not t.is_zero and t.v < 0):
            raise DomainError("argument must lie in Z_p")
        out = [PadicNumber.zero(p) for _ in range(self.dim)]
        for m, vec in enumerate(self.coeffs):
            if all(c.is_zero for c in vec):
                continue
            bm = binom_padic(t, m)
            for i, c in enumerate(vec):
                out[i] = out[i] + c * bm
        return tuple(out)

    def nonzero_witness(self, min_index=1, margin=2):
        """First (m, coordinate) with a certified-nonzero coefficient, m >= min_index.

        Certified means the unit survives with at least `margin` digits."""
        for m, vec in enumerate(self.coeffs):
            if m < min_index:
                continue
            for i, c in enumerate(vec):
                if not c.is_zero and c.prec >= margin:
                    return m, i, c.v
        return None

    def __repr__(self):
        return f"MahlerFunction(p={self.prime}, dim={self.dim}, M={self.truncation}, c={self.decay})"


def mahler_to_powerseries(g: MahlerFunction, coordinate: int = 0):
    """Rewrite sum a_m binom(t, m) as a power series sum b_k t^k.

    Expands binom(t, m) through signed Stirling numbers of the first kind
    (exact integer recursion) divided by m!.  Requires the decay witness
    c > 1/(p-1) strictly: contributions from index m then carry valuation
    at least m*(c - 1/(p-1)), so the b_k converge.
    """
    p = g.prime
    if g.decay <= Fraction(1, p - 1):
        raise DomainError(f"decay witness {g.decay} is not above 1/(p-1)")
    M = g.truncation
    b = [PadicNumber.zero(p) for _ in range(M + 1)]
    for m in range(M + 1):
        a = g.coeffs[m][coordinate]
        if a.is_zero:
            continue
        row = stirling_first_kind(m)
        mfact = math.factorial(m)
        for k in range(m + 1):
            if row[k] == 0:
                continue
            b[k] = b[k] + a * Fraction(row[k], mfact)
    return b


@dataclass(frozen=True)
class ZeroStructure:
    """Zero-set verdict for one scalar analytic function on Z_p."""

    kind: str  # "identically_zero" | "finitely_many"
    zero_count_bound: int | None = None

    def __post_init__(self):
        if self.kind not in ("identically_zero", "finitely_many"):
            raise ValueError(self.kind)
        if self.kind == "finitely_many" and (self.zero_count_bound is None or self.zero_count_bound < 0):
            raise ValueError("finitely_many requires a bound >= 0")

    @classmethod
    def identically_zero(cls):
        return cls("identically_zero")

    @classmethod
    def finitely_many(cls, bound: int):
        return cls("finitely_many", bound)

    @property
    def is_identically_zero(self):
        return self.kind == "identically_zero"


def zero_structure(g: MahlerFunction, coordinate: int = 0, *, zero_threshold=None, confirm=None) -> ZeroStructure:
    """Classify the zero set of one coordinate of a Mahler-basis function.

    All-exact-zero coefficients give IdenticallyZero outright.  Otherwise
    let w be the minimal coefficient valuation of the power-series form and
    B the last index attaining it: when the dropped tail is certified below
    w, the function has at most B zeros in Z_p and FinitelyMany(B) is
    returned.  When the surviving coefficients sit at or above
    `zero_threshold` (or cannot be separated from the tail), the verdict
    IdenticallyZero is only issued after `confirm(k)` certifies an exact
    zero at k = 0..B; without a confirmation callback the situation is
    reported as PrecisionExhausted.
    """
    b = mahler_to_powerseries(g, coordinate)
    nonzero = [(k, bk.v) for k, bk in enumerate(b) if not bk.is_zero]
    if not nonzero:
        return ZeroStructure.identically_zero()
    w = min(v for _, v in nonzero)
    B = max(k for k, v in nonzero if v == w)
    tail = g.tail_valuation()
    separable = w < tail
    if separable and (zero_threshold is None or w < zero_threshold):
        return ZeroStructure.finitely_many(B)
    if confirm is None:
        raise PrecisionExhausted(
            "maximal-norm coefficient index is ambiguous at working precision"
        )
    if all(confirm(k) for k in range(B + 1)):
        return ZeroStructure.identically_zero()
    if not separable:
        raise PrecisionExhausted(
            "coefficients are indistinguishable from the truncation tail"
        )
    return ZeroStructure.finitely_many(B)
