"""Uniformization of polynomial-map orbits by analytic functions on Z_p.

Given a polynomial self-map f of affine n-space over Q and a rational
starting point x, this module produces a family of analytic maps
theta_0..theta_{s-1} from Z_p to Q_p^n, stored in Mahler form, with

    theta_i(k) = f^(T + i + s*k)(x)   for all natural k,

where T is the tail of the orbit of x modulo a well-chosen prime p and s
is a stride along which the iteration becomes congruent to the identity.
The Mahler coefficients are forward differences of the orbit sequence,
computed on exact residues modulo a generous power of p, and carry the
decay witness v(a_m) >= m*c that certifies convergence on all of Z_p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    BadPrime,
    DecayViolation,
    NoPrimeFound,
    NotFixedModP,
    PrecisionExhausted,
    SingularLinearPart,
)
from .padic import (
    PadicNumber,
    PrecisionPolicy,
    int_valuation,
    is_prime,
    next_prime_at_least,
)
from .series import DEFAULT_DEGREE_CAP, MahlerFunction, TruncatedSeries

_ORBIT_ENUM_CAP = 200_000  # mod-p orbit longer than this fails the prime


class PolySelfMap:
    """Polynomial self-map of affine n-space with rational coefficients."""

    __slots__ = ("num_vars", "components", "_modcache")

    def __init__(self, num_vars, components):
        self.num_vars = num_vars
        comps = []
        for comp in components:
            clean = {}
            for e, c in comp.items():
                e = tuple(int(k) for k in e)
                if len(e) != num_vars or any(k < 0 for k in e):
                    raise ValueError(f"bad exponent vector {e}")
                q = Fraction(c)
                if q:
                    clean[e] = q
            comps.append(clean)
        if len(comps) != num_vars:
            raise ValueError("need one component per variable")
        self.components = tuple(comps)
        self._modcache = {}

    @classmethod
    def univariate(cls, coeffs):
        """1-variable map from {degree: coefficient}."""
        return cls(1, [{(d,): c for d, c in coeffs.items()}])

    @classmethod
    def identity(cls, num_vars):
        comps = []
        for j in range(num_vars):
            e = [0] * num_vars
            e[j] = 1
            comps.append({tuple(e): Fraction(1)})
        return cls(num_vars, comps)

    @classmethod
    def linear(cls, matrix):
        """The map X -> M X for a square rational matrix (list of rows)."""
        n = len(matrix)
        comps = []
        for row in matrix:
            comp = {}
            for i, c in enumerate(row):
                e = [0] * n
                e[i] = 1
                comp[tuple(e)] = Fraction(c)
            comps.append(comp)
        return cls(n, comps)

    def degree(self):
        return max((sum(e) for comp in self.components for e in comp), default=0)

    def all_coefficients(self):
        for comp in self.components:
            yield from comp.values()

    def is_p_integral(self, p: int) -> bool:
        return all(c.denominator % p != 0 for c in self.all_coefficients())

    def evaluate(self, point):
        """Exact rational evaluation."""
        out = []
        for comp in self.components:
            acc = Fraction(0)
            for e, c in comp.items():
                term = c
                for x, k in zip(point, e):
                    if k:
                        term *= x**k
                acc += term
            out.append(acc)
        return tuple(out)

    def _reduced(self, p: int, window: int):
        key = (p, window)
        tab = self._modcache.get(key)
        if tab is None:
            mod = p**window
            tab = []
            for comp in self.components:
                red = {}
                for e, c in comp.items():
                    r = c.numerator * pow(c.denominator, -1, mod) % mod
                    if r:
                        red[e] = r
                tab.append(red)
            self._modcache[key] = tab
        return tab

    def _reduced_terms(self, p: int, window: int):
        key = ("terms", p, window)
        terms = self._modcache.get(key)
        if terms is None:
            terms = [
                [(tuple((i, k) for i, k in enumerate(e) if k), c) for e, c in red.items()]
                for red in self._reduced(p, window)
            ]
            self._modcache[key] = terms
        return terms

    def evaluate_mod(self, point, p: int, window: int = 1):
        """Evaluation on residues modulo p^window (coefficients reduced there)."""
        mod = p**window
        out = []
        for terms in self._reduced_terms(p, window):
            acc = 0
            for e, c in terms:
                term = c
                for i, k in e:
                    term = term * pow(point[i], k, mod)
                acc += term
            out.append(acc % mod)
        return tuple(out)

    def orbit_mod(self, start, p: int, window: int, length: int):
        """[x, f(x), ..., f^(length-1)(x)] on residues mod p^window."""
        out = [tuple(c % p**window for c in start)]
        for _ in range(length - 1):
            out.append(self.evaluate_mod(out[-1], p, window))
        return out

    def jacobian_mod_p(self, point, p: int):
        """Matrix of partial derivatives at a point, over F_p."""
        n = self.num_vars
        red = self._reduced(p, 1)
        jac = [[0] * n for _ in range(n)]
        for j, comp in enumerate(red):
            for e, c in comp.items():
                for i in range(n):
                    if e[i] == 0:
                        continue
                    term = c * e[i] % p
                    for t in range(n):
                        k = e[t] - (1 if t == i else 0)
                        if k:
                            term = term * pow(point[t], k, p) % p
                    jac[j][i] = (jac[j][i] + term) % p
        return jac

    def congruence_exponent(self, p: int):
        """min_p-valuation over the coefficients of f - id; inf for the identity."""
        best = math.inf
        for j, comp in enumerate(self.components):
            unit = tuple(1 if t == j else 0 for t in range(self.num_vars))
            seen_unit = False
            for e, c in comp.items():
                q = c - 1 if e == unit else c
                if e == unit:
                    seen_unit = True
                if q:
                    v = int_valuation(q.numerator, p) - int_valuation(q.denominator, p)
                    best = min(best, v)
            if not seen_unit:
                best = min(best, 0)  # missing linear self-term: f - id has a unit coefficient
        return best

    def __repr__(self):
        return f"PolySelfMap({self.num_vars} vars, degree {self.degree()})"


def _det_mod(mat, p: int) -> int:
    """Determinant over F_p by elimination."""
    m = [row[:] for row in mat]
    n = len(m)
    det = 1
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] % p), None)
        if piv is None:
            return 0
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        inv = pow(m[col][col], -1, p)
        det = det * m[col][col] % p
        for r in range(col + 1, n):
            fac = m[r][col] * inv % p
            if fac:
                for cidx in range(col, n):
                    m[r][cidx] = (m[r][cidx] - fac * m[col][cidx]) % p
    return det % p


def _point_mod(point, p: int, window: int = 1):
    mod = p**window
    return tuple(q.numerator * pow(q.denominator, -1, mod) % mod for q in point)


def good_prime(smap: PolySelfMap, point, extra=(), start: int = 5, candidates: int = 500) -> int:
    """Smallest usable prime >= max(5, start).

    Usable means: every coefficient of the map, the point and the extra
    rational data is p-integral, and the Jacobian determinant of the
    reduced map is nonzero at every point of the mod-p forward orbit of
    the point (no ramification along the tail or the cycle).
    """
    point = tuple(Fraction(q) for q in point)
    extra = tuple(Fraction(q) for q in extra)
    p = next_prime_at_least(max(5, start))
    for _ in range(candidates):
        if _prime_screens(smap, point, extra, p):
            return p
        p = next_prime_at_least(p + 1)
    raise NoPrimeFound(f"no usable prime among the first {candidates} candidates from {start}")


def _prime_screens(smap, point, extra, p) -> bool:
    if not smap.is_p_integral(p):
        return False
    if any(q.denominator % p == 0 for q in point):
        return False
    if any(q.denominator % p == 0 for q in extra):
        return False
    # walk the forward orbit mod p until it closes, checking unramifiedness
    cur = _point_mod(point, p)
    seen = set()
    while cur not in seen:
        if len(seen) > _ORBIT_ENUM_CAP:
            return False
        if _det_mod(smap.jacobian_mod_p(cur, p), p) == 0:
            return False
        seen.add(cur)
        cur = smap.evaluate_mod(cur, p)
    return True


@dataclass(frozen=True)
class CycleData:
    """Tail length, cycle length and the cycle itself for the mod-p orbit."""

    tail_length: int
    cycle_length: int
    cycle_points: tuple

    def __post_init__(self):
        if self.tail_length < 0 or self.cycle_length < 1:
            raise ValueError("tail must be >= 0 and cycle >= 1")


def find_cycle(smap: PolySelfMap, start, p: int) -> CycleData:
    """Brent cycle detection for the reduced map acting on F_p^n."""
    start = tuple(c % p for c in start)

    def step(pt):
        return smap.evaluate_mod(pt, p)

    power = lam = 1
    tortoise, hare = start, step(start)
    while tortoise != hare:
        if power == lam:
            tortoise, power, lam = hare, power * 2, 0
        hare = step(hare)
        lam += 1
    tortoise = hare = start
    for _ in range(lam):
        hare = step(hare)
    mu = 0
    while tortoise != hare:
        tortoise, hare = step(tortoise), step(hare)
        mu += 1
    pts = []
    cur = tortoise
    for _ in range(lam):
        pts.append(cur)
        cur = step(cur)
    assert cur == pts[0], "cycle does not close"
    return CycleData(mu, lam, tuple(pts))


class RescaledMap:
    """Self-map of Z_p^n in disk coordinates X = x0 + p*Y.

    Stored as truncated series with p-integral coefficients; the degree-m
    coefficients are divisible by p^(m-1), which is what survives the
    substitution of p*Y and the division by p.  congruence_exponent is the
    measured c with H(Y) = Y mod p^c (inf when H is exactly the identity
    to the stored window); step_power records how many applications of the
    original map one application of H represents.
    """

    __slots__ = ("prime", "series", "congruence_exponent", "step_power")

    def __init__(self, prime, series, step_power=1):
        self.prime = prime
        self.series = tuple(series)
        self.step_power = step_power
        n = len(self.series)
        c = math.inf
        for j, h in enumerate(self.series):
            unit = tuple(1 if t == j else 0 for t in range(n))
            for e, coeff in h.coeffs.items():
                m = sum(e)
                if not coeff.is_zero and coeff.v < m - 1:
                    raise ValueError(
                        f"degree-{m} coefficient of component {j} has valuation {coeff.v} < {m - 1}"
                    )
                delta = coeff - 1 if e == unit else coeff
                if not delta.is_zero:
                    c = min(c, delta.valuation)
            if unit not in h.coeffs:  # missing linear self-term: H - id has a unit there
                c = min(c, 0)
        self.congruence_exponent = c

    @property
    def num_vars(self):
        return len(self.series)

    def affine_part_mod_p(self):
        """(L, C) with H(Y) = C + L*Y mod p."""
        p = self.prime
        n = self.num_vars
        L = [[0] * n for _ in range(n)]
        C = [0] * n
        for j, h in enumerate(self.series):
            for e, coeff in h.coeffs.items():
                if coeff.is_zero or coeff.v >= 1:
                    continue
                if sum(e) == 0:
                    C[j] = coeff.residue(1)
                elif sum(e) == 1:
                    L[j][e.index(1)] = coeff.residue(1)
        return L, C

    def compose_with(self, other: "RescaledMap") -> "RescaledMap":
        """self after other (degree-capped composition)."""
        inner = list(other.series)
        series = [h.compose(inner) for h in self.series]
        return RescaledMap(self.prime, series, self.step_power * other.step_power)

    def evaluate(self, point):
        return tuple(h.evaluate(point) for h in self.series)


def rescale_at_point(smap: PolySelfMap, point, p: int, precision: int = 32, degree_cap: int = DEFAULT_DEGREE_CAP) -> RescaledMap:
    """Disk chart H(Y) = (f(x0 + p Y) - x0) / p at a point fixed mod p.

    The point may be given as exact rationals or as residues modulo a
    power of p; coefficients of H come out pinned modulo p^precision.
    """
    window = precision + 1  # one power is consumed by the division by p
    mod = p**window
    if all(isinstance(c, int) for c in point):
        res = tuple(c % mod for c in point)
    else:
        res = _point_mod(tuple(Fraction(c) for c in point), p, window)
    img = smap.evaluate_mod(res, p, window)
    if any((a - b) % p for a, b in zip(img, res)):
        raise NotFixedModP("the map does not fix the point modulo p")
    series = _shifted_series(smap, res, img, p, window, degree_cap)
    # constant term: (f(x0) - x0)/p, pinned mod p^precision
    out = []
    for j, ser in enumerate(series):
        delta = (img[j] - res[j]) % mod
        const = PadicNumber.from_residue(delta // p, p, precision)
        coeffs = dict(ser.coeffs)
        zero_e = (0,) * smap.num_vars
        if not const.is_zero:
            coeffs[zero_e] = const
        out.append(TruncatedSeries(smap.num_vars, degree_cap, coeffs))
    return RescaledMap(p, out)


def _shifted_series(smap, res, img, p, window, degree_cap):
    """Nonconstant part of (f(x0 + p Y) - f(x0)) / p on residues mod p^window."""
    mod = p**window
    n = smap.num_vars
    out = []
    for red in smap._reduced(p, window):
        acc = {}
        for e, c in red.items():
            # expand prod_i (x_i + p y_i)^(e_i), skipping the k = 0 constant
            terms = [((0,) * n, c)]
            for i in range(n):
                if e[i] == 0:
                    continue
                new = []
                xi = res[i]
                for kvec, coeff in terms:
                    for ki in range(e[i] + 1):
                        if sum(kvec) + ki > degree_cap:
                            continue
                        w = coeff * math.comb(e[i], ki) % mod
                        w = w * pow(xi, e[i] - ki, mod) % mod
                        w = w * pow(p, ki, mod) % mod
                        if w:
                            kk = list(kvec)
                            kk[i] = ki
                            new.append((tuple(kk), w))
                terms = new
            for kvec, w in terms:
                if sum(kvec) == 0:
                    continue
                acc[kvec] = (acc.get(kvec, 0) + w) % mod
        coeffs = {}
        for kvec, w in acc.items():
            if w % p:
                raise NotFixedModP("nonconstant coefficient not divisible by p")  # cannot happen: carries p^|k|
            coeffs[kvec] = PadicNumber.from_residue(w // p, p, window - 1)
        out.append(TruncatedSeries(n, degree_cap, coeffs))
    return out


def _affine_order(L, C, p: int) -> int:
    """Order of Y -> C + L Y in the affine group over F_p."""
    n = len(L)
    if _det_mod(L, p) == 0:
        raise SingularLinearPart("linear part is degenerate mod p")
    cap = p**n
    for i in range(n):
        cap *= p**n - p**i
    ident = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    A = [row[:] for row in L]
    b = list(C)
    for k in range(1, cap + 1):
        if A == ident and not any(b):
            return k
        b = [(sum(L[j][t] * b[t] for t in range(n)) + C[j]) % p for j in range(n)]
        A = [[sum(L[j][t] * A[t][i] for t in range(n)) % p for i in range(n)] for j in range(n)]
    raise SingularLinearPart("affine map never returned to the identity")  # unreachable for det != 0


def linear_order_mod_p(H: RescaledMap) -> int:
    """Smallest N >= 1 with the reduced affine part of H iterated N times = id."""
    L, C = H.affine_part_mod_p()
    return _affine_order(L, C, H.prime)


def boost_congruence(F: RescaledMap, target_c) -> RescaledMap:
    """Replace F by F^(p^k) until its congruence exponent reaches target_c."""
    target = Fraction(target_c)
    cur = F
    while cur.congruence_exponent < target:
        if cur.congruence_exponent < 1:
            raise ValueError("boosting needs a starting congruence exponent >= 1")
        nxt = cur
        for _ in range(cur.prime - 1):
            nxt = nxt.compose_with(cur)
        nxt = RescaledMap(cur.prime, nxt.series, cur.step_power * cur.prime)
        if nxt.congruence_exponent <= cur.congruence_exponent:
            raise PrecisionExhausted("congruence exponent failed to increase while boosting")
        cur = nxt
    return cur


def finite_differences(orbit, decay=Fraction(1)):
    """Mahler coefficients of k -> y_k: the m-th forward difference at 0.

    orbit is a list of equal-length tuples of PadicNumber.  The measured
    coefficients must obey v(a_m) >= m*decay; a violation means the
    preprocessing promised a wrong decay and raises DecayViolation.
    """
    decay = Fraction(decay)
    rows = [tuple(y) for y in orbit]
    dim = len(rows[0])
    coeffs = [rows[0]]
    for m in range(1, len(orbit)):
        rows = [tuple(b[i] - a[i] for i in range(dim)) for a, b in zip(rows, rows[1:])]
        coeffs.append(rows[0])
    for m, vec in enumerate(coeffs):
        for c in vec:
            if c.valuation < m * decay:
                raise DecayViolation(
                    f"difference {m} has valuation {c.valuation} < {m * decay}"
                )
    return coeffs


@dataclass(frozen=True)
class OrbitInterpolation:
    """Analytic interpolation of an orbit along residue classes of a stride."""

    prime: int
    point: tuple
    tail_length: int
    stride: int
    decay: Fraction
    precision: int
    thetas: tuple
    verified_horizon: int

    def classify(self, n: int):
        """Split an index into tail / (class, k) position."""
        if n < self.tail_length:
            return ("tail", n)
        off = n - self.tail_length
        return ("class", off % self.stride, off // self.stride)

    def value_at(self, n: int):
        kind, *pos = self.classify(n)
        if kind == "tail":
            raise ValueError(f"index {n} is in the tail; no analytic class covers it")
        i, k = pos
        return self.thetas[i].evaluate(k)


def _mahler_truncation(precision: int, decay: Fraction, p: int) -> int:
    gap = decay - Fraction(1, p - 1)
    return max(2, math.ceil(Fraction(precision + 2) / gap))


def uniformize_orbit(
    smap: PolySelfMap,
    point,
    policy: PrecisionPolicy = PrecisionPolicy(),
    *,
    horizon: int = 50,
    prime: int | None = None,
    extra_screen=(),
    degree_cap: int = DEFAULT_DEGREE_CAP,
) -> OrbitInterpolation:
    """Full uniformization pipeline with precision retries.

    Picks a usable prime (or validates the supplied one), finds the mod-p
    cycle, normalizes the iteration to a stride along which it is
    congruent to the identity, interpolates every residue class by its
    orbit forward differences, and verifies the interpolation against
    direct iteration up to the horizon.
    """
    point = tuple(Fraction(q) for q in point)
    if prime is None:
        p = good_prime(smap, point, extra_screen)
    else:
        p = prime
        if not is_prime(p) or p < 5:
            raise BadPrime(f"{p} is not a usable prime")
        if not _prime_screens(smap, point, tuple(Fraction(q) for q in extra_screen), p):
            raise BadPrime(f"prime {p} fails the integrality/unramifiedness screen")
    err = None
    for n_digits in policy.precisions():
        try:
            return _uniformize_at_precision(smap, point, p, n_digits, horizon, degree_cap)
        except (PrecisionExhausted, DecayViolation) as exc:
            err = exc
    raise err


def _uniformize_at_precision(smap, point, p, precision, horizon, degree_cap):
    c0 = smap.congruence_exponent(p)
    if c0 >= 1:
        # the map is itself congruent to the identity coefficientwise:
        # interpolate the plain orbit with stride 1
        tail, stride = 0, 1
        decay = Fraction(min(c0, precision))
    else:
        cyc = find_cycle(smap, _point_mod(point, p), p)
        tail, l = cyc.tail_length, cyc.cycle_length
        base_orbit = smap.orbit_mod(_point_mod(point, p, 2), p, 2, tail + l + 1)
        # linear part of the l-step disk return map: product of Jacobians
        # along the cycle; constant part: the p-digit of f^l(x') - x'
        L = None
        for j in range(l):
            J = smap.jacobian_mod_p(tuple(c % p for c in base_orbit[tail + j]), p)
            L = J if L is None else _matmul_mod(J, L, p)
        C = [((a - b) % (p * p)) // p for a, b in zip(base_orbit[tail + l], base_orbit[tail])]
        order = _affine_order(L, C, p)
        stride = l * order
        decay = Fraction(1)
    M = _mahler_truncation(precision, decay, p)
    window = precision + math.ceil(M * decay) + 4
    need = tail + stride * (max(M, horizon) + 1) + 1
    orbit = smap.orbit_mod(_point_mod(point, p, window), p, window, need)
    mod = p**window
    dim = smap.num_vars
    thetas = []
    for i in range(stride):
        # forward-difference table on integer residues, one coordinate at a
        # time, lifted to tracked values only once at the end
        table = [[0] * dim for _ in range(M + 1)]
        for t in range(dim):
            col = [orbit[tail + i + stride * k][t] for k in range(M + 1)]
            table[0][t] = col[0]
            for m in range(1, M + 1):
                col = [(col[j + 1] - col[j]) % mod for j in range(len(col) - 1)]
                table[m][t] = col[0]
        coeffs = [tuple(PadicNumber.from_residue(r, p, window) for r in vec) for vec in table]
        thetas.append(MahlerFunction(p, coeffs, decay))
    interp = OrbitInterpolation(
        prime=p,
        point=point,
        tail_length=tail,
        stride=stride,
        decay=decay,
        precision=precision,
        thetas=tuple(thetas),
        verified_horizon=horizon,
    )
    _verify_interpolation(interp, orbit, precision, horizon)
    return interp


def _matmul_mod(A, B, p):
    n = len(A)
    return [[sum(A[i][t] * B[t][j] for t in range(n)) % p for j in range(n)] for i in range(n)]


def _verify_interpolation(interp, orbit, precision, horizon):
    p = interp.prime
    check = max(precision - 2, 1)  # slack of two digits
    for i, theta in enumerate(interp.thetas):
        w = theta.residue_window()
        w = check if w is math.inf else min(w, check)
        for k in range(horizon + 1):
            idx = interp.tail_length + i + interp.stride * k
            if idx >= len(orbit):
                break
            got = theta.evaluate_nat_residues(k, w)
            if any((a - b) % p**w for a, b in zip(got, orbit[idx])):
                raise PrecisionExhausted(
                    f"interpolation disagrees with iteration at class {i}, k={k}"
                )
