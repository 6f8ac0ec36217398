import random
from fractions import Fraction

import pytest

from padicdyn.errors import BadPrime, DecayViolation, NoPrimeFound, NotFixedModP
from padicdyn.padic import PadicNumber, PrecisionPolicy
from padicdyn.series import TruncatedSeries
from padicdyn.uniformize import (
    CycleData,
    PolySelfMap,
    RescaledMap,
    boost_congruence,
    find_cycle,
    finite_differences,
    good_prime,
    linear_order_mod_p,
    rescale_at_point,
    uniformize_orbit,
)

F = Fraction


def uni(coeffs):
    return PolySelfMap.univariate(coeffs)


class TestPolySelfMap:
    def test_exact_and_modular_evaluation_agree(self):
        f = uni({2: 1, 0: 1})  # x^2 + 1
        pt = (F(3),)
        exact = f.evaluate(pt)
        assert exact == (F(10),)
        assert f.evaluate_mod((3,), 7, 2) == (10,)

    def test_congruence_exponent(self):
        assert uni({1: 6}).congruence_exponent(5) == 1
        assert uni({1: 1, 2: 5}).congruence_exponent(5) == 1
        assert uni({1: 1, 2: 25}).congruence_exponent(5) == 2
        assert uni({1: 2}).congruence_exponent(5) == 0
        assert PolySelfMap.identity(2).congruence_exponent(5) == float("inf")

    def test_jacobian(self):
        f = PolySelfMap(2, [{(0, 1): F(1)}, {(1, 0): F(1)}])  # swap
        assert f.jacobian_mod_p((1, 1), 5) == [[0, 1], [1, 0]]


class TestGoodPrime:
    def test_square_plus_one_needs_seven(self):
        # oracle: mod 5 the orbit of 1 hits 0 where f' = 2x vanishes
        f = uni({2: 1, 0: 1})
        assert good_prime(f, [F(1)]) == 7

    def test_translation_takes_five(self):
        assert good_prime(uni({1: 1, 0: 1}), [F(0)]) == 5

    def test_integrality_screen_skips_denominator(self):
        f = uni({1: F(1, 5)})
        assert good_prime(f, [F(0)], start=5) >= 7

    def test_extra_data_screened(self):
        f = uni({1: 1, 0: 1})
        assert good_prime(f, [F(0)], extra=[F(1, 5)]) >= 7

    def test_no_prime_found(self):
        f = uni({1: 1, 0: 1})
        with pytest.raises(NoPrimeFound):
            good_prime(f, [F(0)], extra=[F(1, 5)], candidates=1)


class TestFindCycle:
    def test_translation_cycle(self):
        cyc = find_cycle(uni({1: 1, 0: 1}), (0,), 5)
        assert (cyc.tail_length, cyc.cycle_length) == (0, 5)

    def test_squaring_from_two(self):
        # oracle enumeration: 2 -> 4 -> 1 -> 1 -> ... tail 2, cycle length 1
        seq = [(2,)]
        f = uni({2: 1})
        for _ in range(6):
            seq.append(f.evaluate_mod(seq[-1], 5))
        assert seq[:4] == [(2,), (4,), (1,), (1,)]
        cyc = find_cycle(f, (2,), 5)
        assert (cyc.tail_length, cyc.cycle_length) == (2, 1)
        assert cyc.cycle_points == ((1,),)

    def test_fixed_point(self):
        cyc = find_cycle(uni({2: 1}), (1,), 5)
        assert (cyc.tail_length, cyc.cycle_length) == (0, 1)

    def test_brent_matches_naive_enumeration(self):
        rng = random.Random(3)
        for _ in range(40):
            p = rng.choice([5, 7])
            f = uni({d: rng.randint(0, p - 1) for d in range(3)})
            x = (rng.randint(0, p - 1),)
            seq, seen = [x], {}
            while seq[-1] not in seen:
                seen[seq[-1]] = len(seq) - 1
                seq.append(f.evaluate_mod(seq[-1], p))
            mu = seen[seq[-1]]
            lam = len(seq) - 1 - mu
            cyc = find_cycle(f, x, p)
            assert (cyc.tail_length, cyc.cycle_length) == (mu, lam)


class TestRescale:
    def test_square_plus_five_at_zero(self):
        h = rescale_at_point(uni({2: 1, 0: 5}), [F(0)], 5, precision=10)
        ser = h.series[0]
        assert ser.coeffs[(0,)] == 1
        assert ser.coeffs[(2,)] == 5
        assert (1,) not in ser.coeffs
        assert h.congruence_exponent == 0  # constant term is the unit 1

    def test_identity_rescales_to_identity(self):
        h = rescale_at_point(PolySelfMap.identity(1), [F(2)], 5, precision=10)
        assert h.series[0].coeffs == {(1,): h.series[0].coeffs[(1,)]}
        assert h.congruence_exponent == float("inf")

    def test_not_fixed(self):
        with pytest.raises(NotFixedModP):
            rescale_at_point(uni({1: 1, 0: 1}), [F(0)], 5)

    def test_growth_of_coefficients(self):
        # degree-m coefficients of the disk chart must be divisible by p^(m-1)
        f = uni({3: 2, 2: 1, 1: 4, 0: 0})
        h = rescale_at_point(f, [F(0)], 5, precision=12)
        for e, c in h.series[0].coeffs.items():
            assert c.valuation >= sum(e) - 1

    def test_point_as_residues(self):
        h1 = rescale_at_point(uni({2: 1, 0: 5}), [F(0)], 5, precision=10)
        h2 = rescale_at_point(uni({2: 1, 0: 5}), [0], 5, precision=10)
        assert h1.series[0] == h2.series[0]


class TestLinearOrder:
    def test_identity_is_one(self):
        h = rescale_at_point(PolySelfMap.identity(1), [F(0)], 5)
        assert linear_order_mod_p(h) == 1

    def test_doubling_has_order_four(self):
        h = rescale_at_point(uni({1: 2}), [F(0)], 5)
        assert linear_order_mod_p(h) == 4  # order of 2 in F_5*

    def test_translation_has_order_p(self):
        h = rescale_at_point(uni({1: 1, 0: 5}), [F(0)], 5)
        assert linear_order_mod_p(h) == 5  # unipotent: Y -> Y + 1


class TestBoost:
    def test_already_good_enough(self):
        h = rescale_at_point(uni({1: 6}), [F(0)], 5, precision=12)
        assert h.congruence_exponent == 1
        boosted = boost_congruence(h, F(1, 4))
        assert boosted is h and boosted.step_power == 1

    def test_identity_fixed(self):
        h = rescale_at_point(PolySelfMap.identity(1), [F(0)], 5)
        assert boost_congruence(h, 3) is h

    def test_boost_to_two(self):
        x = TruncatedSeries(1, 16, {(1,): PadicNumber.from_int(1, 5, 20), (2,): PadicNumber.from_int(5, 5, 20)})
        fmap = RescaledMap(5, [x])
        assert fmap.congruence_exponent == 1
        boosted = boost_congruence(fmap, 2)
        assert boosted.congruence_exponent >= 2
        assert boosted.step_power == 5
        # cross-check the truncated composition against direct iteration
        f = uni({1: 1, 2: 5})
        val = F(5)
        for _ in range(5):
            val = f.evaluate((val,))[0]
        got = boosted.series[0].evaluate([PadicNumber.from_fraction(F(5), 5, 20)])
        want = PadicNumber.from_fraction(val, 5, 20)
        assert (got - want).is_zero or (got - want).valuation >= 15


class TestFiniteDifferences:
    def Zv(self, vals, p=5, prec=20):
        return [(PadicNumber.from_int(v, p, prec),) for v in vals]

    def test_hand_computed_orbit(self):
        a = finite_differences(self.Zv([1, 6, 186]))
        assert [c[0] == w for c, w in zip(a, [1, 5, 175])] == [True] * 3
        assert [c[0].v for c in a] == [0, 1, 2]

    def test_constant_orbit(self):
        a = finite_differences(self.Zv([7, 7, 7, 7]))
        assert a[0][0] == 7 and all(c[0].is_zero for c in a[1:])

    def test_decay_violation(self):
        with pytest.raises(DecayViolation):
            finite_differences(self.Zv([1, 2, 3]), Fraction(1))


class TestUniformizeOrbit:
    def test_scaling_map_matches_power_oracle(self):
        f = uni({1: 6})
        interp = uniformize_orbit(f, [F(1)], prime=5, horizon=20)
        assert interp.tail_length == 0 and interp.stride == 1
        for k in range(15):
            got = interp.thetas[0].evaluate(k)[0]
            assert got == 6**k

    def test_identity_constant(self):
        interp = uniformize_orbit(PolySelfMap.identity(1), [F(3)], horizon=10)
        th = interp.thetas[0]
        assert th.evaluate(7)[0] == 3
        assert all(all(c.is_zero for c in vec) for vec in th.coeffs[1:])

    def test_contracting_quadratic(self):
        f = uni({1: 1, 2: 5})
        interp = uniformize_orbit(f, [F(1)], prime=5, horizon=12)
        assert interp.stride == 1
        assert interp.thetas[0].evaluate(2)[0] == 186
        # leading Mahler coefficients are the hand-derived differences
        lead = [vec[0] for vec in interp.thetas[0].coeffs[:3]]
        assert lead[0] == 1 and lead[1] == 5 and lead[2] == 175

    def test_negation_period_two(self):
        interp = uniformize_orbit(uni({1: -1}), [F(3)], prime=5, horizon=10)
        assert interp.stride == 2
        assert interp.thetas[0].evaluate(4)[0] == 3
        assert interp.thetas[1].evaluate(4)[0] == -3

    def test_square_plus_one_interpolates(self):
        f = uni({2: 1, 0: 1})
        interp = uniformize_orbit(f, [F(1)], horizon=12)
        assert interp.prime == 7
        p, N = interp.prime, interp.precision
        # iteration oracle on residues
        mod = p**N
        seq = [1 % mod]
        for _ in range(300):
            seq.append((seq[-1] ** 2 + 1) % mod)
        for i, th in enumerate(interp.thetas):
            for k in range(8):
                idx = interp.tail_length + i + interp.stride * k
                got = th.evaluate(k)[0]
                want = PadicNumber.from_residue(seq[idx], p, N)
                assert (got - want).is_zero or (got - want).valuation >= N - 2

    def test_decay_invariant(self):
        f = uni({2: 1, 0: 1})
        interp = uniformize_orbit(f, [F(1)], horizon=5)
        for th in interp.thetas:
            for m, vec in enumerate(th.coeffs):
                for c in vec:
                    assert c.valuation >= m * interp.decay

    def test_classify(self):
        f = uni({2: 1})
        interp = uniformize_orbit(f, [F(2)], horizon=5)
        T, s = interp.tail_length, interp.stride
        assert interp.classify(T + 1 + 2 * s) == ("class", 1 % s, 2 + (1 // s))

    def test_bad_prime_rejected(self):
        with pytest.raises(BadPrime):
            uniformize_orbit(uni({2: 1, 0: 1}), [F(1)], prime=5, horizon=5)
        with pytest.raises(BadPrime):
            uniformize_orbit(uni({1: 1}), [F(0)], prime=6, horizon=5)

    def test_two_variable_rotation(self):
        f = PolySelfMap(2, [{(0, 1): F(1)}, {(1, 0): F(-1)}])  # (x, y) -> (y, -x)
        interp = uniformize_orbit(f, [F(1), F(2)], prime=5, horizon=10)
        # exact orbit has period 4: (1,2) (2,-1) (-1,-2) (-2,1)
        vals = {0: (1, 2), 1: (2, -1), 2: (-1, -2), 3: (1 * -2, 1)}
        for n in range(interp.tail_length, 12):
            kind, i, k = interp.classify(n)
            got = interp.thetas[i].evaluate(k)
            want = vals[n % 4]
            assert got[0] == want[0] and got[1] == want[1]

    def test_randomized_interpolation_agreement(self):
        rng = random.Random(17)
        done = 0
        while done < 8:
            n = rng.choice([1, 2])
            comps = []
            for _ in range(n):
                comp = {}
                for _ in range(rng.randint(1, 3)):
                    e = tuple(rng.randint(0, 2) for _ in range(n))
                    comp[e] = F(rng.randint(-3, 3))
                comps.append(comp)
            f = PolySelfMap(n, comps)
            x = [F(rng.randint(-2, 2)) for _ in range(n)]
            try:
                interp = uniformize_orbit(f, x, PrecisionPolicy(16, 1, 2), horizon=10)
            except NoPrimeFound:
                continue
            p, N = interp.prime, interp.precision
            window = 2 * N
            orbit = f.orbit_mod(
                tuple(q.numerator * pow(q.denominator, -1, p**window) % p**window for q in x),
                p, window, interp.tail_length + interp.stride * 11 + 1,
            )
            for i, th in enumerate(interp.thetas):
                for k in range(10):
                    idx = interp.tail_length + i + interp.stride * k
                    if idx >= len(orbit):
                        break
                    diff = th.evaluate(k)[0] - PadicNumber.from_residue(orbit[idx][0], p, N)
                    assert diff.is_zero or diff.valuation >= N - 2
            done += 1
