from fractions import Fraction

import mpmath
import pytest

from dulac.scalars import E, ONE, ZERO, AmbiguousSign, Scalar, sc


def close(s: Scalar, value, tol=1e-25):
    with mpmath.workprec(160):
        return abs(s.to_mpf(128) - value) < tol


def test_rational_ring_ops():
    a = sc(Fraction(2, 3))
    b = sc(Fraction(1, 6))
    assert (a + b).as_fraction() == Fraction(5, 6)
    assert (a * b).as_fraction() == Fraction(1, 9)
    assert (a - a).is_zero()
    assert (a / b).as_fraction() == 4


def test_zero_coefficient_collapses():
    x = E - E
    assert x.is_zero()
    assert (sc(0) * E).is_zero()


def test_constant_products_merge_by_exponent_addition():
    x = Scalar.e_power(Fraction(1, 2)) * Scalar.e_power(Fraction(3, 2))
    assert x == Scalar.e_power(2)
    y = Scalar.ln_rational(6)
    assert y == Scalar.ln_rational(2) + Scalar.ln_rational(3)
    assert Scalar.ln_rational(1).is_zero()
    assert Scalar.ln_rational(Fraction(1, 2)) == -Scalar.ln_rational(2)


def test_exp_of_log_combination_is_exact():
    # exp(q ln p) = p^q stays exact
    x = (sc(Fraction(-3)) * Scalar.ln_rational(2)).exp()
    assert x.is_exact and x.as_fraction() == Fraction(1, 8)
    y = (sc(Fraction(1, 2)) * Scalar.ln_rational(2)).exp()
    assert y.is_exact
    with mpmath.workprec(160):
        assert close(y, mpmath.sqrt(mpmath.mpf(2)), tol=1e-30)
    # exp(rational) = e^rational stays exact
    z = sc(Fraction(5, 7)).exp()
    assert z.is_exact and z == Scalar.e_power(Fraction(5, 7))
    # exp of a ln-power monomial is not in the family -> ball
    w = (Scalar.ln_rational(2) * Scalar.ln_rational(2)).exp(prec=128)
    assert not w.is_exact and w.rad > 0


def test_log_of_monomial_is_exact():
    x = Scalar.e_power(3) * sc(Fraction(4, 9))
    lx = x.log()
    assert lx.is_exact
    assert lx == sc(3) + 2 * Scalar.ln_rational(2) - 2 * Scalar.ln_rational(3)


def test_pow_fraction():
    assert sc(4).pow_fraction(Fraction(1, 2)).is_exact
    assert close(sc(4).pow_fraction(Fraction(1, 2)), 2, tol=1e-30)
    assert sc(4).pow_fraction(Fraction(1, 2)) == sc(2)
    assert Scalar.e_power(2).pow_fraction(Fraction(1, 2)) == E
    assert sc(Fraction(8, 27)).pow_fraction(Fraction(-1, 3)).as_fraction() == Fraction(3, 2)


def test_sign_separation():
    assert (E - sc(2)).sign_strict() == 1          # e > 2
    assert (E - sc(3)).sign_strict() == -1         # e < 3
    assert (Scalar.ln_rational(2) - sc(1)).sign_strict() == -1
    mix = E - Scalar.ln_rational(2) - sc(2)        # 2.718 - 0.693 - 2 > 0
    assert mix.sign_strict() == 1
    assert ZERO.sign() == 0


def test_ball_arithmetic_tracks_radius():
    b = Scalar.ball(1, rad=mpmath.mpf("1e-30"), prec=128)
    c = b * b
    assert not c.is_exact
    assert c.rad > 0
    assert c.contains_zero() is False
    straddle = Scalar.ball(0, rad=mpmath.mpf("1e-10"), prec=128)
    assert straddle.contains_zero()
    assert straddle.sign() is None
    with pytest.raises(AmbiguousSign):
        straddle.sign_strict()


def test_mixed_arithmetic_promotes_to_ball():
    b = Scalar.ball(mpmath.mpf(2), prec=192)
    x = E + b
    assert not x.is_exact
    assert x.prec == 192
    with mpmath.workprec(220):
        assert abs(x.mid - (mpmath.exp(mpmath.mpf(1)) + 2)) < mpmath.mpf(2) ** -180


def test_division_errors():
    with pytest.raises(ZeroDivisionError):
        ONE / ZERO
    with pytest.raises(ZeroDivisionError):
        ONE / Scalar.ball(0, rad=mpmath.mpf("1e-5"))


def test_hash_and_eq_exact():
    assert hash(Scalar.ln_rational(4)) == hash(2 * Scalar.ln_rational(2))
    assert Scalar.ln_rational(4) == 2 * Scalar.ln_rational(2)
