import random
from fractions import Fraction

import mpmath
import pytest
from mpmath import mpf

from dulac.policy import TruncationPolicy
from dulac.scalars import ONE, ZERO, Scalar, sc
from dulac.series import AffinePart, DulacSeries, apply_A_series, log_chart

POL = TruncationPolicy(max_depth=2, lambda_cutoffs=(Fraction(3), Fraction(2), Fraction(1)))
POL8 = TruncationPolicy()


def series(affine, terms, policy=POL):
    alpha, beta = affine
    return DulacSeries(AffinePart(sc(alpha), sc(beta)),
                       tuple((sc(r), tuple(sc(c) for c in poly)) for r, poly in terms),
                       policy)


def exp_fit_coefficients(fn, rates, xs, prec=400):
    """Oracle: recover tail coefficients of fn(x) - x from samples by solving
    the exponential-fit linear system at high precision."""
    with mpmath.workprec(prec):
        A = mpmath.matrix([[mpmath.exp(-r * x) for r in rates] for x in xs])
        b = mpmath.matrix([fn(mpf(x)) - x for x in xs])
        return mpmath.lu_solve(A, b)


def test_compose_tail_free_substitution():
    # f = z + e^{-z}, g = 2z  ->  f o g = 2z + e^{-2z}
    f = series((1, 0), [(1, [1])])
    g = series((2, 0), [])
    fg = f.compose(g)
    assert fg.affine.alpha == sc(2) and fg.affine.beta.is_zero()
    assert len(fg.terms) == 1
    rate, poly = fg.terms[0]
    assert rate == sc(2) and poly[0] == ONE


def test_compose_affine_applied_to_tail():
    # g o f = 2z + 2 e^{-z}
    f = series((1, 0), [(1, [1])])
    g = series((2, 0), [])
    gf = g.compose(f)
    assert gf.affine.alpha == sc(2)
    assert len(gf.terms) == 1
    rate, poly = gf.terms[0]
    assert rate == sc(1) and poly[0] == sc(2)


def test_compose_self_against_numeric_fit_oracle():
    # f o f with f = z + e^{-z}, cutoff 3: oracle recovers the coefficients
    # from high-precision numeric composition before we trust the engine.
    f = series((1, 0), [(1, [1])])

    def numeric(x):
        inner = x + mpmath.exp(-x)
        return inner + mpmath.exp(-inner)

    fitted = exp_fit_coefficients(numeric, [1, 2, 3], [10, 15, 20])
    expected = [Fraction(2), Fraction(-1), Fraction(1, 2)]
    # fit noise is set by the discarded rate-4 tail, ~e^{-30} relative
    for got, want in zip(fitted, expected):
        assert abs(got - mpf(want.numerator) / want.denominator) < mpf("1e-12")

    ff = f.compose(f)
    assert ff.affine.is_identity()
    assert [(r.as_fraction(), p[0].as_fraction()) for r, p in ff.terms] == \
        [(1, 2), (2, -1), (3, Fraction(1, 2))]


def test_invert_affine():
    f = series((2, 1), [])
    g = f.inverse()
    assert g.affine.alpha.as_fraction() == Fraction(1, 2)
    assert g.affine.beta.as_fraction() == Fraction(-1, 2)


def test_invert_with_tail_matches_fixed_point_oracle():
    f = series((1, 0), [(1, [1])])
    g = f.inverse()
    # numeric oracle: f(g(3)) = 3 within 1e-4 with 3 tail terms
    with mpmath.workprec(200):
        x = mpf(3)
        assert abs(f.eval(g.eval(x)) - x) < mpf("1e-4")
    coeffs = {r.as_fraction(): p[0].as_fraction() for r, p in g.terms}
    assert coeffs[Fraction(1)] == -1
    assert coeffs[Fraction(2)] == -1
    assert coeffs[Fraction(3)] == Fraction(-3, 2)


def test_invert_identity():
    assert DulacSeries.identity(POL).inverse().is_identity()


def test_log_chart_identity_and_scaling():
    assert log_chart([1], POL).is_identity()
    s = log_chart([2], POL)
    assert s.affine.alpha.is_one()
    assert s.affine.beta == -Scalar.ln_rational(2)
    assert not s.terms


def test_log_chart_z_plus_z2():
    s = log_chart([1, 1], POL)
    # z - log1p(e^{-z}) = z - e^{-z} + e^{-2z}/2 - e^{-3z}/3
    got = {r.as_fraction(): p[0].as_fraction() for r, p in s.terms}
    assert got == {Fraction(1): -1, Fraction(2): Fraction(1, 2), Fraction(3): Fraction(-1, 3)}
    with mpmath.workprec(300):
        x = mpf(12)
        direct = -mpmath.ln(mpmath.exp(-x) + mpmath.exp(-2 * x))
        assert abs(s.eval(x) - direct) < mpmath.exp(-4 * x) * 2


def test_log_chart_rejects_nonpositive_leading():
    with pytest.raises(ValueError):
        log_chart([0, 1], POL)
    with pytest.raises(ValueError):
        log_chart([-2], POL)


def test_apply_A_series_affine():
    s = apply_A_series(series((2, 0), []))
    assert s.affine.alpha.is_one()
    assert s.affine.beta == Scalar.ln_rational(2)
    assert not s.terms
    # A(z + 1) = z + e^{-z} - e^{-2z}/2 + ...
    s2 = apply_A_series(series((1, 1), []))
    got = {r.as_fraction(): p[0].as_fraction() for r, p in s2.terms}
    assert got[Fraction(1)] == 1 and got[Fraction(2)] == Fraction(-1, 2)


def random_series(rng, policy=POL8):
    alpha = Fraction(rng.choice([1, 1, 2, 3]), rng.choice([1, 2]))
    beta = Fraction(rng.randint(-3, 3), rng.choice([1, 2, 4]))
    terms = []
    for rate in sorted(rng.sample([1, 2, 3, 4], rng.randint(0, 3))):
        deg = rng.randint(0, 2)
        poly = [Fraction(rng.randint(-4, 4), rng.choice([1, 2, 3])) for _ in range(deg + 1)]
        if all(c == 0 for c in poly):
            poly[0] = Fraction(1)
        terms.append((rate, poly))
    return series((alpha, beta), terms, policy)


def assert_series_close(a: DulacSeries, b: DulacSeries):
    assert (a.affine.alpha - b.affine.alpha).contains_zero()
    assert (a.affine.beta - b.affine.beta).contains_zero()
    rates = {}
    for r, p in list(a.terms):
        rates.setdefault(r.as_fraction(), [ZERO] * 8)
        for k, c in enumerate(p):
            rates[r.as_fraction()][k] = rates[r.as_fraction()][k] + c
    for r, p in list(b.terms):
        rates.setdefault(r.as_fraction(), [ZERO] * 8)
        for k, c in enumerate(p):
            rates[r.as_fraction()][k] = rates[r.as_fraction()][k] - c
    for r, cs in rates.items():
        for c in cs:
            assert c.contains_zero(), f"rate {r}: residual coefficient {c}"


def test_group_laws_random():
    rng = random.Random(20240811)
    for _ in range(40):
        f, g, h = (random_series(rng) for _ in range(3))
        assert_series_close(f.compose(g).compose(h), f.compose(g.compose(h)))
        finv = f.inverse()
        assert f.compose(finv).close_to_identity()
        assert finv.compose(f).close_to_identity()


def test_eval_matches_composition_numerically():
    rng = random.Random(7)
    with mpmath.workprec(300):
        for _ in range(10):
            f, g = random_series(rng), random_series(rng)
            fg = f.compose(g)
            for x in (mpf(9), mpf(13)):
                direct = f.eval(g.eval(x))
                # truncation error bounded by the cutoff scale at the inner argument
                inner_scale = float(g.affine.alpha.to_mpf()) * float(x)
                tol = mpmath.exp(-(8 + 1) * min(float(x), inner_scale)) * 100
                assert abs(fg.eval(x) - direct) < tol


def test_term_overflow_guard():
    tight = TruncationPolicy(max_depth=1, lambda_cutoffs=(Fraction(40), Fraction(1)), max_terms=5)
    f = series((1, 0), [(1, [1]), (2, [1]), (3, [1])], tight)
    with pytest.raises(Exception):
        f.compose(f)


def test_nonpositive_slope_rejected():
    with pytest.raises(ValueError):
        series((0, 0), [])
    with pytest.raises(ValueError):
        series((-1, 0), [])
