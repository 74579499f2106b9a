"""Near-affine small Dulac series in the logarithmic chart.

A series is  affine(z) + sum_i P_i(z) * exp(-rate_i * z)  with Scalar
coefficients, strictly positive increasing rates, truncated at the policy's
depth-0 cutoff.  This class is a group under composition (to truncation),
which is what the rewriting stages lean on.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
from mpmath import mpf

from .policy import DEFAULT_POLICY, TermOverflow, TruncationPolicy
from .scalars import ONE, ZERO, Scalar, sc

Poly = tuple  # tuple[Scalar, ...], coefficient of z^k at index k


# ---------------------------------------------------------------------------
# polynomial helpers
# ---------------------------------------------------------------------------

def poly_trim(p: Sequence[Scalar]) -> Poly:
    q = list(p)
    while q and q[-1].is_zero():
        q.pop()
    return tuple(q)


def poly_add(p: Poly, q: Poly) -> Poly:
    n = max(len(p), len(q))
    out = []
    for i in range(n):
        a = p[i] if i < len(p) else ZERO
        b = q[i] if i < len(q) else ZERO
        out.append(a + b)
    return poly_trim(out)


def poly_scale(p: Poly, c: Scalar) -> Poly:
    if c.is_zero():
        return ()
    return poly_trim([c * a for a in p])


def poly_mul(p: Poly, q: Poly) -> Poly:
    if not p or not q:
        return ()
    out = [ZERO] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a.is_zero():
            continue
        for j, b in enumerate(q):
            if b.is_zero():
                continue
            out[i + j] = out[i + j] + a * b
    return poly_trim(out)


def poly_compose_affine(p: Poly, alpha: Scalar, beta: Scalar) -> Poly:
    """P(alpha*z + beta) expanded."""
    out: Poly = ()
    lin = (beta, alpha)
    power: Poly = (ONE,)
    for k, c in enumerate(p):
        if k:
            power = poly_mul(power, lin)
        out = poly_add(out, poly_scale(power, c))
    return out


def poly_derivative(p: Poly) -> Poly:
    return poly_trim([p[k] * k for k in range(1, len(p))])


def poly_eval(p: Poly, x: mpf) -> mpf:
    v = mpf(0)
    for c in reversed(p):
        v = v * x + c.to_mpf()
    return v


def poly_is_constant(p: Poly) -> bool:
    return len(p) <= 1


# ---------------------------------------------------------------------------
# tails: sorted lists of (rate, poly)
# ---------------------------------------------------------------------------

def _rate_cmp(a: Scalar, b: Scalar) -> int:
    c = a.cmp(b)
    if c is None:
        raise ArithmeticError("ambiguous rate comparison in tail normalization")
    return c


def tail_normalize(items: Iterable, cutoff: Fraction, max_terms: int) -> tuple:
    """Merge equal rates, sort ascending, drop zero polys and rates > cutoff."""
    merged: list = []
    for rate, poly in items:
        poly = poly_trim(poly)
        if not poly:
            continue
        if rate.sign() is not None and rate.sign() <= 0:
            raise ValueError(f"flat term with nonpositive rate {rate}")
        if rate.cmp(cutoff) == 1:
            continue
        for i, (r0, p0) in enumerate(merged):
            if _rate_cmp(rate, r0) == 0:
                merged[i] = (r0, poly_add(p0, poly))
                break
        else:
            merged.append((rate, poly))
    merged = [(r, p) for r, p in merged if poly_trim(p)]
    merged.sort(key=functools.cmp_to_key(lambda a, b: _rate_cmp(a[0], b[0])))
    n_terms = sum(len(p) for _, p in merged)
    if n_terms > max_terms:
        raise TermOverflow(f"{n_terms} tail terms exceed cap {max_terms}")
    return tuple((r, poly_trim(p)) for r, p in merged)


def tail_add(a, b):
    return list(a) + list(b)


def tail_scale(a, c: Scalar):
    return [(r, poly_scale(p, c)) for r, p in a]


def tail_mul_raw(a, b):
    out = []
    for r1, p1 in a:
        for r2, p2 in b:
            out.append((r1 + r2, poly_mul(p1, p2)))
    return out


def tail_min_rate(a):
    rates = [r for r, _ in a]
    if not rates:
        return None
    m = rates[0]
    for r in rates[1:]:
        if _rate_cmp(r, m) < 0:
            m = r
    return m


def tail_cap_degrees(items, lam_low: float, dmax: int):
    """Trim slot polynomials above the provable degree bound.

    In any sum of products of tail factors with min rate >= lam_low and
    factor degree <= dmax, the slot at rate r has degree <= (r/lam_low)*dmax.
    """
    if dmax == 0:
        return [(r, p[:1]) for r, p in items]
    out = []
    for r, p in items:
        bound = int(float(r.to_mpf(64)) / lam_low + 1e-9) * dmax
        out.append((r, p[: bound + 1]))
    return out


def tail_series_expand(tail, coeff_fn, cutoff: Fraction, max_terms: int):
    """sum_{j>=1} coeff_fn(j) * tail^j, truncated at the cutoff.

    Requires a strictly positive minimal rate so that powers eventually
    leave the window.
    """
    tail = tail_normalize(tail, cutoff, max_terms)
    if not tail:
        return ()
    lam = tail_min_rate(tail)
    lam_f = lam.as_fraction() if lam.is_rational() else None
    lam_low = float(lam.to_mpf(64)) * 0.999999
    dmax = max(len(p) - 1 for _, p in tail)
    out: list = []
    power = list(tail)
    j = 1
    while True:
        c = coeff_fn(j)
        if not sc(c).is_zero():
            out.extend(tail_scale(power, sc(c)))
        j += 1
        if lam_f is not None and lam_f * j > cutoff:
            break
        power = tail_normalize(
            tail_cap_degrees(tail_mul_raw(power, tail), lam_low, dmax),
            cutoff, max_terms)
        if not power:
            break
        if j > 4 * max_terms:
            raise TermOverflow("series expansion failed to terminate")
    return tail_normalize(out, cutoff, max_terms)


def tail_log1p(tail, cutoff, max_terms):
    return tail_series_expand(tail, lambda j: Fraction((-1) ** (j + 1), j), cutoff, max_terms)


def tail_expm1(tail, cutoff, max_terms):
    return tail_series_expand(tail, lambda j: Fraction(1, math.factorial(j)), cutoff, max_terms)


def tail_pow1p(tail, a: Fraction, cutoff, max_terms):
    """(1 + tail)^a - 1 as a tail."""
    def binom(j):
        num = Fraction(1)
        for i in range(j):
            num *= (Fraction(a) - i)
        return num / math.factorial(j)

    return tail_series_expand(tail, binom, cutoff, max_terms)


def _substitute_tail(terms, other: "DulacSeries", pol) -> list:
    """Tail of sum_i P_i(other(z)) exp(-rate_i * other(z)) as raw items."""
    cut, cap = pol.cutoff(0), pol.max_terms
    a2 = other.affine
    out: list = []
    for rate, poly in terms:
        # exp(-rate*other) = C exp(-rate*alpha2*z) (1 + expm1(-rate*tail2))
        base_rate = rate * a2.alpha
        if base_rate.cmp(cut) == 1:
            continue
        c = (-(rate * a2.beta)).exp()
        exp_tail = tail_expm1(tail_scale(other.terms, -rate), cut, cap)
        # P(other(z)) = sum_k P^(k)(a2(z)) * tail2^k / k!
        p_aff = poly_compose_affine(poly, a2.alpha, a2.beta)
        contrib = [(base_rate, poly_scale(p_aff, c))]
        deriv = poly
        t_pow = list(other.terms)
        k = 1
        while True:
            deriv = poly_derivative(deriv)
            if not deriv:
                break
            d_aff = poly_compose_affine(deriv, a2.alpha, a2.beta)
            fac = sc(Fraction(1, math.factorial(k)))
            for tr, tp in tail_normalize(t_pow, cut, cap):
                contrib.append((base_rate + tr, poly_scale(poly_mul(d_aff, tp), c * fac)))
            k += 1
            t_pow = tail_mul_raw(t_pow, other.terms)
        out.extend(contrib)
        out.extend(tail_mul_raw(contrib, exp_tail))
    return out


# ---------------------------------------------------------------------------
# AffinePart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffinePart:
    alpha: Scalar
    beta: Scalar

    def __post_init__(self):
        object.__setattr__(self, "alpha", sc(self.alpha))
        object.__setattr__(self, "beta", sc(self.beta))
        s = self.alpha.sign()
        if s is None or s <= 0:
            raise ValueError(f"affine slope must be positive, got {self.alpha}")

    @staticmethod
    def identity() -> "AffinePart":
        return AffinePart(ONE, ZERO)

    def is_identity(self) -> bool:
        return self.alpha.is_one() and self.beta.is_zero()

    def compose(self, other: "AffinePart") -> "AffinePart":
        # (self o other)(z) = alpha1*(alpha2 z + beta2) + beta1
        return AffinePart(self.alpha * other.alpha, self.alpha * other.beta + self.beta)

    def inverse(self) -> "AffinePart":
        ia = self.alpha.inverse()
        return AffinePart(ia, -(self.beta * ia))

    def eval(self, x: mpf) -> mpf:
        return self.alpha.to_mpf() * x + self.beta.to_mpf()

    def __str__(self):
        return f"{self.alpha}*z + {self.beta}"


# ---------------------------------------------------------------------------
# DulacSeries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DulacSeries:
    affine: AffinePart
    terms: tuple = ()
    policy: TruncationPolicy = DEFAULT_POLICY

    def __post_init__(self):
        object.__setattr__(
            self, "terms",
            tail_normalize(self.terms, self.policy.cutoff(0), self.policy.max_terms))

    # -- constructors ---------------------------------------------------

    @staticmethod
    def identity(policy: TruncationPolicy = DEFAULT_POLICY) -> "DulacSeries":
        return DulacSeries(AffinePart.identity(), (), policy)

    @staticmethod
    def from_affine(alpha, beta, policy: TruncationPolicy = DEFAULT_POLICY) -> "DulacSeries":
        return DulacSeries(AffinePart(sc(alpha), sc(beta)), (), policy)

    @property
    def cutoff(self) -> Fraction:
        return self.policy.cutoff(0)

    def is_identity(self) -> bool:
        return self.affine.is_identity() and not self.terms

    def is_r_zero(self) -> bool:
        """Member of R^0: identity affine part."""
        return self.affine.is_identity()

    def with_policy(self, policy: TruncationPolicy) -> "DulacSeries":
        return DulacSeries(self.affine, self.terms, policy)

    # -- algebra ----------------------------------------------------------

    def r_zero_split(self) -> tuple[AffinePart, "DulacSeries"]:
        """Write self = a o s0 with s0 in R^0 (exact)."""
        a = self.affine
        ia = a.inverse()
        s0 = DulacSeries(AffinePart.identity(), tail_scale(self.terms, ia.alpha), self.policy)
        return a, s0

    def compose(self, other: "DulacSeries") -> "DulacSeries":
        """self o other, truncated at the shared depth-0 cutoff."""
        pol = self.policy
        a1, a2 = self.affine, other.affine
        affine = a1.compose(a2)
        tail: list = list(tail_scale(other.terms, a1.alpha))
        tail.extend(_substitute_tail(self.terms, other, pol))
        return DulacSeries(affine, tail, pol)

    def inverse(self) -> "DulacSeries":
        """Compositional inverse to truncation, by affine seed + fixed point.

        The iteration g <- a^{-1} o (id - tail o g) fixes roughly one rate
        slot per pass, so intermediate series are truncated at a cutoff that
        grows with the iteration; this keeps not-yet-converged junk from
        blowing up polynomial degrees.
        """
        pol = self.policy
        ia = self.affine.inverse()
        if not self.terms:
            return DulacSeries(ia, (), pol)
        full = pol.cutoff(0)
        lam_min = tail_min_rate(self.terms)
        gain_f = float((lam_min * ia.alpha).to_mpf(64))
        gain = max(Fraction(1, 16), Fraction(gain_f).limit_denominator(64) * Fraction(15, 16))

        def at_cutoff(cut: Fraction) -> TruncationPolicy:
            cuts = (min(cut, full),) + tuple(pol.lambda_cutoffs[1:])
            return TruncationPolicy(pol.max_depth, cuts, pol.max_terms, pol.precision_bits)

        # slots of the true inverse at rate r have degree <= c*r with
        # c = (dmax+1)/lam_min; capping there only trims non-converged junk
        dmax = max((len(p) - 1 for _, p in self.terms), default=0)
        lam_f = float(lam_min.to_mpf(64))
        deg_c = (dmax + 1) / max(lam_f, 1e-6) + 1.0

        def cap_degrees(items):
            out = []
            for r, p in items:
                bound = int(deg_c * max(float(r.to_mpf(64)), lam_f)) + dmax + 1
                out.append((r, p[: bound + 1]))
            return out

        g = DulacSeries(ia, (), pol)
        max_iter = int(full / gain) + 8
        for j in range(1, max_iter + 4):
            cut = min(Fraction(j + 1) * gain, full)
            pol_j = at_cutoff(cut)
            u = _substitute_tail(self.terms, g.with_policy(pol_j), pol_j)
            g_new = DulacSeries(ia, cap_degrees(tail_scale(u, -ia.alpha)), pol)
            if cut >= full and g_new == g:
                break
            g = g_new
        roundtrip = self.compose(g)
        if roundtrip.close_to_identity():
            return g
        raise ArithmeticError("inverse iteration did not stabilize; policy too tight")

    def close_to_identity(self) -> bool:
        """Identity up to exact-zero or zero-straddling-ball coefficients."""
        if not (self.affine.alpha - ONE).contains_zero():
            return False
        if not self.affine.beta.contains_zero():
            return False
        for _, poly in self.terms:
            for c in poly:
                if not c.contains_zero():
                    return False
        return True

    def scale_tail(self, c: Scalar) -> "DulacSeries":
        return DulacSeries(self.affine, tail_scale(self.terms, c), self.policy)

    # -- evaluation --------------------------------------------------------

    def eval(self, x: mpf) -> mpf:
        v = self.affine.eval(x)
        for rate, poly in self.terms:
            v += poly_eval(poly, x) * mpmath.exp(-rate.to_mpf() * x)
        return v

    def eval_derivative(self, x: mpf) -> mpf:
        v = self.affine.alpha.to_mpf()
        for rate, poly in self.terms:
            r = rate.to_mpf()
            e = mpmath.exp(-r * x)
            v += (poly_eval(poly_derivative(poly), x) - r * poly_eval(poly, x)) * e
        return v

    # -- misc ----------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, DulacSeries):
            return NotImplemented
        if self.affine.alpha != other.affine.alpha or self.affine.beta != other.affine.beta:
            return False
        if len(self.terms) != len(other.terms):
            return False
        for (r1, p1), (r2, p2) in zip(self.terms, other.terms):
            if r1 != r2 or len(p1) != len(p2):
                return False
            if any(a != b for a, b in zip(p1, p2)):
                return False
        return True

    def __hash__(self):
        return hash((self.affine.alpha, self.affine.beta, len(self.terms)))

    def __str__(self):
        bits = [str(self.affine)]
        for rate, poly in self.terms:
            ps = " + ".join(f"{c}*z^{k}" if k else f"{c}" for k, c in enumerate(poly) if not c.is_zero())
            bits.append(f"({ps})*exp(-{rate}*z)")
        return " + ".join(bits)


def log_chart(coeffs: Sequence, policy: TruncationPolicy = DEFAULT_POLICY) -> DulacSeries:
    """Logarithmic-chart image of an analytic germ z -> c1 z + c2 z^2 + ...

    Returns  z - ln(c1) - log1p(sum_{k>=2} (c_k/c1) exp(-(k-1) z)),
    a series with constant polynomials.
    """
    cs = [sc(c) for c in coeffs]
    if not cs:
        raise ValueError("empty coefficient list")
    c1 = cs[0]
    s = c1.sign()
    if s is None or s <= 0:
        raise ValueError(f"leading coefficient must be positive, got {c1}")
    cut, cap = policy.cutoff(0), policy.max_terms
    inner = [(sc(k), (ck / c1,)) for k, ck in enumerate(cs[1:], start=1)]
    tail = tail_scale(tail_log1p(inner, cut, cap), sc(-1))
    return DulacSeries(AffinePart(ONE, -c1.log()), tail, policy)


def apply_A_series(s: DulacSeries) -> "DulacSeries":
    """A(s) = ln o s o exp restricted to the depth-0 part.

    Valid only when s is affine (the general case lives in germs.apply_A):
    A(alpha z + beta) = z + ln(alpha) + log1p((beta/alpha) e^{-z}).
    """
    if s.terms:
        raise ValueError("apply_A_series expects an affine series; use germs.apply_A")
    pol = s.policy
    alpha, beta = s.affine.alpha, s.affine.beta
    cut, cap = pol.cutoff(0), pol.max_terms
    tail = tail_log1p([(sc(1), (beta / alpha,))], cut, cap) if not beta.is_zero() else ()
    return DulacSeries(AffinePart(ONE, alpha.log()), tail, pol)
