"""Coefficient field for the log-chart engine.

A Scalar is either *exact* -- a rational linear combination of canonical
constant monomials built from e^q, ln(p) and p^q (p prime, q rational) --
or a high-precision *ball* (midpoint + radius in bits of mpmath precision).

Exact scalars stay exact under ring operations; exp/ln/powers fall back to
balls whenever the result leaves the monomial family.  Mixed arithmetic
promotes the exact side to a ball at the other side's precision.  Every
"zero" or sign verdict is therefore auditable: exact verdicts come from
canonical form, ball verdicts from radius separation.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Union

import mpmath
from mpmath import mpf

RAD_PREC = 30  # radius carries ~9 significant digits, always rounded up

RationalLike = Union[int, Fraction]


def _fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected rational, got {type(x).__name__}: {x!r}")


def _factor(n: int) -> dict[int, int]:
    """Prime factorization by trial division (inputs are desk-scale)."""
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


# A monomial key is a sorted tuple of (generator, exponent) pairs with
# nonzero Fraction exponents.  Generators:
#   ("e",)      -- Euler's number
#   ("ln", p)   -- ln(p), p prime >= 2
#   ("rt", p)   -- p itself carried with a non-integer rational exponent
MonoKey = tuple

_ONE_KEY: MonoKey = ()


def _mono_mul(a: MonoKey, b: MonoKey) -> tuple[MonoKey, Fraction]:
    """Multiply two monomial keys; integer prime powers fold into a rational
    cofactor which is returned alongside the combined key."""
    exps: dict = {}
    for gen, q in a:
        exps[gen] = exps.get(gen, Fraction(0)) + q
    for gen, q in b:
        exps[gen] = exps.get(gen, Fraction(0)) + q
    return _mono_normalize(exps)


def _mono_pow(a: MonoKey, k: Fraction) -> tuple[MonoKey, Fraction]:
    exps = {gen: q * k for gen, q in a}
    return _mono_normalize(exps)


def _mono_normalize(exps: dict) -> tuple[MonoKey, Fraction]:
    cofactor = Fraction(1)
    items = []
    for gen, q in exps.items():
        if q == 0:
            continue
        if gen[0] == "rt" and q.denominator == 1:
            cofactor *= Fraction(gen[1]) ** q.numerator
            continue
        items.append((gen, q))
    items.sort()
    return tuple(items), cofactor


def _mono_eval(key: MonoKey, prec: int) -> mpf:
    """Midpoint evaluation of a monomial at working precision `prec`."""
    with mpmath.workprec(prec + 16):
        v = mpf(1)
        for gen, q in key:
            qe = mpf(q.numerator) / mpf(q.denominator)
            if gen[0] == "e":
                v *= mpmath.exp(qe)
            elif gen[0] == "ln":
                v *= mpmath.ln(gen[1]) ** qe
            else:  # ("rt", p)
                v *= mpmath.power(gen[1], qe)
        return v


def _ulp(m: mpf, prec: int) -> mpf:
    return mpmath.fmul(abs(m), mpf(2) ** (2 - prec), prec=RAD_PREC, rounding="u")


def _radd(*rs) -> mpf:
    out = mpf(0)
    for r in rs:
        out = mpmath.fadd(out, r, prec=RAD_PREC, rounding="u")
    return out


def _rmul(a, b) -> mpf:
    return mpmath.fmul(a, b, prec=RAD_PREC, rounding="u")


class AmbiguousSign(ArithmeticError):
    """A ball straddles zero where a sign was required."""


class Scalar:
    """Exact-or-ball scalar.  Immutable."""

    __slots__ = ("terms", "mid", "rad", "prec")

    def __init__(self, terms=None, mid=None, rad=None, prec=None, _clean=False):
        # exact: terms is a dict {MonoKey: Fraction}; ball: terms is None
        if terms is not None:
            if _clean:
                self.terms = terms
            else:
                self.terms = {k: v for k, v in terms.items() if v != 0}
            self.mid = self.rad = self.prec = None
        else:
            self.terms = None
            self.mid = mid
            self.rad = rad if rad is not None else mpf(0)
            self.prec = prec if prec is not None else mpmath.mp.prec

    # -- constructors -------------------------------------------------

    @staticmethod
    def from_rational(q: RationalLike) -> "Scalar":
        q = _fraction(q)
        return Scalar(terms={_ONE_KEY: q} if q else {})

    @staticmethod
    def e_power(q: RationalLike) -> "Scalar":
        q = _fraction(q)
        if q == 0:
            return ONE
        return Scalar(terms={((("e",), q),): Fraction(1)})

    @staticmethod
    def ln_rational(r: RationalLike) -> "Scalar":
        """ln(r) for rational r > 0, expanded over prime logarithms."""
        r = _fraction(r)
        if r <= 0:
            raise ValueError("ln of nonpositive rational")
        terms: dict = {}
        for p, e in _factor(r.numerator).items():
            key = ((("ln", p), Fraction(1)),)
            terms[key] = terms.get(key, Fraction(0)) + e
        for p, e in _factor(r.denominator).items():
            key = ((("ln", p), Fraction(1)),)
            terms[key] = terms.get(key, Fraction(0)) - e
        return Scalar(terms=terms)

    @staticmethod
    def ball(mid, rad=None, prec=None) -> "Scalar":
        prec = prec or mpmath.mp.prec
        with mpmath.workprec(prec):
            m = mpf(mid)
        return Scalar(mid=m, rad=mpf(rad) if rad is not None else mpf(0), prec=prec)

    # -- predicates ---------------------------------------------------

    @property
    def is_exact(self) -> bool:
        return self.terms is not None

    def is_zero(self) -> bool:
        """True only for the exact zero.  Ball zero-ness is semi-decided."""
        return self.terms is not None and not self.terms

    def is_rational(self) -> bool:
        return self.is_exact and all(k == _ONE_KEY for k in self.terms)

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"not a rational scalar: {self}")
        return self.terms.get(_ONE_KEY, Fraction(0))

    def is_one(self) -> bool:
        return self.is_exact and self.terms == {_ONE_KEY: Fraction(1)}

    def contains_zero(self) -> bool:
        """Semi-decision used by degenerate-input handling."""
        if self.is_exact:
            return self.is_zero()
        return abs(self.mid) <= self.rad

    # -- ball conversion ----------------------------------------------

    def to_ball(self, prec: int) -> tuple[mpf, mpf]:
        if not self.is_exact:
            return self.mid, self.rad
        with mpmath.workprec(prec + 16):
            total = mpf(0)
            for key, q in self.terms.items():
                total += _mono_eval(key, prec) * mpf(q.numerator) / mpf(q.denominator)
        n_ops = 4 * max(1, len(self.terms))
        rad = _rmul(_ulp(total, prec + 16) if total else mpf(2) ** (-prec), mpf(n_ops))
        return total, rad

    def to_mpf(self, prec: Optional[int] = None) -> mpf:
        prec = prec or mpmath.mp.prec
        return self.to_ball(prec)[0]

    def __float__(self) -> float:
        return float(self.to_mpf(64))

    # -- ring operations ----------------------------------------------

    def _coerce(self, other) -> "Scalar":
        if isinstance(other, Scalar):
            return other
        if isinstance(other, (int, Fraction)):
            return Scalar.from_rational(other)
        raise TypeError(f"cannot mix Scalar with {type(other).__name__}")

    def __add__(self, other):
        if not isinstance(other, Scalar):
            other = self._coerce(other)
        if self.terms is not None and other.terms is not None:
            terms = dict(self.terms)
            for k, v in other.terms.items():
                s = terms.get(k)
                if s is None:
                    terms[k] = v
                else:
                    s = s + v
                    if s:
                        terms[k] = s
                    else:
                        del terms[k]
            return Scalar(terms=terms, _clean=True)
        prec = min(p for p in (self.prec, other.prec) if p) if not (self.is_exact and other.is_exact) else None
        prec = prec or mpmath.mp.prec
        m1, r1 = self.to_ball(prec)
        m2, r2 = other.to_ball(prec)
        with mpmath.workprec(prec):
            m = m1 + m2
        return Scalar(mid=m, rad=_radd(r1, r2, _ulp(m, prec)), prec=prec)

    __radd__ = __add__

    def __neg__(self):
        if self.is_exact:
            return Scalar(terms={k: -v for k, v in self.terms.items()})
        return Scalar(mid=-self.mid, rad=self.rad, prec=self.prec)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, Scalar):
            other = self._coerce(other)
        if self.terms is not None and other.terms is not None:
            st, ot = self.terms, other.terms
            if len(st) == 1 and len(ot) == 1:
                (k1, v1), = st.items()
                (k2, v2), = ot.items()
                v = v1 * v2
                if not v:
                    return ZERO
                if not k1:
                    return Scalar(terms={k2: v}, _clean=True)
                if not k2:
                    return Scalar(terms={k1: v}, _clean=True)
                key, cof = _mono_mul(k1, k2)
                return Scalar(terms={key: v * cof} if v * cof else {}, _clean=True)
            terms: dict = {}
            for k1, v1 in st.items():
                for k2, v2 in ot.items():
                    if k1 and k2:
                        key, cof = _mono_mul(k1, k2)
                        v = v1 * v2 * cof
                    else:
                        key, v = (k1 or k2), v1 * v2
                    s = terms.get(key)
                    if s is None:
                        if v:
                            terms[key] = v
                    else:
                        s = s + v
                        if s:
                            terms[key] = s
                        else:
                            del terms[key]
            return Scalar(terms=terms, _clean=True)
        if self.is_exact and self.is_zero():
            return ZERO
        if other.is_exact and other.is_zero():
            return ZERO
        prec = min(p for p in (self.prec, other.prec) if p)
        m1, r1 = self.to_ball(prec)
        m2, r2 = other.to_ball(prec)
        with mpmath.workprec(prec):
            m = m1 * m2
        rad = _radd(_rmul(abs(m1), r2), _rmul(abs(m2), r1), _rmul(r1, r2), _ulp(m, prec))
        return Scalar(mid=m, rad=rad, prec=prec)

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        if self.is_exact:
            if len(self.terms) == 1:
                (key, q), = self.terms.items()
                if q == 0:
                    raise ZeroDivisionError("exact zero scalar")
                ikey, cof = _mono_pow(key, Fraction(-1))
                return Scalar(terms={ikey: cof / q})
            if not self.terms:
                raise ZeroDivisionError("exact zero scalar")
            # multi-term exact values invert to balls
            return Scalar.ball(1, prec=mpmath.mp.prec) / self
        m, r = self.mid, self.rad
        if abs(m) <= r:
            raise ZeroDivisionError("ball straddles zero")
        with mpmath.workprec(self.prec):
            im = 1 / m
        denom = mpmath.fsub(abs(m), r, prec=RAD_PREC, rounding="d")
        rad = _radd(mpmath.fdiv(r, _rmul(abs(m), denom) or mpf(1), prec=RAD_PREC, rounding="u"),
                    _ulp(im, self.prec))
        return Scalar(mid=im, rad=rad, prec=self.prec)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.is_exact and len(other.terms) <= 1:
            return self * other.inverse()
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def pow_fraction(self, k: RationalLike) -> "Scalar":
        """self**k for rational k; exact for single positive monomials."""
        k = _fraction(k)
        if k == 0:
            return ONE
        if k.denominator == 1 and k >= 0:
            out = ONE
            for _ in range(k.numerator):
                out = out * self
            return out
        if self.is_exact and len(self.terms) == 1:
            (key, q), = self.terms.items()
            if q > 0:
                nkey, cof1 = _mono_pow(key, k)
                if q.numerator == 1 and q.denominator == 1:
                    return Scalar(terms={nkey: cof1})
                # q**k: factor the rational into primes
                qk: dict = {}
                for p, e in _factor(q.numerator).items():
                    qk[("rt", p)] = qk.get(("rt", p), Fraction(0)) + e * k
                for p, e in _factor(q.denominator).items():
                    qk[("rt", p)] = qk.get(("rt", p), Fraction(0)) - e * k
                qkey, cof2 = _mono_normalize(qk)
                key3, cof3 = _mono_mul(nkey, qkey)
                return Scalar(terms={key3: cof1 * cof2 * cof3})
        prec = self.prec or mpmath.mp.prec
        m, r = self.to_ball(prec)
        if m <= r:
            raise AmbiguousSign("fractional power of a nonpositive/straddling scalar")
        with mpmath.workprec(prec):
            kq = mpf(k.numerator) / mpf(k.denominator)
            v = mpmath.power(m, kq)
            drel = mpmath.fdiv(r, m - r, prec=RAD_PREC, rounding="u")
        rad = _radd(_rmul(abs(v), _rmul(abs(kq) if abs(kq) > 1 else mpf(1), drel)), _ulp(v, prec))
        return Scalar(mid=v, rad=rad, prec=prec)

    def exp(self, prec: Optional[int] = None) -> "Scalar":
        """e**self; exact when self is rational + rational multiples of ln p."""
        if self.is_exact:
            out_terms = {_ONE_KEY: Fraction(1)}
            acc = Scalar(terms=out_terms)
            ok = True
            for key, q in self.terms.items():
                if key == _ONE_KEY:
                    acc = acc * Scalar.e_power(q)
                elif len(key) == 1 and key[0][0][0] == "ln" and key[0][1] == 1:
                    p = key[0][0][1]
                    acc = acc * Scalar.from_rational(p).pow_fraction(q)
                else:
                    ok = False
                    break
            if ok:
                return acc
        prec = prec or self.prec or mpmath.mp.prec
        m, r = self.to_ball(prec)
        with mpmath.workprec(prec):
            v = mpmath.exp(m)
        rad = _radd(_rmul(abs(v), _rmul(r, mpf(2))), _ulp(v, prec))
        return Scalar(mid=v, rad=rad, prec=prec)

    def log(self, prec: Optional[int] = None) -> "Scalar":
        """ln(self); exact for single monomials q*e^a*prod(p^b), no ln factors."""
        if self.is_exact and len(self.terms) == 1:
            (key, q), = self.terms.items()
            if q > 0 and all(gen[0] != "ln" for gen, _ in key):
                out = Scalar.ln_rational(q)
                for gen, ex in key:
                    if gen[0] == "e":
                        out = out + Scalar.from_rational(ex)
                    else:  # ("rt", p)
                        out = out + Scalar.from_rational(ex) * Scalar.ln_rational(gen[1])
                return out
        prec = prec or self.prec or mpmath.mp.prec
        m, r = self.to_ball(prec)
        if m <= r:
            raise AmbiguousSign("log of nonpositive/straddling scalar")
        with mpmath.workprec(prec):
            v = mpmath.ln(m)
        rad = _radd(mpmath.fdiv(r, m - r, prec=RAD_PREC, rounding="u"), _ulp(v, prec))
        return Scalar(mid=v, rad=rad, prec=prec)

    # -- comparisons ----------------------------------------------------

    def sign(self, max_prec: int = 1 << 14) -> Optional[int]:
        """-1/0/+1, or None when a ball straddles zero at max_prec.

        Exact multi-term combinations are separated numerically; distinct
        canonical monomials are treated as linearly independent over Q, so
        a nonzero combination always separates at some precision.
        """
        if self.is_exact:
            if not self.terms:
                return 0
            if len(self.terms) == 1:
                q = next(iter(self.terms.values()))
                return 1 if q > 0 else -1
            prec = 128
            while prec <= max_prec:
                m, r = self.to_ball(prec)
                if abs(m) > r:
                    return 1 if m > 0 else -1
                prec *= 2
            return None
        if abs(self.mid) > self.rad:
            return 1 if self.mid > 0 else -1
        return None

    def sign_strict(self) -> int:
        s = self.sign()
        if s is None:
            raise AmbiguousSign(f"sign undecided: {self}")
        return s

    def cmp(self, other) -> Optional[int]:
        return (self - self._coerce(other)).sign()

    def __lt__(self, other):
        c = self.cmp(other)
        if c is None:
            raise AmbiguousSign("comparison undecided")
        return c < 0

    def __le__(self, other):
        c = self.cmp(other)
        if c is None:
            raise AmbiguousSign("comparison undecided")
        return c <= 0

    def __gt__(self, other):
        return self._coerce(other) < self

    def __ge__(self, other):
        return self._coerce(other) <= self

    def __eq__(self, other):
        if not isinstance(other, (Scalar, int, Fraction)):
            return NotImplemented
        other = self._coerce(other)
        if self.is_exact and other.is_exact:
            return (self - other).is_zero()
        return (self - other).cmp(0) == 0

    def __hash__(self):
        if self.is_exact:
            return hash(tuple(sorted(self.terms.items())))
        return hash((str(self.mid), str(self.rad)))

    # -- presentation ---------------------------------------------------

    def __repr__(self):
        return f"Scalar({self})"

    def __str__(self):
        if not self.is_exact:
            return f"[{mpmath.nstr(self.mid, 12)} +/- {mpmath.nstr(self.rad, 3)}]"
        if not self.terms:
            return "0"
        parts = []
        for key, q in sorted(self.terms.items()):
            factors = [] if q == 1 and key else [str(q)]
            for gen, ex in key:
                name = {"e": "e", "ln": f"ln{gen[1] if len(gen) > 1 else ''}", "rt": str(gen[1] if len(gen) > 1 else "")}[gen[0]]
                factors.append(name if ex == 1 else f"{name}^({ex})")
            parts.append("*".join(factors) or str(q))
        return " + ".join(parts)


ZERO = Scalar.from_rational(0)
ONE = Scalar.from_rational(1)
E = Scalar.e_power(1)


def sc(x) -> Scalar:
    """Coerce ints/Fractions/Scalars to Scalar."""
    if isinstance(x, Scalar):
        return x
    return Scalar.from_rational(_fraction(x))
