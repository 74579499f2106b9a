"""Truncation policy shared by the symbolic stages."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction


@dataclass(frozen=True)
class TruncationPolicy:
    """Per-depth lambda cutoffs, term cap and ball precision.

    Defaults are desk-scale: cutoff 8 at depth 0, halving per depth.
    """

    max_depth: int = 4
    lambda_cutoffs: tuple = ()
    max_terms: int = 10_000
    precision_bits: int = 512

    def __post_init__(self):
        if self.max_depth < 0 or self.max_terms <= 0 or self.precision_bits <= 0:
            raise ValueError("policy fields must be positive")
        if not self.lambda_cutoffs:
            cuts = tuple(Fraction(8, 2 ** d) for d in range(self.max_depth + 1))
            object.__setattr__(self, "lambda_cutoffs", cuts)

    def cutoff(self, depth: int) -> Fraction:
        if depth < len(self.lambda_cutoffs):
            return Fraction(self.lambda_cutoffs[depth])
        return Fraction(self.lambda_cutoffs[-1])

    def with_cutoff0(self, cut: Fraction) -> "TruncationPolicy":
        cuts = tuple(max(Fraction(cut) / 2 ** d, Fraction(1)) for d in range(self.max_depth + 1))
        return TruncationPolicy(self.max_depth, cuts, self.max_terms, self.precision_bits)


DEFAULT_POLICY = TruncationPolicy()


class TermOverflow(RuntimeError):
    """Term count exceeded policy.max_terms."""


class DepthOverflow(RuntimeError):
    """Depth index exceeded policy.max_depth."""
