"""Exact even moments of the difference of two i.i.d. renewal processes.

For ``X_k = (1/lam) * sum(xi_1..xi_k)`` and an independent copy ``Y_k``, the
moment ``E[(X_k - Y_k)^a]`` with ``a`` even expands multinomially over the
per-increment differences ``xi_i - tau_i``. Odd central-difference moments
vanish, so only even compositions of ``a`` survive. Grouping those
compositions by their multiset of parts reduces the sum to one term per
integer partition of ``a/2``.

Everything here is carried in :class:`fractions.Fraction`; the rate is applied
once, at the end, through :meth:`ExactMomentResult.at_rate`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

__all__ = [
    "DEFAULT_MAX_A",
    "ILL_CONDITIONED_VARIANCE",
    "OrderInsufficientError",
    "MomentProfile",
    "PartitionTerm",
    "ExactMomentResult",
    "central_diff_moment",
    "integer_partitions",
    "enumerate_partition_terms",
    "exact_pair_moment",
    "remainder_ratio_scan",
]

DEFAULT_MAX_A = 16
ILL_CONDITIONED_VARIANCE = Fraction(1, 10**9)


class OrderInsufficientError(ValueError):
    """The profile does not carry enough raw moments for the request."""

    def __init__(self, required: int, available: int):
        self.required = required
        self.available = available
        super().__init__(
            f"moment order {required} required but profile only carries "
            f"moments up to order {available}"
        )


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value)
    # int, Decimal, str all convert exactly
    return Fraction(value)


@dataclass(frozen=True)
class MomentProfile:
    """Raw moments ``m_0..m_c`` of one mean-one positive increment.

    ``kind`` is ``"rational"`` when every moment is exact for the family and
    ``"decimal"`` when the moments are high-precision decimal approximations
    (converted exactly to fractions).
    """

    moments: tuple[Fraction, ...]
    kind: str = "rational"

    def __post_init__(self):
        moments = tuple(_as_fraction(m) for m in self.moments)
        object.__setattr__(self, "moments", moments)
        if len(moments) < 3 or (len(moments) - 1) % 2:
            raise ValueError(
                "profile must carry m_0..m_c for a positive even order c, "
                f"got {len(moments)} values"
            )
        if moments[0] != 1 or moments[1] != 1:
            raise ValueError("increments must satisfy m_0 = 1 and m_1 = 1 exactly")
        for p, m in enumerate(moments[2:], start=2):
            if not m > 1:
                raise ValueError(f"m_{p} = {m} violates m_p > 1 for a non-degenerate law")
        if self.kind not in ("rational", "decimal"):
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def order(self) -> int:
        return len(self.moments) - 1

    @property
    def variance(self) -> Fraction:
        return self.moments[2] - 1

    @property
    def ill_conditioned(self) -> bool:
        return self.variance < ILL_CONDITIONED_VARIANCE

    def moment(self, p: int) -> Fraction:
        if p > self.order:
            raise OrderInsufficientError(p, self.order)
        return self.moments[p]


@dataclass(frozen=True)
class PartitionTerm:
    """All even compositions of ``a`` over ``k`` slots sharing one part multiset.

    ``parts`` holds ``d_1 >= d_2 >= ...`` with ``sum(parts) == a // 2``; each
    part stands for an exponent ``2 * d_j`` on one increment difference.
    """

    parts: tuple[int, ...]
    multiplicity_count: int
    coefficient: Fraction

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(2 * d for d in self.parts)


@dataclass(frozen=True)
class ExactMomentResult:
    value: Fraction
    leading_term: Fraction
    a: int
    k: int
    rate: Fraction = Fraction(1)

    @property
    def remainder(self) -> Fraction:
        return self.value - self.leading_term

    def at_rate(self, rate) -> "ExactMomentResult":
        """Present the result for processes with arrival rate ``rate``."""
        rate = _as_fraction(rate)
        if rate <= 0:
            raise ValueError("rate must be positive")
        scale = (self.rate / rate) ** self.a
        return ExactMomentResult(
            value=self.value * scale,
            leading_term=self.leading_term * scale,
            a=self.a,
            k=self.k,
            rate=rate,
        )


def central_diff_moment(d: int, profile: MomentProfile) -> Fraction:
    """``E[(xi - tau)^d]`` for two independent copies of the increment."""
    if d < 0:
        raise ValueError("d must be non-negative")
    if d > profile.order:
        raise OrderInsufficientError(d, profile.order)
    if d % 2:
        return Fraction(0)
    m = profile.moments
    return sum(
        (math.comb(d, j) * (-1) ** (d - j) * m[j] * m[d - j] for j in range(d + 1)),
        Fraction(0),
    )


def integer_partitions(n: int, max_parts: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of ``n`` as non-increasing tuples, largest first part first."""
    if max_parts is None:
        max_parts = n

    def _gen(remaining: int, largest: int, slots: int):
        if remaining == 0:
            yield ()
            return
        if slots == 0:
            return
        for first in range(min(remaining, largest), 0, -1):
            for rest in _gen(remaining - first, first, slots - 1):
                yield (first,) + rest

    yield from _gen(n, n, max_parts)


def _check_even(a: int, max_a: int | None) -> None:
    if not isinstance(a, int) or a < 2 or a % 2:
        raise ValueError(f"a must be an even integer >= 2, got {a!r}")
    if max_a is not None and a > max_a:
        raise ValueError(
            f"a = {a} exceeds the default cap {max_a}; pass max_a=None to allow it"
        )


def enumerate_partition_terms(
    a: int, k: int, max_a: int | None = DEFAULT_MAX_A
) -> list[PartitionTerm]:
    _check_even(a, max_a)
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    half = a // 2
    a_fact = math.factorial(a)
    terms = []
    for parts in integer_partitions(half, max_parts=min(k, half)):
        m = len(parts)
        placements = math.perm(k, m)
        for rep in Counter(parts).values():
            placements //= math.factorial(rep)
        denom = math.prod(math.factorial(2 * d) for d in parts)
        terms.append(PartitionTerm(parts, placements, Fraction(a_fact, denom)))
    return terms


def exact_pair_moment(
    a: int, k: int, profile: MomentProfile, max_a: int | None = DEFAULT_MAX_A
) -> ExactMomentResult:
    """Exact ``E[(X_k - Y_k)^a]`` at unit rate.

    Holds for every ``k >= 1``; only the leading/remainder split is
    asymptotic.

    >>> from fractions import Fraction
    >>> expo = MomentProfile(tuple(math.factorial(p) for p in range(5)))
    >>> exact_pair_moment(4, 2, expo).value
    Fraction(72, 1)
    """
    _check_even(a, max_a)
    if a > profile.order:
        raise OrderInsufficientError(a, profile.order)
    diff_moments = {d: central_diff_moment(2 * d, profile) for d in range(1, a // 2 + 1)}
    value = Fraction(0)
    for term in enumerate_partition_terms(a, k, max_a=max_a):
        prod = math.prod((diff_moments[d] for d in term.parts), start=Fraction(1))
        value += term.coefficient * term.multiplicity_count * prod
    half = a // 2
    leading = Fraction(math.factorial(a), math.factorial(half)) * profile.variance**half * k**half
    return ExactMomentResult(value=value, leading_term=leading, a=a, k=k)


def remainder_ratio_scan(
    a: int, k_grid: Sequence[int], profile: MomentProfile
) -> list[tuple[int, Fraction]]:
    """``|remainder| / k^(a/2 - 1)`` along an increasing grid with ``k > a/2``."""
    ks = list(k_grid)
    if not ks:
        raise ValueError("k_grid is empty")
    if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
        raise ValueError("k_grid must be strictly increasing")
    if ks[0] <= a // 2:
        raise ValueError(f"every k must exceed a/2 = {a // 2}")
    out = []
    for k in ks:
        res = exact_pair_moment(a, k, profile)
        out.append((k, abs(res.remainder) / Fraction(k) ** (a // 2 - 1)))
    return out
