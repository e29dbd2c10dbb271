"""Increment laws with mean one, their exact raw moments, and seeded samplers."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction

import numpy as np

from .moments import MomentProfile

__all__ = [
    "FAMILIES",
    "DEFAULT_MAX_ORDER",
    "LOGNORMAL_SIGMA_CAP",
    "DIST_GRAMMAR",
    "DistSpecError",
    "ProcessSpec",
    "SeedSpec",
    "parse_dist",
    "make_rng",
    "analytic_profile",
    "draw",
    "sample_increments",
    "arrival_prefix_sums",
]

FAMILIES = ("exp", "uniform", "gamma", "lognormal")
DEFAULT_MAX_ORDER = 16
LOGNORMAL_SIGMA_CAP = 1.5
_DECIMAL_DIGITS = 60
_U64 = 2**64

DIST_GRAMMAR = "exp | uniform | gamma:s=<positive real> | lognormal:sigma=<positive real>"


class DistSpecError(ValueError):
    pass


def _positive_fraction(raw, what: str) -> Fraction:
    try:
        value = Fraction(str(raw)) if not isinstance(raw, (Fraction, int)) else Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise DistSpecError(f"{what} must be a positive real, got {raw!r}") from None
    if value <= 0:
        raise DistSpecError(f"{what} must be a positive real, got {raw!r}")
    return value


@dataclass(frozen=True)
class ProcessSpec:
    """Law of the increments plus the arrival rate.

    ``param`` is the gamma shape ``s`` or the lognormal ``sigma`` and is
    ``None`` for the parameter-free families. Rate and parameter are kept as
    fractions so exact moments stay exact.
    """

    family: str = "exp"
    param: Fraction | None = None
    rate: Fraction = Fraction(1)
    max_order: int = DEFAULT_MAX_ORDER
    allow_large: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DistSpecError(f"unknown family {self.family!r}; expected {DIST_GRAMMAR}")
        needs_param = self.family in ("gamma", "lognormal")
        if needs_param and self.param is None:
            raise DistSpecError(f"{self.family} requires a parameter; expected {DIST_GRAMMAR}")
        if not needs_param and self.param is not None:
            raise DistSpecError(f"{self.family} takes no parameter")
        if self.param is not None:
            object.__setattr__(self, "param", _positive_fraction(self.param, "family parameter"))
        object.__setattr__(self, "rate", _positive_fraction(self.rate, "rate"))
        if not isinstance(self.max_order, int) or self.max_order < 2 or self.max_order % 2:
            raise ValueError("max_order must be an even integer >= 2")
        if not self.allow_large:
            if self.max_order > DEFAULT_MAX_ORDER:
                raise ValueError(
                    f"max_order {self.max_order} exceeds cap {DEFAULT_MAX_ORDER}; "
                    "set allow_large=True to override"
                )
            if self.family == "lognormal" and self.param > LOGNORMAL_SIGMA_CAP:
                raise ValueError(
                    f"lognormal sigma {float(self.param)} exceeds cap {LOGNORMAL_SIGMA_CAP}; "
                    "set allow_large=True to override"
                )

    @property
    def label(self) -> str:
        if self.family == "gamma":
            return f"gamma:s={_fmt(self.param)}"
        if self.family == "lognormal":
            return f"lognormal:sigma={_fmt(self.param)}"
        return self.family

    @property
    def rate_float(self) -> float:
        return float(self.rate)

    def with_rate(self, rate) -> "ProcessSpec":
        return ProcessSpec(self.family, self.param, rate, self.max_order, self.allow_large)


def _fmt(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


_DIST_RE = re.compile(r"^(?P<family>[a-z]+)(?::(?P<key>[a-z]+)=(?P<value>[^=:\s]+))?$")


def parse_dist(text: str, rate=1, max_order: int = DEFAULT_MAX_ORDER, allow_large: bool = False) -> ProcessSpec:
    """Parse ``exp``, ``uniform``, ``gamma:s=2`` or ``lognormal:sigma=0.5``."""
    m = _DIST_RE.match(text.strip().lower())
    if not m:
        raise DistSpecError(f"cannot parse distribution {text!r}; grammar: {DIST_GRAMMAR}")
    family, key, value = m.group("family", "key", "value")
    aliases = {"exponential": "exp", "gam": "gamma", "lognorm": "lognormal"}
    family = aliases.get(family, family)
    expected_key = {"gamma": "s", "lognormal": "sigma"}.get(family)
    if family not in FAMILIES:
        raise DistSpecError(f"unknown family {family!r} in {text!r}; grammar: {DIST_GRAMMAR}")
    if expected_key is None and key is not None:
        raise DistSpecError(f"{family} takes no parameter; grammar: {DIST_GRAMMAR}")
    if expected_key is not None and key != expected_key:
        raise DistSpecError(
            f"{family} requires '{family}:{expected_key}=<value>'; grammar: {DIST_GRAMMAR}"
        )
    param = None if value is None else _positive_fraction(value, f"{family} {key}")
    return ProcessSpec(family, param, rate, max_order, allow_large)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def child(self, index: int) -> "SeedSpec":
        """A distinct stream id derived from this one (used for CLI sub-runs)."""
        return SeedSpec(self.master_seed, (self.stream_id * 1_000_003 + index + 1) % _U64)


def make_rng(seed: SeedSpec, *path: int) -> np.random.Generator:
    """Generator for ``(master_seed, stream_id, *path)``; independent of call order."""
    ss = np.random.SeedSequence(int(seed.master_seed), spawn_key=(int(seed.stream_id), *path))
    return np.random.Generator(np.random.PCG64(ss))


def analytic_profile(spec: ProcessSpec) -> MomentProfile:
    c = spec.max_order
    if spec.family == "exp":
        return MomentProfile(tuple(Fraction(math.factorial(p)) for p in range(c + 1)))
    if spec.family == "uniform":
        return MomentProfile(tuple(Fraction(2**p, p + 1) for p in range(c + 1)))
    if spec.family == "gamma":
        s = spec.param
        moments = [Fraction(1)]
        for p in range(1, c + 1):
            moments.append(moments[-1] * (s + p - 1) / s)
        return MomentProfile(tuple(moments))
    # lognormal with location -sigma^2/2: m_p = exp(sigma^2 p (p-1) / 2)
    with localcontext() as ctx:
        ctx.prec = _DECIMAL_DIGITS
        sigma = Decimal(spec.param.numerator) / Decimal(spec.param.denominator)
        half_var = sigma * sigma / 2
        moments = [Fraction(1), Fraction(1)]
        moments += [Fraction((half_var * p * (p - 1)).exp()) for p in range(2, c + 1)]
    return MomentProfile(tuple(moments), kind="decimal")


def draw(spec: ProcessSpec, rng: np.random.Generator, size) -> np.ndarray:
    """Raw mean-one increments (rate not applied)."""
    if spec.family == "exp":
        return rng.standard_exponential(size)
    if spec.family == "uniform":
        # 1 - U lies in (0, 1], keeping draws strictly positive
        return 2.0 * (1.0 - rng.random(size))
    if spec.family == "gamma":
        s = float(spec.param)
        return rng.standard_gamma(s, size) / s
    sigma = float(spec.param)
    return rng.lognormal(-0.5 * sigma * sigma, sigma, size)


def sample_increments(spec: ProcessSpec, count: int, seed: SeedSpec) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return draw(spec, make_rng(seed), count)


def arrival_prefix_sums(spec: ProcessSpec, k_max: int, seed: SeedSpec) -> np.ndarray:
    """Arrival positions ``X_1..X_{k_max}`` of one path."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    return np.cumsum(sample_increments(spec, k_max, seed)) / spec.rate_float
