"""Monte Carlo estimates of ``E|X_{k+r} - Y_k|^b`` for real ``b > 0``.

Replications are split into fixed-size chunks; chunk ``i`` draws from the
stream ``(master_seed, stream_id, i)``. The chunk size is part of the stream
layout, never derived from the worker count, and chunk results are
concatenated in index order, so estimates are bit-identical for any number of
workers.

Paths are simulated at unit rate and the rate enters as a final factor
``rate**-b``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .distributions import ProcessSpec, SeedSpec, analytic_profile, draw, make_rng

__all__ = [
    "CHUNK_SIZE",
    "MIN_REPLICATIONS",
    "MAX_SHIFT_RATIO",
    "GridError",
    "MomentQuery",
    "MomentEstimate",
    "SlopeFit",
    "ShiftGapResult",
    "simulate_paths",
    "summarize",
    "estimate_moment",
    "estimate_moment_grid",
    "shift_gap_check",
    "fit_loglog",
    "check_grid",
    "fit_scaling_exponent",
    "convexity_split_check",
    "jensen_gap",
    "bootstrap_std_error",
]

CHUNK_SIZE = 4096
MIN_REPLICATIONS = 100
MAX_SHIFT_RATIO = 0.25  # r <= sqrt(k) / 4 stands in for r = o(sqrt(k))


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class MomentQuery:
    b: float
    k: int
    r: int = 0
    spec: ProcessSpec = ProcessSpec()
    replications: int = 100_000

    def __post_init__(self):
        if not self.b > 0 or not math.isfinite(self.b):
            raise ValueError(f"b must be a positive real, got {self.b!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if int(self.r) != self.r or self.r < 0:
            raise ValueError(f"r must be a non-negative integer, got {self.r!r}")
        if self.replications < MIN_REPLICATIONS:
            raise ValueError(f"replications must be >= {MIN_REPLICATIONS}, got {self.replications}")


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    std_error: float
    replications: int
    b: float
    k: int
    r: int = 0

    def scaled(self, factor: float) -> "MomentEstimate":
        return MomentEstimate(
            self.mean * factor, self.std_error * factor, self.replications, self.b, self.k, self.r
        )


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    grid: tuple[tuple[int, MomentEstimate], ...]


@dataclass(frozen=True)
class ShiftGapResult:
    estimate: MomentEstimate
    bound: float

    def holds(self, n_sigma: float = 3.0) -> bool:
        return self.estimate.mean <= self.bound + n_sigma * self.estimate.std_error


Reducer = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _chunk_sizes(replications: int) -> list[int]:
    full, rest = divmod(replications, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def simulate_paths(
    spec: ProcessSpec,
    replications: int,
    seed: SeedSpec,
    n_xi: int,
    n_tau: int,
    reducer: Reducer,
    workers: int = 1,
) -> np.ndarray:
    """Run ``reducer`` on unit-rate prefix sums of fresh path pairs.

    ``reducer(sx, st)`` receives arrays of shape ``(chunk, n_xi)`` and
    ``(chunk, n_tau)`` and returns per-replication values of shape
    ``(chunk, m)``. The result stacks all chunks in order.
    """

    def run(item):
        index, size = item
        rng = make_rng(seed, index)
        sx = np.cumsum(draw(spec, rng, (size, n_xi)), axis=1)
        st = np.cumsum(draw(spec, rng, (size, n_tau)), axis=1) if n_tau else np.empty((size, 0))
        return np.asarray(reducer(sx, st), dtype=float).reshape(size, -1)

    items = list(enumerate(_chunk_sizes(replications)))
    if workers <= 1:
        parts = [run(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, items))
    return np.concatenate(parts, axis=0)


def summarize(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and plug-in standard errors."""
    n = values.shape[0]
    return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(n)


def estimate_moment(query: MomentQuery, seed: SeedSpec, workers: int = 1) -> MomentEstimate:
    k, r, b = int(query.k), int(query.r), float(query.b)

    def reducer(sx, st):
        return np.abs(sx[:, k + r - 1] - st[:, k - 1]) ** b

    values = simulate_paths(query.spec, query.replications, seed, k + r, k, reducer, workers)
    mean, se = summarize(values)
    est = MomentEstimate(float(mean[0]), float(se[0]), query.replications, b, k, r)
    return est.scaled(query.spec.rate_float ** (-b))


def estimate_moment_grid(
    spec: ProcessSpec,
    b_values: Sequence[float],
    k_grid: Sequence[int],
    replications: int,
    seed: SeedSpec,
    r_rule: Callable[[int], int] | None = None,
    workers: int = 1,
) -> dict[tuple[float, int], MomentEstimate]:
    """Estimates for every ``(b, k)`` pair from one shared set of paths."""
    MomentQuery(min(b_values), min(k_grid), 0, spec, replications)
    ks = [int(k) for k in k_grid]
    rs = [int(r_rule(k)) if r_rule else 0 for k in ks]
    bs = [float(b) for b in b_values]
    n_xi = max(k + r for k, r in zip(ks, rs))
    n_tau = max(ks)
    xi_idx = np.array([k + r - 1 for k, r in zip(ks, rs)])
    tau_idx = np.array([k - 1 for k in ks])

    def reducer(sx, st):
        dist = np.abs(sx[:, xi_idx] - st[:, tau_idx])
        return np.concatenate([dist**b for b in bs], axis=1)

    values = simulate_paths(spec, replications, seed, n_xi, n_tau, reducer, workers)
    mean, se = summarize(values)
    out = {}
    for i, b in enumerate(bs):
        factor = spec.rate_float ** (-b)
        for j, (k, r) in enumerate(zip(ks, rs)):
            col = i * len(ks) + j
            out[(b, k)] = MomentEstimate(float(mean[col]), float(se[col]), replications, b, k, r).scaled(factor)
    return out


def shift_gap_check(
    a: int,
    k: int,
    r: int,
    spec: ProcessSpec,
    seed: SeedSpec,
    replications: int = 100_000,
    workers: int = 1,
) -> ShiftGapResult:
    """Estimate ``E|X_{k+r} - X_k|^a`` next to the bound ``C_a^a r^a / rate^a``.

    ``C_a`` is the largest raw moment of order at most ``a``.
    """
    if a < 1 or a > spec.max_order:
        raise ValueError(f"a must lie in 1..{spec.max_order}")
    if r < 1:
        raise ValueError("r must be a positive integer")
    MomentQuery(a, k, r, spec, replications)
    profile = analytic_profile(spec)
    c_a = max(profile.moments[: a + 1])
    bound = float(c_a**a * r**a / spec.rate**a)

    def reducer(sx, st):
        gap = sx[:, k + r - 1] - sx[:, k - 1]
        return np.abs(gap) ** a

    values = simulate_paths(spec, replications, seed, k + r, 0, reducer, workers)
    mean, se = summarize(values)
    est = MomentEstimate(float(mean[0]), float(se[0]), replications, float(a), k, r)
    return ShiftGapResult(est.scaled(spec.rate_float ** (-a)), bound)


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``log y = intercept + slope * log x``; returns slope, intercept, R^2."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    res = stats.linregress(lx, ly)
    return float(res.slope), float(res.intercept), float(res.rvalue**2)


def check_grid(grid: Sequence[int], name: str = "k_grid") -> list[int]:
    g = [int(x) for x in grid]
    if len(g) < 4:
        raise GridError(f"{name} needs at least 4 points to fit a slope, got {len(g)}")
    if any(x < 1 for x in g) or any(y <= x for x, y in zip(g, g[1:])):
        raise GridError(f"{name} must be strictly increasing positive integers")
    if g[-1] < 10 * g[0]:
        raise GridError(f"{name} must span at least one decade, got {g[0]}..{g[-1]}")
    return g


def _shift_rule(r_rule) -> Callable[[int], int]:
    if r_rule is None:
        return lambda k: 0
    if isinstance(r_rule, int):
        const = r_rule
        return lambda k: const
    return r_rule


def fit_scaling_exponent(
    b: float,
    k_grid: Sequence[int],
    spec: ProcessSpec,
    replications: int,
    seed: SeedSpec,
    r_rule: Callable[[int], int] | int | None = None,
    workers: int = 1,
    max_shift_ratio: float = MAX_SHIFT_RATIO,
) -> SlopeFit:
    ks = check_grid(k_grid)
    rule = _shift_rule(r_rule)
    for k in ks:
        r = rule(k)
        if r < 0 or r > max_shift_ratio * math.sqrt(k):
            raise GridError(
                f"shift r={r} at k={k} violates r <= {max_shift_ratio} * sqrt(k)"
            )
    ests = estimate_moment_grid(spec, [b], ks, replications, seed, rule, workers)
    grid = tuple((k, ests[(float(b), k)]) for k in ks)
    slope, intercept, r2 = fit_loglog(ks, [e.mean for _, e in grid])
    return SlopeFit(slope, intercept, r2, grid)


def convexity_split_check(a: float, x: float, y: float) -> bool:
    """``|x + y|^a <= 2^(a-1) (|x|^a + |y|^a)`` for ``a >= 1``."""
    if a < 1:
        raise ValueError("a must be >= 1")
    lhs = abs(x + y) ** a
    rhs = 2 ** (a - 1) * (abs(x) ** a + abs(y) ** a)
    return lhs <= rhs * (1 + 1e-12)


def jensen_gap(low: MomentEstimate, high: MomentEstimate) -> tuple[float, float]:
    """``E|D|^high.b - (E|D|^low.b)^(high.b/low.b)`` and its delta-method error.

    Jensen makes the gap non-negative when ``high.b >= low.b``.
    """
    p = high.b / low.b
    lhs = low.mean**p
    d_lhs = p * low.mean ** (p - 1) * low.std_error
    return high.mean - lhs, math.hypot(d_lhs, high.std_error)


def bootstrap_std_error(values: np.ndarray, resamples: int, seed: SeedSpec) -> float:
    """Diagnostic bootstrap standard error of the mean."""
    values = np.asarray(values, float)
    rng = make_rng(seed, 2**32 - 1)
    means = np.empty(resamples)
    for i in range(resamples):
        means[i] = values[rng.integers(0, values.size, values.size)].mean()
    return float(means.std(ddof=1))
