"""Bicolored matchings of sensors on a line.

Black sensors sit at ``X_1 < ... < X_n`` and white sensors at
``Y_1 < ... < Y_n``; a perfect matching is a permutation ``perm`` pairing
``X_k`` with ``Y_perm[k]`` (0-based). Its cost to the power ``b`` is the sum
of ``|X_k - Y_perm[k]|^b``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .distributions import ProcessSpec, SeedSpec
from .montecarlo import (
    MomentEstimate,
    MomentQuery,
    SlopeFit,
    check_grid,
    fit_loglog,
    simulate_paths,
    summarize,
)

__all__ = [
    "MAX_ASSIGNMENT_SIZE",
    "MAX_ENUMERATION_SIZE",
    "MatchingInstance",
    "CostReport",
    "PermutationRow",
    "matching_cost",
    "optimal_assignment",
    "estimate_T_b",
    "estimate_T_b_grid",
    "fit_T_b_scaling",
    "lemma1_expectation_check",
]

MAX_ASSIGNMENT_SIZE = 10_000
MAX_ENUMERATION_SIZE = 6
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class MatchingInstance:
    black: np.ndarray
    white: np.ndarray
    permutation: tuple[int, ...] | None = None

    def __post_init__(self):
        black = np.asarray(self.black, dtype=float)
        white = np.asarray(self.white, dtype=float)
        if black.ndim != 1 or white.ndim != 1 or black.size != white.size or black.size == 0:
            raise ValueError("black and white must be non-empty 1-d sequences of equal length")
        for name, arr in (("black", black), ("white", white)):
            if np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} positions must be strictly increasing")
        n = black.size
        perm = tuple(range(n)) if self.permutation is None else tuple(int(p) for p in self.permutation)
        if sorted(perm) != list(range(n)):
            raise ValueError("permutation must match every white sensor exactly once")
        object.__setattr__(self, "black", black)
        object.__setattr__(self, "white", white)
        object.__setattr__(self, "permutation", perm)

    @property
    def n(self) -> int:
        return self.black.size


@dataclass(frozen=True)
class CostReport:
    b: float
    pathwise_cost: float
    n: int


@dataclass(frozen=True)
class PermutationRow:
    permutation: tuple[int, ...]
    mean: float
    std_error: float
    gap: float  # mean cost minus the identity's mean cost, paired
    gap_std_error: float


def matching_cost(instance: MatchingInstance, b: float) -> CostReport:
    if not b > 0:
        raise ValueError("b must be positive")
    perm = np.asarray(instance.permutation)
    cost = float(np.sum(np.abs(instance.black - instance.white[perm]) ** b))
    return CostReport(float(b), cost, instance.n)


def _solve(cost: np.ndarray) -> tuple[np.ndarray, float]:
    rows, cols = linear_sum_assignment(cost)
    return cols, float(cost[rows, cols].sum())


def optimal_assignment(
    black: Sequence[float], white: Sequence[float], b: float
) -> tuple[tuple[int, ...], float]:
    """Minimum-cost perfect matching under ``|x - y|^b``.

    Among optimal matchings the lexicographically smallest permutation is
    returned. Inputs need not be sorted.
    """
    x = np.asarray(black, dtype=float)
    y = np.asarray(white, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.size} black vs {y.size} white sensors")
    n = x.size
    if not 1 <= n <= MAX_ASSIGNMENT_SIZE:
        raise ValueError(f"n must lie in 1..{MAX_ASSIGNMENT_SIZE}, got {n}")
    if not b > 0:
        raise ValueError("b must be positive")
    cost = np.abs(x[:, None] - y[None, :]) ** b
    cols, _ = _solve(cost)
    perm = [int(c) for c in cols]

    # Walk rows in order; a column smaller than the current choice is taken
    # whenever the rest can still be completed at optimal cost.
    available = list(range(n))
    for i in range(n):
        current = perm[i]
        rest_cost = float(cost[np.arange(i, n), perm[i:]].sum())
        for j in available:
            if j == current:
                break
            others = [c for c in available if c != j]
            if others:
                sub_cols, sub_cost = _solve(cost[i + 1 :][:, others])
            else:
                sub_cols, sub_cost = np.empty(0, dtype=int), 0.0
            candidate = cost[i, j] + sub_cost
            if math.isclose(candidate, rest_cost, rel_tol=_TIE_RTOL, abs_tol=0.0) or candidate < rest_cost:
                perm[i] = j
                perm[i + 1 :] = [others[c] for c in sub_cols]
                break
        available.remove(perm[i])
    total = float(cost[np.arange(n), perm].sum())
    return tuple(perm), total


def estimate_T_b_grid(
    b: float,
    n_grid: Sequence[int],
    spec: ProcessSpec,
    replications: int,
    seed: SeedSpec,
    workers: int = 1,
) -> dict[int, MomentEstimate]:
    """``E[sum_{k<=n} |X_k - Y_k|^b]`` for every ``n`` from one set of paths."""
    ns = [int(n) for n in n_grid]
    MomentQuery(b, min(ns), 0, spec, replications)
    idx = np.array(ns) - 1
    n_max = max(ns)

    def reducer(sx, st):
        return np.cumsum(np.abs(sx - st) ** b, axis=1)[:, idx]

    values = simulate_paths(spec, replications, seed, n_max, n_max, reducer, workers)
    mean, se = summarize(values)
    factor = spec.rate_float ** (-b)
    return {
        n: MomentEstimate(float(mean[j]), float(se[j]), replications, float(b), n).scaled(factor)
        for j, n in enumerate(ns)
    }


def estimate_T_b(
    n: int,
    b: float,
    spec: ProcessSpec,
    replications: int,
    seed: SeedSpec,
    workers: int = 1,
) -> MomentEstimate:
    """Expected cost of the identity matching; ``k`` on the result holds ``n``."""
    return estimate_T_b_grid(b, [n], spec, replications, seed, workers)[int(n)]


def fit_T_b_scaling(
    b: float,
    n_grid: Sequence[int],
    spec: ProcessSpec,
    replications: int,
    seed: SeedSpec,
    workers: int = 1,
) -> SlopeFit:
    ns = check_grid(n_grid, "n_grid")
    ests = estimate_T_b_grid(b, ns, spec, replications, seed, workers)
    slope, intercept, r2 = fit_loglog(ns, [ests[n].mean for n in ns])
    return SlopeFit(slope, intercept, r2, tuple((n, ests[n]) for n in ns))


def lemma1_expectation_check(
    n: int,
    b: float,
    spec: ProcessSpec,
    replications: int,
    seed: SeedSpec,
    workers: int = 1,
) -> list[PermutationRow]:
    """Mean cost of every fixed permutation under common random numbers.

    Rows come in lexicographic permutation order, identity first.
    """
    if not 1 <= n <= MAX_ENUMERATION_SIZE:
        raise ValueError(f"n must lie in 1..{MAX_ENUMERATION_SIZE} for exhaustive enumeration, got {n}")
    MomentQuery(b, n, 0, spec, replications)
    perms = np.array(list(itertools.permutations(range(n))), dtype=int)
    rows_idx = np.arange(n)

    def reducer(sx, st):
        d = np.abs(sx[:, :, None] - st[:, None, :]) ** b
        costs = d[:, rows_idx, perms].sum(axis=-1)
        return np.concatenate([costs, costs - costs[:, :1]], axis=1)

    values = simulate_paths(spec, replications, seed, n, n, reducer, workers)
    mean, se = summarize(values)
    factor = spec.rate_float ** (-b)
    m = len(perms)
    return [
        PermutationRow(
            tuple(int(p) for p in perms[i]),
            float(mean[i]) * factor,
            float(se[i]) * factor,
            float(mean[m + i]) * factor,
            float(se[m + i]) * factor,
        )
        for i in range(m)
    ]
