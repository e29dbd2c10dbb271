"""Self-verification battery behind ``renewal-moments verify``.

Each check returns a plain dict with its band and outcome. Failures are data;
only the caller turns them into an exit status. Monte Carlo checks are marked
``skipped`` when the replication count is too small for their bands to mean
anything.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable

import numpy as np

from .distributions import SeedSpec, analytic_profile, arrival_prefix_sums, parse_dist
from .matching import (
    estimate_T_b_grid,
    fit_T_b_scaling,
    lemma1_expectation_check,
    optimal_assignment,
)
from .moments import MomentProfile, exact_pair_moment, remainder_ratio_scan
from .montecarlo import estimate_moment_grid, fit_scaling_exponent, jensen_gap, shift_gap_check

__all__ = [
    "DEFAULT_REPLICATIONS",
    "MIN_POWERED_REPLICATIONS",
    "LEMMA1_MIN_REPLICATIONS",
    "N_SIGMA",
    "brute_force_moment",
    "run_checks",
]

DEFAULT_REPLICATIONS = 100_000
MIN_POWERED_REPLICATIONS = 10_000
# unpaired margins grow like sqrt(replications); ~8 se at 1e5, under 4 se near 2e4
LEMMA1_MIN_REPLICATIONS = 50_000
N_SIGMA = 4.0

SLOPE_GRID = (10, 30, 100, 300, 1000)
MATCHING_GRID = (10, 30, 100, 300)


def _raw_diff_moment(profile: MomentProfile, l: int) -> Fraction:
    # no parity shortcut: odd terms must cancel on their own
    m = profile.moments
    return sum((math.comb(l, j) * m[j] * (-1) ** (l - j) * m[l - j] for j in range(l + 1)), Fraction(0))


def brute_force_moment(a: int, k: int, profile: MomentProfile, even_only: bool = True) -> Fraction:
    """Sum the multinomial expansion over every composition of ``a`` into ``k`` slots."""
    step = 2 if even_only else 1
    total = Fraction(0)
    for head in itertools.product(range(0, a + 1, step), repeat=k - 1):
        last = a - sum(head)
        if last < 0 or last % step:
            continue
        ls = head + (last,)
        coef = math.factorial(a)
        for l in ls:
            coef //= math.factorial(l)
        term = Fraction(coef)
        for l in ls:
            term *= _raw_diff_moment(profile, l)
        total += term
    return total


def _check_exact_bruteforce(ctx):
    mismatches = []
    cases = 0
    for fam in ("exp", "uniform"):
        prof = analytic_profile(parse_dist(fam))
        for a in (2, 4, 6):
            for k in range(3, 9):
                value = exact_pair_moment(a, k, prof).value
                refs = [brute_force_moment(a, k, prof, True)]
                if k <= 4:
                    refs.append(brute_force_moment(a, k, prof, False))
                cases += 1
                if any(r != value for r in refs):
                    mismatches.append({"family": fam, "a": a, "k": k})
    return "exact rational equality", not mismatches, {"cases": cases, "mismatches": mismatches}


def _check_closed_form(ctx):
    prof = analytic_profile(parse_dist("exp"))
    bad = []
    for k in range(2, 1001):
        res = exact_pair_moment(4, k, prof)
        if res.value != 12 * k * k + 12 * k or res.remainder / k != 12:
            bad.append(k)
    return "value == 12k^2+12k and remainder/k == 12, k=2..1000", not bad, {"failing_k": bad[:10]}


def _check_remainder_bounded(ctx):
    details = {}
    ok = True
    for fam in ("uniform", "gamma:s=2", "lognormal:sigma=0.5"):
        ratios = [float(r) for _, r in remainder_ratio_scan(6, [10, 50, 250, 1250], analytic_profile(parse_dist(fam)))]
        diffs = np.diff(ratios)
        monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
        # geometric grid: successive changes must shrink
        settling = bool(np.all(np.abs(diffs[1:]) < np.abs(diffs[:-1])))
        ok &= monotone and settling and ratios[-1] < 2 * ratios[0] + 1
        details[fam] = ratios
    return ("a=6 ratios monotone and settling", ok, details)


def _check_mc_vs_exact(ctx):
    rows = []
    ok = True
    for i, fam in enumerate(("exp", "uniform", "gamma:s=2")):
        spec = parse_dist(fam, rate=ctx["rate"])
        prof = analytic_profile(spec)
        ests = estimate_moment_grid(spec, [2, 4], [5, 20, 100], ctx["replications"], ctx["seed"].child(100 + i),
                                    workers=ctx["workers"])
        for (b, k), est in ests.items():
            exact = float(exact_pair_moment(int(b), k, prof).at_rate(spec.rate).value)
            z = (est.mean - exact) / est.std_error
            ok &= abs(z) <= N_SIGMA
            rows.append({"family": fam, "a": int(b), "k": k, "mean": est.mean, "std_error": est.std_error,
                         "exact": exact, "z": z})
    return (f"|z| <= {N_SIGMA}", ok, {"rows": rows})


def _check_shift_gap(ctx):
    spec = parse_dist("exp", rate=ctx["rate"])
    rows = []
    ok = True
    for i, (a, r) in enumerate(itertools.product((2, 4), (1, 2, 5))):
        res = shift_gap_check(a, 10, r, spec, ctx["seed"].child(200 + i), ctx["replications"], ctx["workers"])
        holds = res.holds(N_SIGMA)
        ok &= holds
        rows.append({"a": a, "r": r, "mean": res.estimate.mean, "std_error": res.estimate.std_error,
                     "bound": res.bound, "holds": holds})
    return (f"mean <= C_a^a r^a / rate^a + {N_SIGMA} se", ok, {"rows": rows})


def _check_jensen(ctx):
    spec = parse_dist("exp", rate=ctx["rate"])
    bs = [1.0, 1.5, 2.0, 3.0, 4.0]
    ests = estimate_moment_grid(spec, bs, [100], ctx["replications"], ctx["seed"].child(300), workers=ctx["workers"])
    rows = []
    ok = True
    pairs = [(1.0, 2.0), (1.5, 2.0), (3.0, 4.0), (2.0, 3.0), (2.0, 4.0)]
    for low, high in pairs:
        gap, se = jensen_gap(ests[(low, 100)], ests[(high, 100)])
        holds = gap >= -N_SIGMA * se
        ok &= holds
        rows.append({"low_b": low, "high_b": high, "gap": gap, "std_error": se, "holds": holds})
    return (f"E|D|^hi - (E|D|^lo)^(hi/lo) >= -{N_SIGMA} se", ok, {"rows": rows})


def _check_moment_slopes(ctx):
    spec = parse_dist("exp", rate=ctx["rate"])
    targets = {2.0: (1.0, 0.05, "eq"), 4.0: (2.0, 0.08, "eq"), 1.0: (0.5, 0.05, "le")}
    rows = []
    ok = True
    for i, (b, (target, tol, kind)) in enumerate(targets.items()):
        fit = fit_scaling_exponent(b, SLOPE_GRID, spec, ctx["replications"], ctx["seed"].child(400 + i),
                                   workers=ctx["workers"])
        passed = abs(fit.slope - target) <= tol if kind == "eq" else fit.slope <= target + tol
        ok &= passed
        rows.append({"b": b, "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared,
                     "band": f"{target} +/- {tol}" if kind == "eq" else f"<= {target + tol}",
                     "passed": passed})
    return ("b=2: 1+/-0.05, b=4: 2+/-0.08, b=1: <=0.55", ok, {"rows": rows})


def _check_lemma1(ctx):
    spec = parse_dist("exp", rate=ctx["rate"])
    rows = []
    ok = True
    for i, (n, b) in enumerate(itertools.product((2, 3, 4), (1.0, 2.0, 3.0))):
        table = lemma1_expectation_check(n, b, spec, ctx["replications"], ctx["seed"].child(500 + i), ctx["workers"])
        ident = table[0]
        runner_up = min(table[1:], key=lambda row: row.mean)
        margin = runner_up.mean - ident.mean
        se = math.hypot(ident.std_error, runner_up.std_error)
        passed = margin > N_SIGMA * se
        ok &= passed
        rows.append({"n": n, "b": b, "identity_mean": ident.mean, "runner_up": list(runner_up.permutation),
                     "runner_up_mean": runner_up.mean, "margin": margin, "margin_std_error": se,
                     "paired_std_error": runner_up.gap_std_error, "passed": passed})
    return (
        f"identity minimal, margin > {N_SIGMA} propagated se", ok,
        {"rows": rows},
    )


def _check_lemma1_pathwise(ctx):
    spec = parse_dist("exp", rate=ctx["rate"])
    worst = 0.0
    for i in range(1000):
        x = arrival_prefix_sums(spec, 50, SeedSpec(ctx["seed"].master_seed, 2 * i + 1))
        y = arrival_prefix_sums(spec, 50, SeedSpec(ctx["seed"].master_seed, 2 * i + 2))
        _, opt = optimal_assignment(x, y, 2.0)
        ident = float(np.sum((x - y) ** 2))
        worst = max(worst, abs(opt - ident) / ident)
    return (
        "solver cost == identity cost, rel <= 1e-12",
        worst <= 1e-12, {"instances": 1000, "n": 50, "max_relative_gap": worst},
    )


def _check_matching_slopes(ctx):
    spec = parse_dist("exp", rate=ctx["rate"])
    rows = []
    ok = True
    for i, (b, target, tol) in enumerate(((2.0, 2.0, 0.05), (4.0, 3.0, 0.10))):
        fit = fit_T_b_scaling(b, MATCHING_GRID, spec, ctx["replications"], ctx["seed"].child(600 + i), ctx["workers"])
        passed = abs(fit.slope - target) <= tol
        ok &= passed
        rows.append({"b": b, "slope": fit.slope, "target": target, "tolerance": tol, "passed": passed})
    prof = analytic_profile(spec)
    exact = float(sum(exact_pair_moment(2, k, prof).at_rate(spec.rate).value for k in range(1, 11)))
    est = estimate_T_b_grid(2.0, [10], spec, ctx["replications"], ctx["seed"].child(610), ctx["workers"])[10]
    z = (est.mean - exact) / est.std_error
    ok &= abs(z) <= N_SIGMA
    return (
        f"b=2: 2+/-0.05, b=4: 3+/-0.10; T_2(10) within {N_SIGMA} se", ok,
        {"rows": rows, "t2_n10": {"mean": est.mean, "std_error": est.std_error, "exact": exact, "z": z}},
    )


def _check_rate_scaling(ctx):
    base = parse_dist("gamma:s=2", rate=1)
    fast = base.with_rate(5)
    worst = 0.0
    for b in (1.0, 2.5, 4.0):
        e1 = estimate_moment_grid(base, [b], [20], 1000, ctx["seed"].child(700))[(b, 20)]
        e5 = estimate_moment_grid(fast, [b], [20], 1000, ctx["seed"].child(700))[(b, 20)]
        worst = max(worst, abs(e5.mean / e1.mean / 5 ** (-b) - 1))
    return (
        "estimate(rate=5) == 5^-b estimate(rate=1), rel <= 1e-12",
        worst <= 1e-12, {"max_relative_error": worst},
    )


# name, acceptance criterion, check, replications needed for a meaningful band
_CHECKS: list[tuple[str, int, Callable, int]] = [
    ("exact_vs_bruteforce", 1, _check_exact_bruteforce, 0),
    ("exact_a4_closed_form", 2, _check_closed_form, 0),
    ("remainder_ratio_bounded", 2, _check_remainder_bounded, 0),
    ("mc_vs_exact", 3, _check_mc_vs_exact, MIN_POWERED_REPLICATIONS),
    ("shift_gap_bound", 4, _check_shift_gap, MIN_POWERED_REPLICATIONS),
    ("jensen_chain", 5, _check_jensen, MIN_POWERED_REPLICATIONS),
    ("moment_slopes", 5, _check_moment_slopes, MIN_POWERED_REPLICATIONS),
    ("lemma1_expectation", 6, _check_lemma1, LEMMA1_MIN_REPLICATIONS),
    ("lemma1_pathwise_b2", 6, _check_lemma1_pathwise, 0),
    ("matching_slopes", 7, _check_matching_slopes, MIN_POWERED_REPLICATIONS),
    ("rate_scaling", 8, _check_rate_scaling, 0),
]


def run_checks(replications: int = DEFAULT_REPLICATIONS, seed: SeedSpec = SeedSpec(0), rate=1,
               workers: int = 1) -> dict:
    ctx = {"replications": int(replications), "seed": seed, "rate": rate, "workers": workers}
    results = []
    for name, criterion, check, min_reps in _CHECKS:
        entry = {"name": name, "criterion": criterion}
        if ctx["replications"] < min_reps:
            reason = f"under-powered: {ctx['replications']} < {min_reps} replications"
            entry.update(band=None, outcome="skipped", details={"reason": reason})
        else:
            band, passed, details = check(ctx)
            entry.update(band=band, outcome="pass" if passed else "fail", details=details)
        results.append(entry)
    counts = {o: sum(r["outcome"] == o for r in results) for o in ("pass", "fail", "skipped")}
    return {"checks": results, "summary": counts, "status": "fail" if counts["fail"] else "pass"}
