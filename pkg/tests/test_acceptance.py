"""Exit criteria, one test per criterion, each at its fixed tolerance."""

import itertools
import json
import math

import numpy as np

from renewal_moments import cli
from renewal_moments.distributions import SeedSpec, analytic_profile, arrival_prefix_sums, parse_dist
from renewal_moments.matching import (
    estimate_T_b,
    fit_T_b_scaling,
    lemma1_expectation_check,
    matching_cost,
    MatchingInstance,
    optimal_assignment,
)
from renewal_moments.moments import exact_pair_moment
from renewal_moments.montecarlo import estimate_moment_grid, fit_scaling_exponent, shift_gap_check

from conftest import expand_moment, record_criterion

REPS = 100_000
SEED = 20261015
EXP = parse_dist("exp")


def test_criterion_1_exact_engine_matches_brute_force():
    bad = []
    for name, a, k in itertools.product(("exp", "uniform"), (2, 4, 6), range(3, 9)):
        prof = analytic_profile(parse_dist(name))
        value = exact_pair_moment(a, k, prof).value
        if value != expand_moment(a, k, prof.moments, step=2):
            bad.append((name, a, k, "even"))
        # all compositions, odd parts included, must give the same number
        if k <= 4 and value != expand_moment(a, k, prof.moments, step=1):
            bad.append((name, a, k, "all"))
    assert record_criterion(1, "exact engine == brute-force enumeration", not bad, f"mismatches={bad}")


def test_criterion_2_closed_form_a4():
    prof = analytic_profile(EXP)
    bad = []
    for k in range(2, 1001):
        res = exact_pair_moment(4, k, prof)
        if res.value != 12 * k * k + 12 * k or res.leading_term != 12 * k * k or res.remainder / k != 12:
            bad.append(k)
    assert record_criterion(2, "exponential a=4: value == 12k^2 + 12k, remainder/k == 12", not bad,
                            f"failing k={bad[:5]}")


def test_criterion_3_monte_carlo_vs_exact():
    worst = 0.0
    for i, name in enumerate(("exp", "uniform", "gamma:s=2")):
        spec = parse_dist(name)
        prof = analytic_profile(spec)
        ests = estimate_moment_grid(spec, [2, 4], [5, 20, 100], REPS, SeedSpec(SEED, 30 + i))
        for (a, k), est in ests.items():
            exact = float(exact_pair_moment(int(a), k, prof).value)
            worst = max(worst, abs(est.mean - exact) / est.std_error)
    assert record_criterion(3, "MC within 4 se of exact on {2,4}x{5,20,100}x3 families", worst <= 4,
                            f"max |z|={worst:.2f}")


def test_criterion_4_shift_gap_bound():
    rows = []
    for i, (a, r) in enumerate(itertools.product((2, 4), (1, 2, 5))):
        res = shift_gap_check(a, 10, r, EXP, SeedSpec(SEED, 40 + i), REPS)
        rows.append((a, r, res.estimate.mean, res.bound, res.holds(4)))
    ok = all(row[-1] for row in rows)
    assert record_criterion(4, "E|X_{k+r}-X_k|^a <= C_a^a r^a + 4 se", ok,
                            "; ".join(f"a={a} r={r}: {m:.4g}<={b:.4g}" for a, r, m, b, _ in rows))


def test_criterion_5_moment_slopes():
    grid = [10, 30, 100, 300, 1000]
    s2 = fit_scaling_exponent(2, grid, EXP, REPS, SeedSpec(SEED, 50)).slope
    s4 = fit_scaling_exponent(4, grid, EXP, REPS, SeedSpec(SEED, 51)).slope
    s1 = fit_scaling_exponent(1, grid, EXP, REPS, SeedSpec(SEED, 52)).slope
    ok = abs(s2 - 1) <= 0.05 and abs(s4 - 2) <= 0.08 and s1 <= 0.55
    assert record_criterion(5, "moment slopes b=2: 1+/-0.05, b=4: 2+/-0.08, b=1: <=0.55", ok,
                            f"b=2 {s2:.4f}, b=4 {s4:.4f}, b=1 {s1:.4f}")


def test_criterion_6_identity_matching_optimal():
    worst_margin = math.inf
    for i, (n, b) in enumerate(itertools.product((2, 3, 4), (1, 2, 3))):
        table = lemma1_expectation_check(n, b, EXP, REPS, SeedSpec(SEED, 60 + i))
        ident = table[0]
        assert ident.permutation == tuple(range(n))
        for row in table[1:]:
            margin = (row.mean - ident.mean) / math.hypot(row.std_error, ident.std_error)
            worst_margin = min(worst_margin, margin)
    worst_rel = 0.0
    for i in range(1000):
        x = arrival_prefix_sums(EXP, 50, SeedSpec(SEED, 10_000 + 2 * i))
        y = arrival_prefix_sums(EXP, 50, SeedSpec(SEED, 10_001 + 2 * i))
        _, opt = optimal_assignment(x, y, 2)
        ident_cost = matching_cost(MatchingInstance(x, y), 2).pathwise_cost
        worst_rel = max(worst_rel, abs(opt - ident_cost) / ident_cost)
    ok = worst_margin > 4 and worst_rel <= 1e-12
    assert record_criterion(6, "identity minimal in expectation (> 4 se) and pathwise for b=2", ok,
                            f"min margin {worst_margin:.1f} se, max rel gap {worst_rel:.1e}")


def test_criterion_7_matching_slopes():
    ns = [10, 30, 100, 300]
    s2 = fit_T_b_scaling(2, ns, EXP, REPS, SeedSpec(SEED, 70)).slope
    s4 = fit_T_b_scaling(4, ns, EXP, REPS, SeedSpec(SEED, 71)).slope
    prof = analytic_profile(EXP)
    exact = float(sum(exact_pair_moment(2, k, prof).value for k in range(1, 11)))
    t2 = estimate_T_b(10, 2, EXP, REPS, SeedSpec(SEED, 72))
    z = (t2.mean - exact) / t2.std_error
    ok = abs(s2 - 2) <= 0.05 and abs(s4 - 3) <= 0.10 and exact == 110 and abs(z) <= 4
    assert record_criterion(7, "T_b slopes b=2: 2+/-0.05, b=4: 3+/-0.10; E[T_2](10)=110 within 4 se", ok,
                            f"b=2 {s2:.4f}, b=4 {s4:.4f}, z={z:.2f}")


def _rows(tmp_path, argv, tag):
    path = tmp_path / f"{tag}.json"
    assert cli.main(argv + ["--format", "json", "--out", str(path)]) == 0
    return json.loads(path.read_text())


def test_criterion_8_rate_scaling(tmp_path):
    cases = [
        (["exact", "--a", "6", "--k-grid", "2,10,40"], "value", 6),
        (["simulate", "--b", "1.5", "--k-grid", "5,50", "--r", "1", "--replications", "5000"], "mean", 1.5),
        (["matching", "--b", "2", "--n-grid", "5,20", "--replications", "5000"], "mean", 2),
        (["matching", "--b", "0.7", "--n", "3", "--permutations", "--replications", "5000"], "mean", 0.7),
        (["scaling", "--mode", "moment", "--b", "3", "--k-grid", "10,30,100,300", "--replications", "2000"],
         "mean", 3),
        (["scaling", "--mode", "matching", "--b", "4", "--n-grid", "5,10,20,50", "--replications", "2000"],
         "mean", 4),
    ]
    worst = 0.0
    for i, (argv, column, b) in enumerate(cases):
        common = argv + ["--dist", "uniform", "--seed", "7"]
        one = _rows(tmp_path, common + ["--rate", "1"], f"r1_{i}")
        five = _rows(tmp_path, common + ["--rate", "5"], f"r5_{i}")
        for r1, r5 in zip(one, five):
            worst = max(worst, abs(float(r5[column]) / float(r1[column]) / 5.0**-b - 1))
    assert record_criterion(8, "rate 5 scales every moment output by 5^-b", worst <= 1e-12,
                            f"max rel err {worst:.1e}")


def test_criterion_9_verify_deterministic(tmp_path):
    outs = []
    for tag, workers in (("a", "1"), ("b", "1"), ("c", "4")):
        path = tmp_path / f"verify_{tag}.json"
        code = cli.main(["verify", "--replications", "20000", "--seed", "5", "--workers", workers,
                         "--out", str(path)])
        assert code in (0, 1)
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    report = json.loads(outs[0])
    assert record_criterion(9, "verify reports byte-identical across reruns and worker counts", ok,
                            f"status {report['status']}, {report['summary']}")
