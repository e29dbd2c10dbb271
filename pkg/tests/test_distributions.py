import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from renewal_moments.distributions import (
    DistSpecError,
    ProcessSpec,
    SeedSpec,
    analytic_profile,
    arrival_prefix_sums,
    make_rng,
    parse_dist,
    sample_increments,
)

FAMILIES = ["exp", "uniform", "gamma:s=2", "gamma:s=4", "lognormal:sigma=0.5"]


def test_exponential_fourth_moment():
    assert analytic_profile(parse_dist("exp")).moments[4] == 24


def test_uniform_second_moment_quadrature():
    oracle, _ = integrate.quad(lambda x: x**2 / 2, 0, 2)
    assert oracle == pytest.approx(4 / 3)
    assert analytic_profile(parse_dist("uniform")).moments[2] == Fraction(4, 3)


def test_gamma_second_moment_quadrature():
    law = stats.gamma(2, scale=0.5)
    oracle, _ = integrate.quad(lambda x: x**2 * law.pdf(x), 0, math.inf)
    assert oracle == pytest.approx(1.5)
    assert analytic_profile(parse_dist("gamma:s=2")).moments[2] == Fraction(3, 2)


@pytest.mark.parametrize("name", FAMILIES)
def test_profiles_agree_with_scipy_moments(name):
    spec = parse_dist(name, max_order=6)
    prof = analytic_profile(spec)
    law = {
        "exp": stats.expon(),
        "uniform": stats.uniform(0, 2),
        "gamma": stats.gamma(float(spec.param or 1), scale=1 / float(spec.param or 1)),
        "lognormal": stats.lognorm(float(spec.param or 1), scale=math.exp(-float(spec.param or 1) ** 2 / 2)),
    }[spec.family]
    for p in range(7):
        assert float(prof.moments[p]) == pytest.approx(law.moment(p), rel=1e-6)


def test_lognormal_profile_is_decimal_kind():
    prof = analytic_profile(parse_dist("lognormal:sigma=1.2"))
    assert prof.kind == "decimal"
    assert float(prof.moments[3]) == pytest.approx(math.exp(1.44 * 3))
    assert analytic_profile(parse_dist("gamma:s=2")).kind == "rational"


def test_caps():
    with pytest.raises(ValueError, match="cap"):
        ProcessSpec("exp", max_order=18)
    with pytest.raises(ValueError, match="cap"):
        parse_dist("lognormal:sigma=2")
    assert parse_dist("lognormal:sigma=2", allow_large=True).param == 2


@pytest.mark.parametrize(
    "text, family, param",
    [
        ("exp", "exp", None),
        ("exponential", "exp", None),
        ("uniform", "uniform", None),
        ("gamma:s=2", "gamma", Fraction(2)),
        ("gamma:s=0.5", "gamma", Fraction(1, 2)),
        ("lognormal:sigma=0.25", "lognormal", Fraction(1, 4)),
    ],
)
def test_parse_dist(text, family, param):
    spec = parse_dist(text)
    assert (spec.family, spec.param) == (family, param)


@pytest.mark.parametrize(
    "text", ["", "gamma", "gamma:k=2", "gamma:s=-1", "gamma:s=abc", "exp:s=1", "cauchy", "lognormal:sigma"]
)
def test_parse_dist_errors_name_grammar(text):
    with pytest.raises(DistSpecError) as info:
        parse_dist(text)
    assert "grammar" in str(info.value) or "positive real" in str(info.value)


def test_exponential_sample_mean():
    x = sample_increments(parse_dist("exp"), 100_000, SeedSpec(11))
    assert abs(x.mean() - 1) < 0.02


def test_gamma_sample_variance():
    x = sample_increments(parse_dist("gamma:s=4"), 100_000, SeedSpec(12))
    assert abs(x.var(ddof=1) - 0.25) < 0.01


def test_same_seed_same_sequence_distinct_streams_differ():
    spec = parse_dist("uniform")
    a = sample_increments(spec, 1000, SeedSpec(5, 1))
    b = sample_increments(spec, 1000, SeedSpec(5, 1))
    c = sample_increments(spec, 1000, SeedSpec(5, 2))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    # distinct streams look independent
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.15


def test_make_rng_path_independent_of_call_order():
    s = SeedSpec(9, 3)
    first = make_rng(s, 7).random(4)
    make_rng(s, 1).random(100)
    assert np.array_equal(make_rng(s, 7).random(4), first)


@pytest.mark.parametrize("bad", [-1, 2**64])
def test_seed_must_be_u64(bad):
    with pytest.raises(ValueError):
        SeedSpec(bad)


@pytest.mark.parametrize("name", FAMILIES)
def test_raw_moments_match_profile_within_5_se(name):
    spec = parse_dist(name, max_order=6)
    prof = analytic_profile(spec)
    x = sample_increments(spec, 1_000_000, SeedSpec(2024, FAMILIES.index(name)))
    for p in range(1, 7):
        vals = x**p
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - float(prof.moments[p])) <= 5 * se, p


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(FAMILIES), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_draws_positive_and_paths_increasing(name, master, stream):
    spec = parse_dist(name)
    x = sample_increments(spec, 2000, SeedSpec(master, stream))
    assert np.all(x > 0)
    path = arrival_prefix_sums(spec, 2000, SeedSpec(master, stream))
    assert np.all(np.diff(path) > 0)


def test_rate_is_a_prefactor():
    seed = SeedSpec(3)
    one = arrival_prefix_sums(parse_dist("gamma:s=2"), 50, seed)
    two = arrival_prefix_sums(parse_dist("gamma:s=2", rate=2), 50, seed)
    assert np.array_equal(two, one / 2)
    assert np.allclose(np.diff(one, prepend=0), sample_increments(parse_dist("gamma:s=2"), 50, seed))


def test_first_arrival_is_first_increment():
    spec = parse_dist("exp", rate=4)
    seed = SeedSpec(8)
    assert arrival_prefix_sums(spec, 1, seed)[0] == sample_increments(spec, 1, seed)[0] / 4


def test_mean_arrival_is_additive():
    spec = parse_dist("exp")
    xs = np.array([arrival_prefix_sums(spec, 50, SeedSpec(1, i))[-1] for i in range(10_000)])
    se = xs.std(ddof=1) / math.sqrt(xs.size)
    assert abs(xs.mean() - 50) <= 5 * se
