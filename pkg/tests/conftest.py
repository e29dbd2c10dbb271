import itertools
import math
from fractions import Fraction

import pytest

from renewal_moments.distributions import analytic_profile, parse_dist


def compositions(total, slots, step=1):
    """All ordered tuples of non-negative multiples of ``step`` summing to ``total``."""
    for head in itertools.product(range(0, total + 1, step), repeat=slots - 1):
        last = total - sum(head)
        if last >= 0 and last % step == 0:
            yield head + (last,)


def expand_moment(a, k, moments, step):
    """Direct multinomial expansion of E[(sum_i (xi_i - tau_i))^a] over compositions."""
    def diff(l):
        return sum(math.comb(l, j) * (-1) ** (l - j) * moments[j] * moments[l - j] for j in range(l + 1))

    total = Fraction(0)
    for ls in compositions(a, k, step):
        coef = Fraction(math.factorial(a), math.prod(math.factorial(l) for l in ls))
        total += coef * math.prod((diff(l) for l in ls), start=Fraction(1))
    return total


@pytest.fixture
def expo():
    return analytic_profile(parse_dist("exp"))


@pytest.fixture
def uniform():
    return analytic_profile(parse_dist("uniform"))


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail=""):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
