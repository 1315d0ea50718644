"""Correlation test oracles.

The t tail probability is checked against direct numerical integration of
the t density, and the Spearman machinery against exact permutation
enumeration, so no expected value here is taken from the implementation
under test.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from rigorbench.errors import BadDf, ConstantInput, LengthMismatch
from rigorbench.stats import (
    correlate,
    pearson,
    rankdata,
    spearman,
    spearman_exact,
    t_two_tailed_p,
)


def t_density(x: float, df: int) -> float:
    log_c = (
        math.lgamma((df + 1) / 2)
        - math.lgamma(df / 2)
        - 0.5 * math.log(df * math.pi)
    )
    return math.exp(log_c) * (1 + x * x / df) ** (-(df + 1) / 2)


def oracle_two_tailed(t: float, df: int) -> float:
    tail, _ = quad(t_density, abs(t), math.inf, args=(df,))
    return 2 * tail


@pytest.mark.parametrize("t", [0.0, 0.5, 1.074, 2.0, 5.0])
@pytest.mark.parametrize("df", [1, 5, 30])
def test_t_tail_matches_numerical_integration(t, df):
    assert t_two_tailed_p(t, df) == pytest.approx(oracle_two_tailed(t, df), abs=1e-9)


def test_t_tail_properties():
    assert t_two_tailed_p(0.0, 7) == pytest.approx(1.0)
    assert t_two_tailed_p(math.inf, 7) == 0.0
    assert t_two_tailed_p(-2.0, 7) == t_two_tailed_p(2.0, 7)
    with pytest.raises(BadDf):
        t_two_tailed_p(1.0, 0)
    with pytest.raises(BadDf):
        t_two_tailed_p(1.0, 2.5)


def test_pearson_hand_computed():
    # perfectly linear data: r = 1, p = 0
    result = pearson([1, 2, 3, 4], [2, 4, 6, 8])
    assert result.coefficient == pytest.approx(1.0)
    assert result.p_value == 0.0

    anti = pearson([1, 2, 3], [3, 2, 1])
    assert anti.coefficient == pytest.approx(-1.0)


def test_pearson_known_middling_case():
    # computed once by hand: x=[1,2,3,4,5], y=[2,1,4,3,7]
    # r = cov/sx/sy = 0.8411582394316, t = r*sqrt(3/(1-r^2)) = 2.6926...
    x = [1, 2, 3, 4, 5]
    y = [2, 1, 4, 3, 7]
    xm, ym = np.mean(x), np.mean(y)
    num = sum((a - xm) * (b - ym) for a, b in zip(x, y))
    den = math.sqrt(sum((a - xm) ** 2 for a in x) * sum((b - ym) ** 2 for b in y))
    r_oracle = num / den
    result = pearson(x, y)
    assert result.coefficient == pytest.approx(r_oracle, abs=1e-12)
    t = r_oracle * math.sqrt(3 / (1 - r_oracle**2))
    assert result.p_value == pytest.approx(oracle_two_tailed(t, 3), abs=1e-9)
    assert result.n == 5
    assert result.method == "pearson"


def test_pearson_validation():
    with pytest.raises(LengthMismatch):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(LengthMismatch):
        pearson([1, 2], [1, 2])
    with pytest.raises(ConstantInput):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ConstantInput):
        pearson([1, 2, 3], [5, 5, 5])


def test_rankdata_with_ties():
    assert rankdata([10, 20, 30]).tolist() == [1.0, 2.0, 3.0]
    assert rankdata([10, 20, 20, 30]).tolist() == [1.0, 2.5, 2.5, 4.0]
    assert rankdata([7, 7, 7]).tolist() == [2.0, 2.0, 2.0]
    assert rankdata([3, 1, 2]).tolist() == [3.0, 1.0, 2.0]


def test_spearman_equals_pearson_on_ranks():
    x = [10, 40, 20, 50, 30]
    y = [1.2, 0.8, 1.9, 0.5, 1.1]
    via_ranks = pearson(rankdata(x), rankdata(y))
    result = spearman(x, y)
    assert result.coefficient == pytest.approx(via_ranks.coefficient, abs=1e-12)
    assert result.p_value == pytest.approx(via_ranks.p_value, abs=1e-12)
    assert result.method == "spearman"


def test_spearman_monotone_is_perfect():
    x = [1, 2, 3, 4, 5]
    y = [10, 100, 1000, 10000, 100000]
    assert spearman(x, y).coefficient == pytest.approx(1.0)


def test_spearman_exact_enumeration_small_case():
    # for n=3 with distinct ranks the 6 permutations give rho in
    # {1, 0.5, 0.5, -0.5, -0.5, -1}; observed rho=1 is matched only by
    # itself and its negation: p = 2/6
    result = spearman_exact([1, 2, 3], [10, 20, 30])
    assert result.coefficient == pytest.approx(1.0)
    assert result.p_value == pytest.approx(2 / 6)
    assert result.method == "spearman_exact"


def test_spearman_exact_agrees_with_t_approx_direction():
    rng = np.random.default_rng(4)
    x = rng.random(8)
    y = 0.7 * x + 0.3 * rng.random(8)
    approx = spearman(x, y)
    exact = spearman_exact(x, y)
    assert exact.coefficient == pytest.approx(approx.coefficient)
    # both should call the association significant-ish or not together
    assert (exact.p_value < 0.1) == (approx.p_value < 0.1) or abs(
        exact.p_value - approx.p_value
    ) < 0.08


def test_spearman_exact_size_limit():
    with pytest.raises(LengthMismatch):
        spearman_exact(list(range(11)), list(range(11)))


def test_correlate_dispatch():
    x, y = [1, 2, 3, 4], [2, 1, 4, 3]
    assert correlate(x, y, "pearson").method == "pearson"
    assert correlate(x, y, "spearman").method == "spearman"
    assert correlate(x, y, "spearman_exact").method == "spearman_exact"
    with pytest.raises(ValueError):
        correlate(x, y, "kendall")


def test_support_f1_style_fixture():
    # correlation of per-class supports with per-class F1 on a seven-class
    # fixture; the expected values were computed with an independent tool
    supports = [681, 112, 97, 55, 35, 11, 10]
    f1 = [0.95, 0.76, 0.82, 0.91, 0.82, 0.96, 0.74]
    result = pearson(supports, f1)
    assert result.coefficient == pytest.approx(0.43562516676022134, abs=1e-9)
    assert result.p_value == pytest.approx(0.3285854779615682, abs=1e-9)

    rho = spearman(supports, f1)
    exact = spearman_exact(supports, f1)
    assert rho.coefficient == pytest.approx(exact.coefficient)
