"""Tests for the Matthews-Rosenberger variance expression."""
import math

import pytest

from core.errors import DomainError, ResourceLimitError
from core.martingale import var_Mn
from core.mr_appendix import MRParams, mr_check, mr_special_case, mr_terms, mr_variance
from storage.models import UrnParams


def g(num: float, den: float) -> float:
    return math.exp(math.lgamma(num) - math.lgamma(den))


def literal_terms(params: UrnParams, n: int):
    """The seven summands with every sum written out as a loop."""
    mr = MRParams.from_urn(params)
    c, lam, tw, tb, dl = mr.c, mr.lam, mr.t_w, mr.t_b, mr.delta

    def inner(k):
        return sum(g(c + j + lam, c + j + 1) for j in range(k, n))

    def middle(l):
        return sum(g(c + 2 * lam + k - 1, c + k + lam) * inner(k) for k in range(l + 1, n))

    head = g(c, c + lam)
    t1 = 2 * tw * tb * sum(g(c + l, c + 2 * lam + l) * middle(l) for l in range(1, n - 1))
    t2 = 2 * lam * (tw - tb) * dl * head * sum(
        g(c + lam + l - 1, c + 2 * lam + l) * middle(l) for l in range(1, n - 1)
    )
    t3 = -((dl * head * inner(0)) ** 2)
    t4 = n * tw * tb + 2 * lam * tw * tb * sum(
        g(c + k, c + k + lam) * inner(k) for k in range(1, n)
    )
    t5 = (tw - tb) * dl * head * sum(g(c + lam + k - 1, c + k) for k in range(1, n + 1))
    t6 = 2 * lam * (tw - tb) * dl * head * sum(
        g(c + lam + k - 1, c + k + lam) * inner(k) for k in range(1, n)
    )
    t7 = 2 * dl ** 2 * g(c, c + 2 * lam) * sum(
        g(c + lam + j, c + j + 1)
        * sum(g(c + 2 * lam + k - 1, c + lam + k) for k in range(1, j + 1))
        for j in range(1, n)
    )
    return (t1, t2, t3, t4, t5, t6, t7)


@pytest.fixture
def binomial_point() -> UrnParams:
    return UrnParams(u=1, v=1, p_w=0.5, p_b=0.5)


class TestMRParams:
    def test_reparametrization(self):
        mr = MRParams.from_urn(UrnParams(u=2, v=5, p_w=0.1, p_b=0.3))
        assert (mr.t_w, mr.t_b, mr.c) == pytest.approx((0.75, 0.25, 7))
        assert mr.lam == pytest.approx(0.6)
        assert mr.delta == pytest.approx(5 * 0.75 - 2 * 0.25)

    def test_rejects_unnormalized_weights(self):
        with pytest.raises(DomainError):
            MRParams(t_w=0.6, t_b=0.6, c=2, lam=0.0, u=1, v=1)


class TestMRVariance:
    def test_published_value(self, binomial_point):
        variance = mr_variance(binomial_point, 25)
        assert math.sqrt(variance) / 25 == pytest.approx(0.139, abs=1e-3)

    def test_excess_is_first_summand(self, binomial_point):
        comparison = mr_check(binomial_point, 25)
        assert comparison.correct_variance == pytest.approx(6.25, rel=1e-12)
        assert comparison.correct_sd == pytest.approx(0.1, rel=1e-12)
        assert comparison.excess == pytest.approx(comparison.first_term, rel=1e-10)
        assert comparison.mr_variance > comparison.correct_variance

    @pytest.mark.parametrize(
        "params, n",
        [
            (UrnParams(u=1, v=1, p_w=0.5, p_b=0.5), 12),
            (UrnParams(u=2, v=3, p_w=0.1, p_b=0.3), 15),
            (UrnParams(u=0, v=1, p_w=0.05, p_b=0.2), 20),
            (UrnParams(u=4, v=1, p_w=0.6, p_b=0.3), 9),
        ],
    )
    def test_matches_literal_loops(self, params, n):
        for fast, slow in zip(mr_terms(params, n), literal_terms(params, n)):
            assert fast == pytest.approx(slow, rel=1e-10, abs=1e-12)

    def test_zero_lambda_matches_special_case(self):
        for n in (2, 3, 10, 25, 60):
            for u in (1, 2, 3):
                params = UrnParams(u=u, v=u, p_w=0.5, p_b=0.5)
                assert mr_variance(params, n) == pytest.approx(
                    mr_special_case(n, 2 * u), rel=1e-10
                )

    def test_differs_from_exact(self, binomial_point):
        assert mr_variance(binomial_point, 25) != pytest.approx(var_Mn(binomial_point, 25))

    def test_finite_up_to_cap(self):
        params = UrnParams(u=3, v=2, p_w=0.01, p_b=0.02)
        assert math.isfinite(mr_variance(params, 500))

    def test_cap(self, binomial_point):
        with pytest.raises(ResourceLimitError):
            mr_variance(binomial_point, 501)
        with pytest.raises(ResourceLimitError):
            mr_variance(binomial_point, 30, cap=20)

    def test_needs_two_steps(self, binomial_point):
        with pytest.raises(DomainError):
            mr_terms(binomial_point, 1)


class TestSpecialCase:
    def test_empty_outer_sum(self):
        assert mr_special_case(2, 2) == pytest.approx(0.5)

    def test_exceeds_binomial_variance(self):
        assert mr_special_case(25, 2) > 6.25

    @pytest.mark.parametrize("n", [3, 4, 10, 100])
    def test_excess_positive(self, n):
        assert mr_special_case(n, 2) - n / 4 > 0

    def test_literal(self):
        n, c = 14, 4
        total = 0.0
        for l in range(1, n - 1):
            for k in range(l + 1, n):
                total += sum(1 / (c + j) for j in range(k, n)) / (c + k - 1)
        assert mr_special_case(n, c) == pytest.approx(0.5 * total + n / 4, rel=1e-12)
