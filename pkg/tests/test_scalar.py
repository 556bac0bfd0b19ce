import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from freeito.cumulants import CumulantSequence, catalog, moments_from_cumulants, semigroup_cumulants
from freeito.errors import DomainError, RegimeError, ValidationError
from freeito.scalar import (
    StepFunction,
    bdg_check,
    diagonal_cumulants,
    diagonal_mean,
    extrapolate_tail,
    integral_cumulants,
    integral_moments,
    isometry_norm_squared,
    lp_power,
    mixed_moment,
    moment_flow,
    mu_norm,
    mu_norm_power,
    mu_norm_tail,
)

import oracles

SEMI = catalog("semicircular")
POISSON = catalog("free_poisson")

small_q = st.fractions(-2, 2, max_denominator=4)
nonneg_q = st.fractions(0, 2, max_denominator=4)


@st.composite
def step_functions(draw, values=small_q, max_pieces=4):
    k = draw(st.integers(1, max_pieces))
    cuts = sorted(draw(st.sets(st.fractions(0, 3, max_denominator=4), min_size=k + 1, max_size=k + 1)))
    return StepFunction(cuts, [draw(values) for _ in range(k)])


nonneg_cumulants = st.lists(nonneg_q, min_size=10, max_size=10).map(CumulantSequence)


def test_step_function_basics():
    f = StepFunction([0, 1, 2], [1, 3])
    assert f(np.array([-1, 0, 0.5, 1, 1.5, 2])).tolist() == [0, 1, 1, 3, 3, 0]
    assert f.value_at(Fraction(3, 2)) == 3
    assert (f + f).values == (2, 6)
    assert (f - f).integral() == 0
    assert f.refine([Fraction(1, 2), 5]).integral() == f.integral()
    assert StepFunction.from_json(f.to_json()) == f
    with pytest.raises(ValidationError):
        StepFunction([0, 0], [1])
    with pytest.raises(ValidationError):
        StepFunction([0, 1, 2], [1])


def test_lp_power_examples():
    for p in (1, 2, 5):
        assert lp_power(StepFunction.indicator(), p) == 1
    assert lp_power(StepFunction([0, 3], [2]), 2) == 12
    assert lp_power(StepFunction([0, 1, 2], [1, 3]), 3) == 28
    assert lp_power(StepFunction([0, 1], [-2]), 3) == 8


def test_integral_cumulants_examples():
    eps = Fraction(1, 7)
    r = catalog("free_poisson", rate=3)
    nu = integral_cumulants(StepFunction.indicator(2, 2 + eps), r, 8)
    assert nu.take(8) == semigroup_cumulants(r, eps).take(8)
    f = StepFunction([0, 1, 3], [2, -1])
    assert integral_cumulants(f, SEMI, 6).take(6) == [0, lp_power(f, 2), 0, 0, 0, 0]
    assert integral_cumulants(StepFunction.zero(), POISSON, 5).take(5) == [0] * 5


@given(step_functions(), st.lists(small_q, min_size=6, max_size=6))
def test_integral_cumulants_signed_powers(f, values):
    nu = integral_cumulants(f, CumulantSequence(values), 6)
    for k in range(1, 7):
        assert nu[k] == values[k - 1] * oracles.step_power_integral(f.breakpoints, f.values, k)


def test_integral_cumulants_carry_closed_form():
    f = StepFunction([0, 1, 2], [1, 2])
    nu = integral_cumulants(f, POISSON)
    assert nu[30] == 1 + 2**30


def test_diagonal_cumulants_examples():
    d = diagonal_cumulants(SEMI, 2, Fraction(5, 2), 5)
    assert d.take(5) == [Fraction(5, 2), 0, 0, 0, 0]
    r = catalog("free_poisson", rate=2)
    assert diagonal_cumulants(r, 1, 3, 6).take(6) == semigroup_cumulants(r, 3).take(6)
    assert diagonal_cumulants(POISSON, 3, 2, 4).take(4) == [2, 2, 2, 2]
    assert diagonal_mean(POISSON, 3, 2) == 2
    # closed form survives: r_n(Delta_2) for a semicircle-plus-jumps law
    mixed = catalog("free_compound_poisson", rate=1, jumps={2: 1})
    assert diagonal_cumulants(mixed, 2, 1, 3)[7] == mixed[14]


@pytest.mark.parametrize("n", range(1, 7))
def test_semicircle_norm_is_catalan(n):
    f = StepFunction([0, 1, 2, 4], [1, Fraction(-1, 2), 3])
    assert mu_norm_power(f, SEMI, 2 * n) == oracles.catalan(n) * lp_power(f, 2) ** n


def test_indicator_norm_is_moment():
    for r in (SEMI, POISSON, catalog("free_poisson", rate=Fraction(1, 3))):
        m = moments_from_cumulants(r, 8)
        for n in (2, 4, 6, 8):
            assert mu_norm_power(StepFunction.indicator(), r, n) == m[n]


@given(step_functions(), nonneg_cumulants)
def test_norm_two(f, r):
    expected = r[2] * lp_power(f, 2) + r[1] ** 2 * lp_power(f, 1) ** 2
    assert mu_norm_power(f, r, 2) == expected


@given(step_functions(max_pieces=3), nonneg_cumulants, st.sampled_from([2, 4, 6]))
def test_norm_matches_bruteforce(f, r, n):
    weight = lambda b: r[len(b)] * oracles.step_abs_power_integral(f.breakpoints, f.values, len(b))
    assert mu_norm_power(f, r, n) == oracles.nc_sum(n, weight)


@given(step_functions(values=nonneg_q), step_functions(values=nonneg_q), nonneg_cumulants,
       st.sampled_from([2, 4, 6, 8, 10]))
def test_triangle_inequality(f, g, r, n):
    assert mu_norm(f + g, r, n) <= mu_norm(f, r, n) + mu_norm(g, r, n) + 1e-12


@given(step_functions(), nonneg_cumulants, st.fractions(-3, 3, max_denominator=5), st.sampled_from([2, 4, 6]))
def test_homogeneity_exact(f, r, c, n):
    assert mu_norm_power(f * c, r, n) == abs(c) ** n * mu_norm_power(f, r, n)


@given(step_functions(values=nonneg_q), nonneg_cumulants, st.sampled_from([2, 4, 6]), st.fractions(0, 1, max_denominator=4))
def test_monotonicity(f, r, n, shrink):
    g = f * shrink
    assert f.dominates(g)
    assert mu_norm_power(g, r, n) <= mu_norm_power(f, r, n)


@given(st.lists(st.fractions(0, 3, max_denominator=4), min_size=1, max_size=4), nonneg_cumulants,
       st.sampled_from([2, 4, 6]))
def test_bounded_function_bound(values, r, n):
    k = len(values)
    f = StepFunction([Fraction(i, k) for i in range(k + 1)], values)
    C = max(values)
    assert mu_norm_power(f, r, n) <= mu_norm_power(StepFunction.indicator(0, 1, C), r, n)


@given(step_functions(values=nonneg_q), nonneg_cumulants)
def test_isometry_norm_comparison_is_equality(f, r):
    unit = CumulantSequence([r[1], 1] + r.take(10)[2:])
    lhs = f.integral(2) + unit[1] ** 2 * f.integral(1) ** 2
    assert lhs == mu_norm_power(f, unit, 2)


@given(step_functions(), st.lists(small_q, min_size=4, max_size=4))
def test_scalar_isometry(f, values):
    r = CumulantSequence(values)
    assert integral_moments(f, r, 2)[2] == isometry_norm_squared(f, r)


def test_norm_requires_nonnegative_cumulants():
    with pytest.raises(RegimeError):
        mu_norm(StepFunction.indicator(), CumulantSequence([1, 1, -1, 1]), 4)
    with pytest.raises(DomainError):
        mu_norm(StepFunction.indicator(), SEMI, 3)


def test_tail_examples():
    tail = mu_norm_tail(StepFunction.indicator(), SEMI, 30)
    values = [v for _, v in tail]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] < 2
    # the correction is O(log n / n), so the estimate only improves on the raw tail
    assert abs(extrapolate_tail(tail) - 2) < abs(values[-1] - 2)
    m = moments_from_cumulants(POISSON, 12)
    assert [v for _, v in mu_norm_tail(StepFunction.indicator(), POISSON, 12)] == pytest.approx(
        [float(m[n]) ** (1 / n) for n in range(2, 13, 2)], rel=1e-14)
    assert all(v == 0 for _, v in mu_norm_tail(StepFunction.zero(), POISSON, 8))


def test_mixed_moment():
    f = StepFunction([0, 1, 2], [1, 3])
    g = StepFunction([0, 2], [Fraction(1, 2)])
    r = CumulantSequence([1, 2, 3, 4])
    assert mixed_moment([f], r) == r[1] * f.integral()
    assert mixed_moment([f, f], r) == integral_moments(f, r, 2)[2]
    assert mixed_moment([f] * 4, r) == integral_moments(f, r, 4)[4]
    expected = oracles.nc_sum(3, lambda b: r[len(b)] * _prod_int([(f, g, f)[i - 1] for i in b]))
    assert mixed_moment([f, g, f], r) == expected


def _prod_int(fs):
    total = Fraction(0)
    for a, b in zip(range(0, 2), range(1, 3)):
        v = Fraction(1)
        for h in fs:
            v *= h.value_at(a)
        total += v * (b - a)
    return total


def test_moment_flow_examples():
    f = StepFunction.indicator()
    y = moment_flow(f, SEMI, 4, 1.0, 1000)
    assert y[1] == pytest.approx(1, rel=1e-12)
    assert y[3] == pytest.approx(2, rel=1e-12)
    drift = CumulantSequence([Fraction(3, 2)], True)
    g = StepFunction([0, 1, 2], [2, -1])
    assert moment_flow(g, drift, 1, 2.0, 500)[0] == pytest.approx(1.5 * 1, rel=1e-12)
    assert moment_flow(StepFunction.zero(), POISSON, 4, 1.0, 200) == [0, 0, 0, 0]


def test_moment_flow_matches_cumulant_route():
    f = StepFunction([Fraction(1, 3), 1, Fraction(3, 2), 2], [1, Fraction(-1, 2), 2])
    r = catalog("free_poisson", rate=Fraction(1, 2))
    exact = integral_moments(f, r, 6)
    y = moment_flow(f, r, 6, 2.5, 4000)
    assert y == pytest.approx([float(exact[n]) for n in range(1, 7)], rel=1e-9)


def test_moment_flow_warns_on_few_steps():
    with pytest.warns(UserWarning):
        moment_flow(StepFunction.indicator(), SEMI, 2, 1.0, 10)


def test_bdg_examples():
    f = StepFunction([0, 1, 2], [1, 3])
    lhs, rhs, ok = bdg_check(f, POISSON, 1, 4)
    assert ok and lhs == pytest.approx(rhs, rel=1e-13)
    lhs, rhs, ok = bdg_check(StepFunction.indicator(), POISSON, 2, 2)
    assert ok and lhs <= rhs
    for n in (2, 4, 6):
        lhs, rhs, ok = bdg_check(f, SEMI, 2, n)
        assert ok


@given(step_functions(values=nonneg_q, max_pieces=3),
       st.lists(nonneg_q, min_size=18, max_size=18).map(CumulantSequence),
       st.integers(1, 3), st.sampled_from([2, 4, 6]))
def test_bdg_property(f, r, k, n):
    assert bdg_check(f, r, k, n)[2]
