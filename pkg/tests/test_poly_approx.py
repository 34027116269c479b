"""Tests for the exp polynomial fit and its relative-error contract."""

import math

import numpy as np
import pytest

from linhop.errors import DegreeExhausted, InvalidBound
from linhop.poly_approx import (
    ExpPolynomial,
    degree_bound,
    eval_poly,
    fit_exp_poly,
    sup_relative_error,
)


def taylor_poly(degree, bound, target):
    """Truncated Taylor series of exp as an ExpPolynomial (exact coefficients)."""
    coeffs = tuple(1.0 / math.factorial(k) for k in range(degree + 1))
    return ExpPolynomial(
        coeffs=coeffs,
        degree=degree,
        interval_bound=bound,
        target_rel_error=target,
        certified_rel_error=0.0,
    )


def test_fit_value_at_zero():
    p = fit_exp_poly(1.0, 1e-3, 32)
    assert 1 - 1e-3 <= p(0.0) <= 1 + 1e-3


def test_fit_certificate_meets_target():
    p = fit_exp_poly(1.0, 1e-3)
    assert p.certified_rel_error <= 1e-3


def test_fit_degree_within_reference_bound():
    g_ref = degree_bound(3.0, 1e-4)
    p = fit_exp_poly(3.0, 1e-4, max_degree=64)
    assert p.degree <= 4 * g_ref


def test_fit_rejects_bad_inputs():
    with pytest.raises(InvalidBound):
        fit_exp_poly(0.0, 1e-3)
    with pytest.raises(ValueError):
        fit_exp_poly(1.0, 0.5)
    with pytest.raises(ValueError):
        fit_exp_poly(1.0, 1e-3, max_degree=0)


def test_fit_degree_exhausted():
    with pytest.raises(DegreeExhausted):
        fit_exp_poly(64.0, 1e-3, max_degree=8)


def test_eval_constant_and_identity():
    const = ExpPolynomial((1.0,), 0, 1.0, 1e-2, 1e-2)
    assert eval_poly(const, 7.5) == 1.0
    ident = ExpPolynomial((0.0, 1.0), 1, 1.0, 1e-2, 1e-2)
    assert eval_poly(ident, 3.0) == 3.0


def test_eval_matches_exp_at_one():
    p = fit_exp_poly(1.0, 1e-3)
    assert abs(p(1.0) - math.e) <= 1e-3 * math.e


def test_eval_horner_matches_power_sum():
    rng = np.random.default_rng(0)
    p = fit_exp_poly(2.0, 1e-3)
    xs = rng.uniform(-2, 2, 200)
    naive = sum(c * xs**i for i, c in enumerate(p.coeffs))
    assert np.max(np.abs(eval_poly(p, xs) - naive) / np.abs(naive)) <= 1e-12


def test_sup_error_taylor_tiny():
    p = taylor_poly(20, 0.5, 1e-2)
    assert sup_relative_error(p, 4096) < 1e-12


def test_sup_error_constant_closed_form():
    # sup over [-1, 1] of |1 - e^x| / e^x is attained at x = -1: e - 1
    p = ExpPolynomial((1.0,), 0, 1.0, 1e-2, 0.0)
    assert abs(sup_relative_error(p, 4096) - (math.e - 1.0)) <= 1e-6


def test_sup_error_two_points_is_endpoints():
    p = taylor_poly(6, 1.0, 1e-2)
    expected = max(
        abs(p(x) - math.exp(x)) / math.exp(x) for x in (-1.0, 1.0)
    )
    assert sup_relative_error(p, 2) == pytest.approx(expected, rel=1e-12)


def test_degree_bound_first_branch():
    # log(1/delta) < 10 e makes the first term dominate
    delta = 1e-2
    assert math.log(1.0 / delta) < 10 * math.e
    assert degree_bound(10.0, delta) == 10


def test_degree_bound_second_branch():
    delta = math.exp(-math.e)
    assert 0 < delta < 0.1
    assert degree_bound(1.0, delta) == 3


def test_degree_bound_invalid():
    with pytest.raises(InvalidBound):
        degree_bound(0.0, 1e-3)


def test_relative_contract_random_sample():
    rng = np.random.default_rng(1)
    for bound, delta in [(0.5, 1e-2), (1.0, 1e-3), (2.0, 1e-3)]:
        p = fit_exp_poly(bound, delta)
        xs = rng.uniform(-bound, bound, 100000)
        rel = np.abs(eval_poly(p, xs) - np.exp(xs)) / np.exp(xs)
        assert float(np.max(rel)) <= 1.05 * delta


def test_fit_deterministic():
    a = fit_exp_poly(1.5, 1e-3)
    b = fit_exp_poly(1.5, 1e-3)
    assert a.coeffs == b.coeffs and a.degree == b.degree


def test_json_round_trip():
    p = fit_exp_poly(1.0, 1e-3)
    q = ExpPolynomial.from_json(p.to_json())
    assert q == p


def test_invariant_validation():
    with pytest.raises(ValueError):
        ExpPolynomial((1.0, 0.0), 1, 1.0, 1e-2, 1e-3)  # zero leading coeff
    with pytest.raises(ValueError):
        ExpPolynomial((1.0,), 0, 1.0, 1e-2, 2e-2)  # certificate above target
    with pytest.raises(ValueError):
        ExpPolynomial((1.0, 1.0), 0, 1.0, 1e-2, 1e-3)  # wrong count
