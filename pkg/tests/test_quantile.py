"""Tests for the closed-form r update."""
import math

import numpy as np
import pytest

from shared.errors import ConfigError
from shared.quantile import brute_force_r, nu_quantile, quantile_rank, r_objective

NU_GRID = [round(0.05 * k, 2) for k in range(1, 20)]  # 0.05 .. 0.95


def test_r_objective_worked_example():
    scores = list(range(1, 10))
    assert r_objective(scores, 0.33, 3.0) == pytest.approx(-1.9899, abs=1e-4)
    assert r_objective(scores, 0.33, 1.0) == pytest.approx(-1.0)
    assert r_objective(scores, 0.33, 9.0) == pytest.approx(3.1212, abs=1e-4)


def test_nu_quantile_worked_example():
    sol = nu_quantile(range(1, 10), 0.33)
    assert sol.r == 3.0
    assert sol.objective_value == pytest.approx(-1.9899, abs=1e-4)
    assert sol.fraction_below == pytest.approx(2 / 9)


def test_quantile_rank_float_noise():
    # 0.1 * 30 is 3.0000000000000004 in binary floating point
    assert quantile_rank(30, 0.1) == 3
    assert quantile_rank(9, 0.33) == 3
    assert quantile_rank(5, 0.01) == 1
    assert quantile_rank(5, 0.99) == 5


def test_nu_quantile_matches_brute_force_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 129))
        scores = rng.uniform(-10.0, 10.0, size=n)
        nu = float(rng.choice(NU_GRID))
        fast = nu_quantile(scores, nu)
        slow = brute_force_r(scores, nu)
        assert r_objective(scores, nu, fast.r) <= r_objective(scores, nu, slow.r) + 1e-9


def test_nu_quantile_with_ties():
    scores = [2.0, 2.0, 2.0, 5.0, 7.0]
    sol = nu_quantile(scores, 0.5)
    assert sol.r == 2.0
    assert sol.fraction_below == 0.0
    assert sol.objective_value <= brute_force_r(scores, 0.5).objective_value + 1e-12


def test_nu_quantile_single_score():
    sol = nu_quantile([4.2], 0.5)
    assert sol.r == 4.2
    assert sol.fraction_below == 0.0
    assert sol.objective_value == pytest.approx(-4.2)


def test_fraction_below_within_one_over_n():
    rng = np.random.default_rng(7)
    for nu in NU_GRID:
        scores = rng.normal(size=200)
        sol = nu_quantile(scores, nu)
        assert abs(sol.fraction_below - nu) <= 1.0 / 200 + 1e-12


def test_r_objective_is_piecewise_linear():
    scores = [1.0, 4.0]
    nu = 0.5
    # slope between the two scores is 1/(N nu) - 1 = 0
    assert r_objective(scores, nu, 2.0) == pytest.approx(r_objective(scores, nu, 3.5))
    assert math.isclose(r_objective(scores, nu, 0.0), 0.0, abs_tol=1e-15)


@pytest.mark.parametrize("bad_nu", [0.0, 1.0, -0.1, 1.5])
def test_invalid_nu_rejected(bad_nu):
    with pytest.raises(ConfigError):
        nu_quantile([1.0, 2.0], bad_nu)


def test_empty_and_non_finite_scores_rejected():
    with pytest.raises(ConfigError):
        nu_quantile([], 0.1)
    with pytest.raises(ConfigError):
        nu_quantile([1.0, float("nan")], 0.1)
    with pytest.raises(ConfigError):
        r_objective([1.0, float("inf")], 0.1, 0.0)


def test_nu_quantile_median_of_one_to_nine():
    sol = nu_quantile(range(1, 10), 0.5)
    assert sol.r == 5.0
    assert sol.objective_value == pytest.approx(-2.7778, abs=1e-4)


def test_nu_quantile_constant_scores():
    assert nu_quantile([5.0, 5.0, 5.0, 5.0], 0.3).r == 5.0


def test_nu_quantile_translation_and_permutation():
    rng = np.random.default_rng(11)
    for nu in (0.1, 0.33, 0.5, 0.9):
        scores = rng.normal(size=57)
        base = nu_quantile(scores, nu).r
        assert nu_quantile(scores + 3.5, nu).r == pytest.approx(base + 3.5, abs=1e-12)
        assert nu_quantile(rng.permutation(scores), nu).r == base


def test_nu_quantile_is_stationary():
    # below(r) <= nu N <= at_or_below(r): neither neighbouring slope of f points downhill
    rng = np.random.default_rng(12)
    for _ in range(200):
        n = int(rng.integers(1, 80))
        scores = np.round(rng.normal(size=n), 1)
        nu = float(rng.choice(NU_GRID))
        r = nu_quantile(scores, nu).r
        assert np.sum(scores < r) <= nu * n + 1e-9
        assert np.sum(scores <= r) >= nu * n - 1e-9
