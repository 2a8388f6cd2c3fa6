from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from mtgl.errors import (
    CountMismatch,
    DimensionTooLarge,
    InvalidModel,
    MeasureNotNormalized,
    NearCriticalWarning,
    NonPositiveEntry,
    NonSymmetricKernel,
)
from mtgl.model import (
    CriticalityReport,
    DualSolution,
    ModelSpec,
    criticality,
    integerize,
    kappa_sup,
    make_model,
    moment_condition,
    perron_root,
    sigma,
    solve_dual,
    validate_model,
)

from conftest import kernels, random_kernel, random_measure, supercritical_models


def _problems(spec):
    with pytest.raises(InvalidModel) as info:
        validate_model(spec)
    return [type(p) for p in info.value.problems]


def test_validate_single_type():
    m = validate_model(ModelSpec(("a",), np.array([[2.0]]), np.array([1.0]), 100))
    assert m.counts == (100,)


def test_validate_rejects_asymmetric():
    spec = ModelSpec(("a", "b"), np.array([[1.0, 2.0], [3.0, 1.0]]), np.array([0.5, 0.5]), 10)
    assert NonSymmetricKernel in _problems(spec)


def test_validate_rejects_unnormalized_measure():
    spec = ModelSpec(("a", "b"), np.ones((2, 2)), np.array([0.5, 0.49]), 10)
    assert MeasureNotNormalized in _problems(spec)


def test_validate_collects_every_problem():
    spec = ModelSpec(("a", "b"), np.array([[1.0, -2.0], [3.0, 1.0]]), np.array([0.5, 0.49]), 10)
    found = _problems(spec)
    assert {NonSymmetricKernel, NonPositiveEntry, MeasureNotNormalized} <= set(found)


def test_validate_rejects_bad_counts():
    spec = ModelSpec(("a", "b"), np.ones((2, 2)), np.array([0.5, 0.5]), 10, counts=(4, 5))
    assert CountMismatch in _problems(spec)


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5), st.integers(1, 10_000))
def test_integerize_sums_to_n_and_is_close(weights, n):
    mu = np.array(weights) / sum(weights)
    counts = integerize(mu, n)
    assert sum(counts) == n
    assert all(abs(c - m * n) < 1 for c, m in zip(counts, mu))


def test_sigma_examples():
    assert sigma(make_model([[2.0]], [1.0], 10)) == pytest.approx(2.0, rel=1e-12)
    assert sigma(make_model([[1.0, 3.0], [3.0, 1.0]], [0.5, 0.5], 10)) == pytest.approx(2.0, rel=1e-12)


def test_sigma_matches_dense_eigensolver(rng):
    for _ in range(20):
        K = random_kernel(rng, 3)
        mu = random_measure(rng, 3)
        oracle = max(np.linalg.eigvals(K @ np.diag(mu)).real)
        assert perron_root(K, mu) == pytest.approx(oracle, rel=1e-10)


@given(kernels(max_d=4))
@settings(max_examples=30, deadline=None)
def test_sigma_permutation_invariant(K):
    d = K.shape[0]
    mu = np.arange(1, d + 1, dtype=float)
    mu /= mu.sum()
    perm = np.random.default_rng(d).permutation(d)
    assert perron_root(K, mu) == pytest.approx(perron_root(K[np.ix_(perm, perm)], mu[perm]), rel=1e-9)


def test_criticality_regimes():
    assert criticality(make_model([[2.0]], [1.0], 10)).regime == "supercritical"
    assert criticality(make_model([[0.5]], [1.0], 10)).regime == "subcritical"
    assert criticality(make_model([[1.0 + 1e-8]], [1.0], 10)).regime == "near-critical"


def test_criticality_report_round_trip():
    rep = criticality(make_model([[1.0, 3.0], [3.0, 1.0]], [0.5, 0.5], 10))
    assert CriticalityReport.from_dict(rep.to_dict()) == rep


def test_dual_subcritical_is_trivial():
    sol = solve_dual([[0.5]], [1.0])
    assert sol.is_trivial
    assert sol.c == pytest.approx([1.0])


def test_dual_single_type_matches_bisection():
    oracle = brentq(lambda c: c * math.exp(-2 * c) - math.exp(-2), 1e-9, 0.5)
    sol = solve_dual([[2.0]], [1.0])
    assert sol.c[0] == pytest.approx(oracle, abs=1e-12)
    assert sol.c[0] == pytest.approx(0.20319, abs=1e-5)
    assert not sol.is_trivial


def test_dual_two_type_symmetric_reduces_to_scalar():
    # c0 = c1 by symmetry, so 2 c e^{-4 c} = e^{-2} with the per-type measure 1/2
    oracle = brentq(lambda c: c * math.exp(-4 * c) - 0.5 * math.exp(-2), 1e-9, 0.2)
    sol = solve_dual([[1.0, 3.0], [3.0, 1.0]], [0.5, 0.5])
    assert sol.c == pytest.approx([oracle, oracle], abs=1e-12)
    assert oracle == pytest.approx(0.101594, abs=1e-6)


@given(supercritical_models())
@settings(max_examples=40, deadline=None)
def test_dual_properties_supercritical(model):
    kappa, mu = model
    sol = solve_dual(kappa, mu)
    assert np.all(sol.c > 0) and np.all(sol.c < mu)
    assert sol.residual <= 1e-12
    assert perron_root(kappa, sol.c) < 1


def test_dual_iteration_is_monotone():
    kappa, mu = np.array([[1.0, 3.0], [3.0, 2.0]]), np.array([0.3, 0.7])
    c = np.zeros(2)
    for _ in range(200):
        nxt = mu * np.exp(-kappa @ (mu - c))
        assert np.all(nxt >= c - 1e-15)
        c = nxt
    assert c == pytest.approx(solve_dual(kappa, mu).c, abs=1e-12)


def test_dual_near_critical_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        solve_dual([[1.0 + 1e-7]], [1.0], tol=1e-6)
    assert any(issubclass(w.category, NearCriticalWarning) for w in caught)


def test_dual_solution_round_trip():
    sol = solve_dual([[2.0]], [1.0])
    back = DualSolution.from_dict(sol.to_dict())
    assert np.array_equal(back.c, sol.c) and back.iterations == sol.iterations


def test_kappa_sup_examples():
    assert kappa_sup([[2.0]]) == 2.0
    val, nu = kappa_sup([[1.0, 3.0], [3.0, 1.0]], return_argmax=True)
    assert val == pytest.approx(2.0, abs=1e-12)
    assert nu == pytest.approx([0.5, 0.5], abs=1e-9)
    val, nu = kappa_sup([[4.0, 1.0], [1.0, 1.0]], return_argmax=True)
    assert val == pytest.approx(4.0) and nu == pytest.approx([1.0, 0.0])


def _scalar_oracle(K, grid=200_001):
    t = np.linspace(0, 1, grid)
    vals = K[0, 0] * t**2 + 2 * K[0, 1] * t * (1 - t) + K[1, 1] * (1 - t) ** 2
    return vals.max()


@given(kernels(max_d=2).filter(lambda K: K.shape[0] == 2))
@settings(max_examples=40, deadline=None)
def test_kappa_sup_two_types_matches_dense_scan(K):
    assert kappa_sup(K) == pytest.approx(_scalar_oracle(K), abs=1e-8)


def test_kappa_sup_three_types_at_least_grid_value(rng):
    K = random_kernel(rng, 3)
    val = kappa_sup(K)
    x = rng.dirichlet(np.ones(3), size=5000)
    assert val >= np.einsum("ij,jk,ik->i", x, K, x).max() - 1e-12


def test_kappa_sup_dimension_limit():
    with pytest.raises(DimensionTooLarge):
        kappa_sup(np.ones((7, 7)))


@pytest.mark.parametrize("k, expected_ok, expected_margin", [
    (2.0, False, 2 - math.log(2) - 1 - 1),
    (6.0, True, 6 - math.log(6) - 3 - 1),
    (0.5, False, 0.5 - math.log(0.5) - 0.25 - 1),
])
def test_moment_condition_examples(k, expected_ok, expected_margin):
    ok, margin = moment_condition(k, k)
    assert ok is expected_ok
    assert margin == pytest.approx(expected_margin, abs=1e-12)
