from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtgl.connectivity import (
    ConnectionTable,
    p_conn_bounds,
    p_conn_brute,
    p_conn_exact,
    working_precision,
)
from mtgl.errors import ClampedEdgeWarning, PreconditionViolated, StateSpaceTooLarge, TooLarge
from mtgl.trees import tau_log
from mtgl.typevec import compositions

from conftest import kernels, random_kernel


def test_single_edge():
    assert p_conn_exact((2,), 10, [[3.0]]).value == pytest.approx(0.3, abs=1e-15)
    assert p_conn_brute((1, 1), 8, [[1.0, 4.0], [4.0, 1.0]]).value == pytest.approx(0.5)


def test_triangle_single_type():
    p = 0.1
    expected = 3 * p * p * (1 - p) + p**3
    assert expected == pytest.approx(0.028)
    assert p_conn_exact((3,), 10, [[1.0]]).value == pytest.approx(expected, abs=1e-15)
    assert p_conn_brute((3,), 10, [[1.0]]).value == pytest.approx(expected, abs=1e-15)


def test_four_vertex_polynomial():
    p = 0.15
    poly = 16 * p**3 - 33 * p**4 + 24 * p**5 - 6 * p**6
    assert p_conn_brute((4,), 20, [[3.0]]).value == pytest.approx(poly, abs=1e-15)
    assert p_conn_exact((4,), 20, [[3.0]]).value == pytest.approx(poly, abs=1e-14)


def test_unit_vector_is_connected():
    assert p_conn_exact((0, 1), 5, np.ones((2, 2))).value == 1.0
    assert p_conn_brute((1,), 5, [[1.0]]).value == 1.0


def test_mixed_example_against_brute(rng):
    K = random_kernel(rng, 2)
    assert p_conn_exact((2, 1), 20, K).value == pytest.approx(p_conn_brute((2, 1), 20, K).value, abs=1e-12)


def test_oracle_equivalence_randomized(rng):
    for _ in range(200):
        d = int(rng.integers(1, 4))
        K = random_kernel(rng, d, 0.1, 5.0)
        n = int(rng.integers(6, 60))
        m = int(rng.integers(1, 7))
        k = tuple(int(x) for x in rng.multinomial(m, np.ones(d) / d))
        ex = p_conn_exact(k, n, K).value
        br = p_conn_brute(k, n, K).value
        assert ex == pytest.approx(br, abs=1e-12)
        assert 0.0 <= ex <= 1.0


def test_size_limits():
    with pytest.raises(TooLarge):
        p_conn_brute((7,), 10, [[1.0]])
    with pytest.raises(StateSpaceTooLarge):
        p_conn_exact((200, 200, 300), 10**6, np.ones((3, 3)))


def test_clamping_warns():
    with pytest.warns(ClampedEdgeWarning):
        v = p_conn_exact((3,), 2, [[5.0]]).value
    assert v == pytest.approx(1.0)


@given(kernels(max_d=3), st.integers(8, 400), st.data())
@settings(max_examples=60, deadline=None)
def test_sandwich(K, n, data):
    d = K.shape[0]
    k = data.draw(st.lists(st.integers(0, 3), min_size=d, max_size=d).filter(lambda v: 1 <= sum(v) <= 6))
    b = p_conn_bounds(k, n, K)
    p = p_conn_brute(k, n, K).value
    assert b.est_lower <= p * (1 + 1e-12)
    assert p <= b.est_upper * (1 + 1e-12)


def test_bounds_unit_and_example():
    b = p_conn_bounds((1,), 10, [[1.0]])
    assert b.est_upper == pytest.approx(1.0)
    # the |k|^2/2 exponent is kept as written, so the lower end is 0.9^(1/2) here
    assert b.est_lower == pytest.approx(math.sqrt(0.9)) and b.est_lower <= 1.0
    b = p_conn_bounds((3,), 10, [[1.0]])
    assert b.est_upper == pytest.approx(0.03)
    assert b.est_upper >= 0.028


def test_anchor_independence(rng):
    K = random_kernel(rng, 3)
    k = (2, 3, 1)
    vals = [ConnectionTable(K, 30, k, anchor=r).value(k) for r in range(3)]
    assert vals[0] == pytest.approx(vals[1], abs=1e-14)
    assert vals[0] == pytest.approx(vals[2], abs=1e-14)


def test_asymptotic_ratio_trend(rng):
    K = random_kernel(rng, 2)
    for k in [(2, 1), (3, 2), (1, 4)]:
        size = sum(k)
        gaps = []
        for n in (10**2, 10**3, 10**4):
            r = p_conn_exact(k, n, K)
            ratio = math.exp(r.log_value + (size - 1) * math.log(n) - tau_log(k, K))
            gaps.append(abs(ratio - 1))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 5 * size**2 / 10**4


def test_high_precision_matches_float_when_both_apply():
    K = np.array([[1.2, 0.7], [0.7, 2.1]])
    lo = p_conn_exact((4, 3), 200, K, dps=None)
    hi = p_conn_exact((4, 3), 200, K, dps=60)
    assert lo.value == pytest.approx(hi.value, rel=1e-9)


def test_large_component_uses_extended_precision():
    dps = working_precision((60,), 1000, [[2.0]])
    assert dps is not None and dps > 30
    r = p_conn_exact((60,), 1000, [[2.0]])
    b = p_conn_bounds((60,), 1000, [[2.0]])
    assert b.est_lower <= r.value <= b.est_upper


def test_esti2p_shape_trend():
    K = np.array([[1.5, 0.5], [0.5, 2.0]])
    y = np.array([0.3, 0.2])
    for n in (40, 80):
        k = tuple(int(v) for v in np.floor(y * n))
        p = p_conn_exact(k, n, K).value
        b = p_conn_bounds(k, n, K)
        assert p / b.esti2p_upper <= 1 + 10 / n


def test_binom_upper(rng):
    K = random_kernel(rng, 2)
    n = 30
    k = (2, 1)
    for m in [(2, 1), (3, 2), (5, 4)]:
        b = p_conn_bounds(k, n, K, r=0, m=m)
        assert p_conn_exact(k, n, K).value <= b.binom_upper * (1 + 1e-12)
    with pytest.raises(PreconditionViolated):
        p_conn_bounds(k, n, K, r=0, m=(1, 1))
    with pytest.raises(PreconditionViolated):
        p_conn_bounds((0, 2), n, K, r=0)


def test_exact_covers_composition_shell(rng):
    K = random_kernel(rng, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for k in compositions(5, 2):
            assert p_conn_exact(k, 50, K).value == pytest.approx(p_conn_brute(k, 50, K).value, abs=1e-12)
