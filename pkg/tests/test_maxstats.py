import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gp_extremes import backend
from gp_extremes.maxstats import (BETA_LADDER, MaxRecord, argmax_max, argmax_rows, beta_ladder,
                                  estimate_argmax_distribution, softmax_gradient, softmax_value)

vectors = arrays(np.float64, st.integers(1, 30), elements=st.floats(-50, 50))


def test_argmax_examples():
    assert argmax_max(np.array([0.1, 0.9, 0.3])) == MaxRecord(0.9, 1, False)
    assert argmax_max(np.array([0.5, 0.5])) == MaxRecord(0.5, 0, True)
    assert argmax_max(np.array([-2.0])) == MaxRecord(-2.0, 0, False)


def test_argmax_rows_backends_agree():
    rng = np.random.default_rng(0)
    x = np.round(rng.standard_normal((500, 40)), 1)  # rounding forces ties
    results = [impl.argmax_rows(np.ascontiguousarray(x)) for impl in backend.IMPLEMENTATIONS.values()]
    for m, i, tie in results:
        np.testing.assert_array_equal(m, x.max(axis=1))
        np.testing.assert_array_equal(i, x.argmax(axis=1))
        np.testing.assert_array_equal(tie, (x == x.max(axis=1, keepdims=True)).sum(axis=1) > 1)


def test_softmax_examples():
    assert softmax_value(np.zeros(2), 1.0) == pytest.approx(math.log(2), rel=1e-15)
    assert softmax_value(np.array([5.0, -100.0]), 10.0) == pytest.approx(5.0, abs=1e-9)
    np.testing.assert_allclose(softmax_gradient(np.zeros(2), 1.0), [0.5, 0.5])
    g = softmax_gradient(np.array([1.0, 0.0]), 1e4)
    assert g[0] == pytest.approx(1.0) and g[1] < 1e-300
    with pytest.raises(ValueError):
        softmax_value(np.zeros(2), 0.0)


def test_softmax_no_overflow():
    assert softmax_value(np.array([1e300, 0.0]), 1e6) == 1e300


@given(vectors, st.sampled_from(BETA_LADDER + (1e6,)))
def test_sandwich(x, beta):
    f = softmax_value(x, beta)
    assert x.max() <= f <= x.max() + math.log(x.size) / beta


@given(vectors, st.floats(0.1, 20), st.floats(-100, 100))
def test_translation(x, beta, c):
    assert softmax_value(x + c, beta) == pytest.approx(softmax_value(x, beta) + c, abs=1e-9)
    np.testing.assert_allclose(softmax_gradient(x + c, beta), softmax_gradient(x, beta), atol=1e-12)


@given(vectors, st.floats(0.1, 20))
def test_gradient_is_probability(x, beta):
    g = softmax_gradient(x, beta)
    assert np.all((g >= 0) & (g <= 1))
    assert abs(g.sum() - 1) < 1e-12


@given(vectors)
def test_argmax_monotone_invariance(x):
    assert argmax_max(np.exp(x / 10)).I == argmax_max(x).I
    assert argmax_max(x ** 3).I == argmax_max(x).I


def test_gradient_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(20):
        v = rng.standard_normal(10)
        for beta in (1.0, 4.0):
            g = softmax_gradient(v, beta)
            for i in range(v.size):
                e = np.zeros(10)
                e[i] = 1e-5
                fd = (softmax_value(v + e, beta) - softmax_value(v - e, beta)) / 2e-5
                assert abs(fd - g[i]) < 1e-6


def test_argmax_distribution():
    d = estimate_argmax_distribution([MaxRecord(1.0, 0), MaxRecord(2.0, 1)], 2)
    np.testing.assert_array_equal(d.p, [0.5, 0.5])
    assert d.sample_count == 2
    assert estimate_argmax_distribution(np.array([3, 3, 1]), 4).mass([1, 3]) == 1.0
    assert beta_ladder(2.0) == (0.5, 2.0, 8.0, 32.0, 128.0)
