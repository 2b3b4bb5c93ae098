import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gp_extremes import records
from gp_extremes.sampling import CholeskySampler
from gp_extremes.stats import (merge_indistinguishable, trend_increasing, variance_estimate, weighted_slope,
                               wilson_interval)


def sampler():
    return CholeskySampler(np.array([[1, 0.4, 0.1], [0.4, 1, 0.4], [0.1, 0.4, 1]]), 77)


def test_csv_roundtrip(tmp_path):
    s = sampler()
    table = records.simulate(s, np.arange(3000), coeffs=np.array([0.3, 0.4, 0.3]), coupled=True, stratified=True)
    path = tmp_path / "r.csv"
    records.write_csv(table, path)
    assert path.read_text().splitlines()[0] == "replicate_id,t,M,I,M_t,I_t,Q1"
    back = records.read_csv(path)
    for col in ("replicate_id", "t", "M", "I", "M_t", "I_t", "Q1"):
        np.testing.assert_array_equal(getattr(back, col), getattr(table, col))
    a = records.replicate_statistics(table, s.cov_entries)
    b = records.replicate_statistics(back, s.cov_entries)
    for k in a:
        assert b[k] == pytest.approx(a[k], rel=1e-12)


def test_csv_missing_columns(tmp_path):
    table = records.simulate(sampler(), np.arange(10))
    path = tmp_path / "r.csv"
    records.write_csv(table, path)
    assert path.read_text().splitlines()[1].endswith(",,,")
    back = records.read_csv(path)
    assert back.t is None and back.Q1 is None


def test_stratified_times():
    t = records.stratified_times(np.full(32, 0.5), np.arange(32))
    np.testing.assert_allclose(t[:16], (np.arange(16) + 0.5) / 16)


def test_simulate_independent_of_chunking():
    s = sampler()
    a = records.simulate(s, np.arange(5000), workers=1)
    b = records.simulate(s, np.arange(5000), workers=3)
    np.testing.assert_array_equal(a.M, b.M)
    c = records.simulate(s, np.arange(4000, 5000))
    np.testing.assert_array_equal(a.M[4000:], c.M)


def test_records_view():
    table = records.simulate(sampler(), np.arange(3), t=0.5)
    recs = list(table.records())
    assert recs[1].replicate_id == 1 and recs[1].t == 0.5 and recs[1].Q1 is None


def test_wilson():
    lo, hi = wilson_interval(np.array([0, 50, 100]), 100, 0.99)
    assert lo[0] == 0 and hi[2] == 1
    assert lo[1] < 0.5 < hi[1]
    # 50/100 at 99%: centre 1/2, half-width z*sqrt(1/400 + z^2/40000)/(1 + z^2/100)
    z = 2.5758293035489
    half = z * math.sqrt(1 / 400 + z * z / 40000) / (1 + z * z / 100)
    assert lo[1] == pytest.approx(0.5 - half, abs=1e-9)


def test_trend_rule():
    assert trend_increasing([1.0, 2.0, 3.0], [0.1, 0.1, 0.1])
    assert not trend_increasing([1.0, 2.0], [0.1, 0.1])
    assert not trend_increasing([1.0, 1.01, 1.02], [0.1, 0.1, 0.1])  # one merged group
    assert not trend_increasing([3.0, 2.0, 1.0], [0.1, 0.1, 0.1])
    groups = merge_indistinguishable([1.0, 1.1, 3.0], [0.1, 0.1, 0.1])
    assert len(groups) == 2 and groups[0][2] == [0, 1]
    assert groups[0][0] == pytest.approx(1.05)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=10))
def test_trend_needs_increasing_groups(values):
    if trend_increasing(values, [1e-3] * len(values)):
        groups = merge_indistinguishable(values, [1e-3] * len(values))
        assert groups[-1][0] > groups[0][0]


def test_weighted_slope_and_variance():
    x = np.arange(5.0)
    slope, se, icpt = weighted_slope(x, 2 * x + 1, np.full(5, 0.1))
    assert slope == pytest.approx(2) and icpt == pytest.approx(1)
    rng = np.random.default_rng(0)
    v = variance_estimate(rng.standard_normal(100000))
    assert abs(v.value - 1) < 3 * v.se and v.se == pytest.approx(math.sqrt(2 / 100000), rel=0.05)
