import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gp_extremes import limitlab, records
from gp_extremes.kernels import CovarianceModel, KernelProfile
from gp_extremes.sampling import CholeskySampler, LatticeGrid, make_sampler
from gp_extremes.stats import ks_gumbel, ks_normal, mean_estimate

from oracles import alpha_slack_exact, iid_expected_max, pair_joint_zero, pair_mean_max

IID = CovarianceModel(KernelProfile("iid-delta"))
LOGP = CovarianceModel(KernelProfile("log-power", a=0.5))


def test_alpha_table():
    t = np.arange(1, 1001) / 1000
    table = limitlab.alpha_inequality_table(t)
    assert table["exact_all_nonnegative"]
    assert table["exact_min_slack"] == 0 and table["argmin"] == 1.0
    assert float(limitlab.alpha_slack(0.5)) == pytest.approx(1 / 12, abs=1e-15)
    assert alpha_slack_exact(0.5) == Fraction(1, 12)
    assert float(limitlab.alpha_slack(0.0)) == 0.5
    assert float(limitlab.alpha_slack(1e-9)) == pytest.approx(0.5, abs=1e-8)
    for q in t[::37]:
        assert float(limitlab.alpha_slack(q)) == pytest.approx(float(alpha_slack_exact(q)), abs=1e-14)
    with pytest.raises(ValueError):
        limitlab.alpha_inequality_table([0.0, 0.5])


def test_bivariate_hypercontractivity_closed_form():
    left, right = limitlab.hypercontractivity_bivariate(0.5)
    assert left == pytest.approx(1 / 3, abs=1e-15)
    assert left == pytest.approx(pair_joint_zero(0.5))
    assert right == pytest.approx(0.5 ** 1.25)
    for t in np.linspace(0, 1, 1001):
        l, r = limitlab.hypercontractivity_bivariate(float(t))
        assert l <= r + 1e-15
    assert limitlab.hypercontractivity_bivariate(1.0) == pytest.approx((0.5, 0.5))


def test_hypercontractivity_probe_trivial_cases():
    grid = LatticeGrid.from_points(32)
    s = make_sampler(IID, grid, 3)
    rows = limitlab.hypercontractivity_probe(s, grid, 64, [1.0], 2000)  # one cell = whole grid
    assert len(rows) == 1
    assert rows[0].left == 1.0 and rows[0].right == 1.0 and not rows[0].violation
    rows = limitlab.hypercontractivity_probe(s, grid, 4, [0.0], 20000)
    for r in rows:
        # t = 0: independent copies, left side is P[I in S]^2 (within MC error)
        assert abs(r.left - r.p_S ** 2) < 5 * math.sqrt(r.p_S ** 2 / 20000) + 1e-3
        assert not r.violation


def test_hypercontractivity_probe_2d():
    grid = LatticeGrid.from_points(12, d=2)
    s = make_sampler(CovarianceModel(KernelProfile("log-power"), d=2), grid, 4)
    rows = limitlab.hypercontractivity_probe(s, grid, 4, [0.0, 0.5, 0.9], 5000)
    assert len(rows) == 3 * 9
    assert not any(r.violation for r in rows)


def test_window_masses():
    grid = LatticeGrid.from_points(100)
    p = np.full(100, 0.01)
    assert limitlab.window_points(grid, 1e-12) == 100
    np.testing.assert_allclose(limitlab.window_masses(p, grid, 100), [1.0])
    masses = limitlab.window_masses(p, grid, 10)
    np.testing.assert_allclose(masses, 0.1)
    assert masses.size == 19  # starts 0, 5, ..., 90
    g2 = LatticeGrid.from_points(8, d=2)
    q = np.arange(64, dtype=float) / np.arange(64).sum()
    m2 = limitlab.window_masses(q, g2, 4)
    brute = [q.reshape(8, 8)[i:i + 4, j:j + 4].sum() for i in (0, 2, 4) for j in (0, 2, 4)]
    np.testing.assert_allclose(m2, brute)


def test_iid_window_mass_equals_fraction():
    grid = LatticeGrid(1, 2 ** 12, 1.0)
    s = make_sampler(IID, grid, 5, "fft")
    n = 20000
    table = records.simulate(s, np.arange(n))
    p = np.bincount(table.I, minlength=grid.n) / n
    z, frac = limitlab.uniform_window_z(p, n, grid, 0.5)
    assert frac == pytest.approx(65 / 4097)
    assert z <= 5


def test_delocalisation_fit_on_synthetic_points():
    pts = [limitlab.DelocalisationPoint(R, 1, 0.0, 2.0 * R ** -0.3, 1e-4) for R in (2 ** 10, 2 ** 12, 2 ** 14)]
    fit = limitlab.fit_delocalisation(pts)
    assert fit["beta_prime"] == pytest.approx(0.3, abs=1e-6)
    assert fit["excludes_zero"]


def test_expected_max_quadrature():
    for n in (2, 100, 2 ** 16):
        assert limitlab.expected_max_iid(n) == pytest.approx(iid_expected_max(n), rel=1e-8)
    assert limitlab.expected_max_iid(2) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-10)


def test_two_site_experiment():
    res = limitlab.run_limit_experiment(IID, [2], 10 ** 6, 1, eval_replicates=0)
    row = res.rows[0]
    assert abs(row.mean_M - pair_mean_max(0.0)) < 3 * row.se_mean_M
    assert row.growth_ratio == pytest.approx(pair_mean_max(0.0) / math.sqrt(2 * math.log(2)), abs=5e-3)
    # max of two iid normals is not normal: KS of the law Phi(x)^2 after standardising is 0.0094
    assert abs(row.ks_normal - 0.0094) < 0.003
    gamma = limitlab.scaling_constants_study(res)[0]
    assert abs(gamma["gamma"] - 1 / math.sqrt(math.pi)) < 3 * gamma["se"]


def test_iid_growth_matches_quadrature():
    res = limitlab.run_limit_experiment(IID, [2 ** 10], 5000, 2, eval_replicates=0)
    row = res.rows[0]
    assert abs(row.mean_M - iid_expected_max(2 ** 10)) < 5 * row.se_mean_M


def test_small_experiment_fields():
    res = limitlab.run_limit_experiment(LOGP, [64, 128, 256], 1000, 3, eval_replicates=500, coupled_top=True)
    assert [r.per_axis for r in res.rows] == [64, 128, 256]
    for r in res.rows:
        assert r.se_mean_M > 0 and r.se_var_M > 0 and r.se_ratio > 0 and r.deloc_se > 0
        assert 0 < r.ratio < 1.2
    assert res.eval_table is not None and res.eval_table.I_t is not None and len(res.eval_table) == 500
    js = res.to_json()
    assert js["seed"] == 3 and len(js["rows"]) == 3
    g = limitlab.growth_check(res)
    assert len(g["ratios"]) == 3
    with pytest.raises(ValueError):
        limitlab.run_limit_experiment(LOGP, [64, 64], 1000, 3)


def test_translation_of_deformed_window():
    model = CovarianceModel(KernelProfile("log-power"), deformation="sine")
    pts = np.arange(200.0)
    means = []
    for k, shift in enumerate((0.0, 1000.3)):
        x = pts + shift
        k_mat = model.eval_cov(x[:, None, None], x[None, :, None])
        s = CholeskySampler(k_mat, 20 + k)
        means.append(mean_estimate(records.simulate(s, np.arange(20000)).M))
    a, b = means
    assert abs(a.value - b.value) < 3 * math.hypot(a.se, b.se)


@given(arrays(np.float64, 50, elements=st.floats(-10, 10)), st.floats(0.1, 10), st.floats(-10, 10))
def test_ks_affine_invariance(x, scale, shift):
    if np.ptp(x) < 1e-3:
        return
    assert ks_normal(scale * x + shift) == pytest.approx(ks_normal(x), abs=1e-9)


def test_stage_seeds():
    assert limitlab.stage_seed(1, 0, 5) == limitlab.stage_seed(1, 0, 5)
    assert len({limitlab.stage_seed(1, 0, k) for k in range(100)}) == 100
    assert limitlab.stage_seed(1, 0, 5) != limitlab.stage_seed(2, 0, 5)


def test_gumbel_ks_prefers_gumbel_sample():
    rng = np.random.default_rng(0)
    g = rng.gumbel(size=20000)
    assert ks_gumbel(g) < ks_normal(g)
    z = rng.standard_normal(20000)
    assert ks_normal(z) < ks_gumbel(z)
