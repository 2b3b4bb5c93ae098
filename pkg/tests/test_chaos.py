import math

import numpy as np
import pytest

from gp_extremes import chaos, records
from gp_extremes.chaos import ChaosCoefficients
from gp_extremes.errors import DomainError
from gp_extremes.kernels import CovarianceModel, KernelProfile
from gp_extremes.sampling import CholeskySampler, LatticeGrid, make_sampler
from gp_extremes.stats import mean_estimate

from oracles import pair_joint_zero, pair_mean_max, pair_same_argmax, pair_var_max, pair_var_q1


def pair(rho, seed=1):
    return CholeskySampler(np.array([[1.0, rho], [rho, 1.0]]), seed)


def test_q1_basics():
    x = np.array([[2.0, 4.0]])
    assert chaos.q1_value(x[0], ChaosCoefficients(np.array([0.5, 0.5]), "argmax-counts"))[()] == 3.0
    assert chaos.var_q1_formula(np.full(4, 0.25), np.eye(4)) == pytest.approx(0.25)
    assert chaos.var_q1_formula(np.array([0.5, 0.5]), np.array([[1, 0.5], [0.5, 1]])) == pytest.approx(0.75)
    assert chaos.var_q1_formula(np.array([1.0]), np.eye(1)) == 1.0


def test_var_q1_bounded_by_top_eigenvalue():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.standard_normal((6, 6))
        k = a @ a.T
        p = rng.dirichlet(np.ones(6))
        assert chaos.var_q1_formula(p, k) <= np.linalg.eigvalsh(k).max() + 1e-12


def test_var_q1_matrix_sampler_matvec_agree():
    grid = LatticeGrid.from_points(40)
    model = CovarianceModel(KernelProfile("log-power"))
    chol = make_sampler(model, grid, 1, "cholesky")
    fft = make_sampler(model, grid, 1, "fft")
    p = np.random.default_rng(0).dirichlet(np.ones(40))
    a = chaos.var_q1_formula(p, chol.matrix)
    assert chaos.var_q1_formula(p, fft) == pytest.approx(a, rel=1e-12)
    assert chaos.var_q1_formula(p, chol) == pytest.approx(a, rel=1e-12)


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.9])
def test_bivariate_routes(rho):
    s = pair(rho, seed=int(rho * 10) + 2)
    rep = chaos.variance_report(s, 100000, coeff_replicates=100000)
    assert abs(rep.var_m_direct - pair_var_max(rho)) < 3 * rep.se_var_m_direct
    assert abs(rep.var_m_chatterjee - pair_var_max(rho)) < 3 * rep.se_var_m_chatterjee
    assert abs(rep.var_q1_formula - pair_var_q1(rho)) < 3 * rep.se_var_q1_formula
    assert abs(rep.var_q1_sample - pair_var_q1(rho)) < 3 * rep.se_var_q1_sample
    assert abs(rep.var_m_reconstructed - pair_var_max(rho)) < 3 * rep.se_var_m_reconstructed
    assert rep.var_q1_formula <= rep.var_m_direct + 3 * math.hypot(rep.se_var_q1_formula, rep.se_var_m_direct)
    m = mean_estimate(records.simulate(s, np.arange(100000)).M)
    assert abs(m.value - pair_mean_max(rho)) < 3 * m.se
    js = rep.to_json()
    assert {"var_m_direct", "var_m_chatterjee", "var_q1_formula", "var_q1_sample", "ratio", "se_ratio"} <= set(js)


def test_single_site():
    s = CholeskySampler(np.eye(1), 1)
    assert chaos.chatterjee_variance(s, 200).value == 1.0
    coeffs, _ = chaos.argmax_coefficients(s, 100)
    rep = chaos.projection_residual_check(s, coeffs, 200, 100, centre=0.0)
    assert np.all(rep.cov == 0)


def test_chatterjee_t_profile():
    s = pair(0.0, seed=5)
    for k, t in enumerate((0.2, 0.5, 0.8)):
        same, _ = chaos.coupled_argmax_agreement(s, t, 50000, offset=k * 50000)
        assert abs(same.value - pair_same_argmax(t)) < 3 * same.se
        assert pair_same_argmax(t) == pytest.approx(0.5 + math.asin(t) / math.pi)
    table = records.simulate(s, np.arange(50000), t=0.5)
    both0 = np.mean((table.I == 0) & (table.I_t == 0))
    assert abs(both0 - pair_joint_zero(0.5)) < 3 * math.sqrt(pair_joint_zero(0.5) * (1 - pair_joint_zero(0.5)) / 50000)


def test_stratified_chatterjee():
    s = pair(0.0, seed=6)
    plain = chaos.chatterjee_variance(s, 40000)
    strat = chaos.chatterjee_variance(s, 40000, offset=40000, stratified=True)
    exact = 1 - 1 / math.pi
    assert abs(plain.value - exact) < 3 * plain.se
    assert abs(strat.value - exact) < 3 * strat.se
    assert strat.se < plain.se
    with pytest.raises(DomainError):
        chaos.chatterjee_variance(s, 20, stratified=True)


def test_projection_residual_iid_pair():
    s = pair(0.0, seed=7)
    rep = chaos.projection_residual_check(s, np.array([0.5, 0.5]), 100000, 0)
    assert rep.max_z() < 3


def test_projection_residual_random_matrix():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((5, 7))
    k = a @ a.T
    d = np.sqrt(np.diag(k))
    k = k / np.outer(d, d)
    np.fill_diagonal(k, 1.0)
    s = CholeskySampler(k, 9)
    coeffs, table = chaos.argmax_coefficients(s, 100000, 0)
    rep = chaos.projection_residual_check(s, coeffs, 100000, 100000, centre=table.M.mean())
    assert rep.max_z() < 3
    # the sample variance of Q1 agrees with the quadratic form
    q = records.simulate(s, np.arange(200000, 300000), coeffs=coeffs).Q1
    from gp_extremes.stats import variance_estimate
    v = variance_estimate(q)
    assert abs(v.value - chaos.var_q1_formula(coeffs, k)) < 5 * v.se


def test_softmax_coefficients_converge():
    s = CholeskySampler(np.eye(16), 10)
    counts, _ = chaos.argmax_coefficients(s, 100000)
    dists = []
    for beta in (1.0, 16.0, 256.0):
        soft = chaos.q1_coefficients_softmax(s, beta, 100000)
        assert abs(soft.p.sum() - 1) < 1e-12
        dists.append(np.abs(soft.p - counts.p).sum())
    assert dists[0] > dists[1] > dists[2]
    assert dists[2] < 0.01
    pair_soft = chaos.q1_coefficients_softmax(pair(0.0), 4.0, 20000)
    assert abs(pair_soft.p[0] - 0.5) < 5 * math.sqrt(0.25 / 20000)
    with pytest.raises(DomainError):
        chaos.q1_coefficients_softmax(s, 0.0, 10)


def test_standardized_gap():
    assert chaos.standardized_l2_gap(2.0, 2.0) == 0.0
    assert chaos.standardized_l2_gap(4.0, 1.0) == 1.0
    for bad in ((1.0, 2.0), (0.0, 0.0), (1.0, -1.0)):
        with pytest.raises(DomainError):
            chaos.standardized_l2_gap(*bad)
    rng = np.random.default_rng(11)
    y = rng.standard_normal(200000)
    x = y + math.sqrt(3) * rng.standard_normal(200000)
    est = chaos.empirical_standardized_gap(x, y)
    assert abs(est.value - 1.0) < 3 * est.se


def test_residual_ratio_on_linear_model():
    # M = Q + W with W independent: the ratio is Var Q / (Var Q + Var W) = 0.8
    rng = np.random.default_rng(12)
    q = 2 * rng.standard_normal(100000)
    m = q + rng.standard_normal(100000)
    est = chaos.residual_ratio(m, q)
    assert abs(est.value - 0.8) < 3 * est.se
