"""Identity and inequality suites run by the ``verify`` scenario.

Every check is seeded from the master seed and compares an estimate with
a closed form or an exact inequality; Monte Carlo checks use a 3-SE band
(5 SE where stated).  Budgets scale with ``replicates``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import chaos, diagnostics, limitlab, maxstats, records
from ..kernels import CovarianceModel, KernelProfile
from ..sampling import CholeskySampler, LatticeGrid, make_sampler
from ..stats import ks_normal, mean_estimate


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)


def _pair(rho):
    return np.array([[1.0, rho], [rho, 1.0]])


def bivariate_suite(seed, n):
    out = []
    for k, rho in enumerate((0.0, 0.5, 0.9)):
        sampler = CholeskySampler(_pair(rho), limitlab.stage_seed(seed, 10, k))
        rep = chaos.variance_report(sampler, n, coeff_replicates=n, stratified=True)
        mean_m = float(np.sqrt((1 - rho) / np.pi))
        var_m = 1 - (1 - rho) / np.pi
        table = records.simulate(sampler, np.arange(n))
        m_est = mean_estimate(table.M)
        z_mean = abs(m_est.value - mean_m) / m_est.se
        z_var = abs(rep.var_m_direct - var_m) / rep.se_var_m_direct
        z_q = abs(rep.var_q1_formula - rep.var_q1_sample) / math.hypot(rep.se_var_q1_formula, rep.se_var_q1_sample)
        z_q_exact = abs(rep.var_q1_formula - (1 + rho) / 2) / max(rep.se_var_q1_formula, 1e-300)
        z_ch = abs(rep.var_m_chatterjee - rep.var_m_direct) / math.hypot(rep.se_var_m_chatterjee,
                                                                        rep.se_var_m_direct)
        tag = f"rho={rho}"
        out += [
            Check("bivariate", f"mean M {tag}", z_mean <= 3, {"estimate": m_est.value, "exact": mean_m, "z": z_mean}),
            Check("bivariate", f"var M {tag}", z_var <= 3, {"estimate": rep.var_m_direct, "exact": var_m, "z": z_var}),
            Check("bivariate", f"var Q1 formula vs sample {tag}", z_q <= 3,
                  {"formula": rep.var_q1_formula, "sample": rep.var_q1_sample, "z": z_q}),
            Check("bivariate", f"var Q1 formula vs (1+rho)/2 {tag}", z_q_exact <= 3,
                  {"formula": rep.var_q1_formula, "exact": (1 + rho) / 2, "z": z_q_exact}),
            Check("bivariate", f"Chatterjee vs direct {tag}", z_ch <= 3,
                  {"chatterjee": rep.var_m_chatterjee, "direct": rep.var_m_direct, "z": z_ch}),
        ]
    return out


def chatterjee_profile_suite(seed, n, t_grid=(0.1, 0.3, 0.5, 0.7, 0.9)):
    sampler = CholeskySampler(np.eye(2), limitlab.stage_seed(seed, 11))
    out = []
    for k, t in enumerate(t_grid):
        same, _ = chaos.coupled_argmax_agreement(sampler, t, n, offset=k * n)
        exact = 0.5 + math.asin(t) / math.pi
        z = abs(same.value - exact) / same.se
        out.append(Check("chatterjee", f"P[I=I^t] t={t}", z <= 3, {"estimate": same.value, "exact": exact, "z": z}))
    est = chaos.chatterjee_variance(sampler, n, offset=len(t_grid) * n, stratified=True)
    exact = 1 - 1 / math.pi
    z = abs(est.value - exact) / est.se
    out.append(Check("chatterjee", "stratified integral", z <= 3, {"estimate": est.value, "exact": exact, "z": z}))
    return out


def random_unit_covariance(rng, n=5):
    a = rng.standard_normal((n, n + 2))
    c = a @ a.T
    s = np.sqrt(np.diag(c))
    c = c / np.outer(s, s)
    np.fill_diagonal(c, 1.0)
    return c


def orthogonality_suite(seed, n, matrices=3):
    rng = np.random.default_rng(limitlab.stage_seed(seed, 12))
    out = []
    for k in range(matrices):
        sampler = CholeskySampler(random_unit_covariance(rng), limitlab.stage_seed(seed, 12, k))
        coeffs, table = chaos.argmax_coefficients(sampler, n, 0)
        rep = chaos.projection_residual_check(sampler, coeffs, n, n, centre=float(table.M.mean()))
        z = rep.max_z()
        out.append(Check("orthogonality", f"Cov[M-Q1, X] matrix {k}", z <= 3, {"max_z": z}))
    return out


def inequality_suite(seed, vectors=2000):
    rng = np.random.default_rng(limitlab.stage_seed(seed, 13))
    x = rng.standard_normal((vectors, 16)) * rng.uniform(0.1, 5.0, (vectors, 1))
    m = x.max(axis=1)
    ok = True
    for beta in maxstats.BETA_LADDER:
        f = maxstats.softmax_value(x, beta)
        ok &= bool(np.all(m <= f) and np.all(f <= m + math.log(16) / beta))
    table = limitlab.alpha_inequality_table(np.arange(1, 1001) / 1000)
    # gradient vs central finite differences
    v = rng.standard_normal(8)
    worst = 0.0
    for beta in (1.0, 4.0):
        g = maxstats.softmax_gradient(v, beta)
        for i in range(v.size):
            h = 1e-6
            e = np.zeros_like(v)
            e[i] = h
            fd = (maxstats.softmax_value(v + e, beta) - maxstats.softmax_value(v - e, beta)) / (2 * h)
            worst = max(worst, abs(fd - g[i]))
    return [
        Check("inequalities", "soft-max sandwich", ok, {"vectors": vectors}),
        Check("inequalities", "alpha slack", bool(table["exact_all_nonnegative"]),
              {"min_slack": table["min_slack"], "argmin": table["argmin"]}),
        Check("inequalities", "soft-max gradient", worst <= 1e-6, {"max_abs_error": worst}),
    ]


def hypercontractivity_suite(seed, n, t_grid, cell=8):
    out = []
    worst = min(hc[1] - hc[0] for hc in map(limitlab.hypercontractivity_bivariate, np.linspace(0, 1, 101)))
    out.append(Check("hypercontractivity", "bivariate closed form", worst >= 0, {"min_slack": worst}))
    grid = LatticeGrid.from_points(64, 1, 1.0)
    model = CovarianceModel(KernelProfile("iid-delta"), 1)
    sampler = make_sampler(model, grid, limitlab.stage_seed(seed, 14))
    rows = limitlab.hypercontractivity_probe(sampler, grid, cell, t_grid, n)
    bad = sum(r.violation for r in rows)
    out.append(Check("hypercontractivity", "iid cells", bad == 0, {"cells": len(rows), "violations": bad}))
    return out


FLATNESS_EXPECTED = {
    ("log-power", 0.17): "pass",
    ("power-law", 0.05): "fail",
    ("power-law", 0.17): "fail",
    ("power-law", 0.5): "fail",
    ("exponential", 0.17): "fail",
}
REGIME_EXPECTED = {"log-power": "strong", "boundary-log": "boundary", "power-law": "berman",
                   "exponential": "berman", "iid-delta": "berman"}


def diagnostics_suite():
    out = []
    for (family, beta), want in FLATNESS_EXPECTED.items():
        rep = diagnostics.flatness_check(KernelProfile(family), 0.1, beta)
        out.append(Check("diagnostics", f"flatness {family} beta={beta}", rep.verdict == want,
                         {"verdict": rep.verdict, "proxy": rep.proxy}))
    for family, want in REGIME_EXPECTED.items():
        rep = diagnostics.k_logr_divergence(KernelProfile(family))
        out.append(Check("diagnostics", f"k log r regime {family}", rep.regime == want,
                         {"regime": rep.regime, "slope": rep.tail_slope}))
    return out


def limitlab_suite(seed, n):
    out = []
    grid = LatticeGrid.from_points(256, 1, 1.0)
    model = CovarianceModel(KernelProfile("iid-delta"), 1)
    sampler = make_sampler(model, grid, limitlab.stage_seed(seed, 16))
    table = records.simulate(sampler, np.arange(n))
    p = np.bincount(table.I, minlength=grid.n) / n
    z, frac = limitlab.uniform_window_z(p, n, grid, 0.5)
    out.append(Check("limitlab", "iid window mass", z <= 5, {"fraction": frac, "max_z": z}))
    sampler = CholeskySampler(np.eye(2), limitlab.stage_seed(seed, 15))
    m = records.simulate(sampler, np.arange(n)).M
    k1, k2 = ks_normal(m), ks_normal(3.0 * m - 2.0)
    out.append(Check("limitlab", "KS affine invariance", abs(k1 - k2) <= 1e-12, {"ks": k1, "ks_affine": k2}))
    return out


def run_all(seed, replicates, t_grid=(0.0, 0.25, 0.5, 0.75, 0.9), cell=None):
    checks = []
    checks += bivariate_suite(seed, replicates)
    checks += chatterjee_profile_suite(seed, replicates)
    checks += orthogonality_suite(seed, replicates)
    checks += inequality_suite(seed)
    checks += hypercontractivity_suite(seed, replicates, t_grid, cell or 8)
    checks += diagnostics_suite()
    checks += limitlab_suite(seed, replicates)
    return checks
