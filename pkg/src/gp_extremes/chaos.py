"""Best linear approximation of the maximum and its variance identities.

For a centred Gaussian vector ``X`` with covariance ``K`` and a.s. unique
argmax ``I``, the projection of ``M - E[M]`` onto the linear span of ``X``
is ``Q1 = sum_i P[I = i] X_i``, so ``Var[Q1] = p' K p``.  The variance of
the maximum itself satisfies the interpolation identity

    Var[M] = int_0^1 E[K(I, I^t)] dt,

where ``I^t`` is the argmax of ``t X + sqrt(1 - t^2) X~``.  Averaging
``K(I, I^t)`` over replicates with ``t ~ U[0, 1]`` is therefore an unbiased
estimate of ``Var[M]``.

Coefficients are estimated on one batch of replicate ids (A) and every
statistic that uses them is evaluated on a disjoint batch (B).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import records
from .errors import DomainError
from .maxstats import estimate_argmax_distribution, softmax_rows
from .records import STRATA
from .stats import Estimate, mean_estimate, variance_estimate


@dataclass
class ChaosCoefficients:
    p: np.ndarray
    source: str = "argmax-counts"
    sample_count: int = 0


def _p(coeffs):
    return np.asarray(getattr(coeffs, "p", coeffs), dtype=np.float64)


def _matvec(cov):
    if isinstance(cov, np.ndarray):
        return lambda v: cov @ v
    if hasattr(cov, "cov_matvec"):
        return cov.cov_matvec
    return cov


def q1_value(values, coeffs):
    """``sum_i p_i X_i`` for one sample or row-wise for a batch."""
    values = getattr(values, "values", values)
    return np.asarray(values, dtype=np.float64) @ _p(coeffs)


def var_q1_formula(coeffs, cov):
    """Quadratic form ``p' K p``; ``cov`` is a matrix, a sampler or a matvec."""
    p = _p(coeffs)
    return float(p @ _matvec(cov)(p))


def var_q1_plugin(coeffs, cov):
    """Bias-corrected ``p' K p`` for count-estimated ``p``, with its SE.

    With ``N`` multinomial counts, ``E[p^' K p^] = p' K p + (1 - p' K p) / N``
    when ``K`` has unit diagonal; the estimate removes that bias.  The SE
    combines the delta-method term ``4/N (sum_i p_i (Kp)_i^2 - (p'Kp)^2)``
    with the bound ``2 tr((K Sigma)^2) <= 2 ((1 - p'Kp)/N)^2`` for the
    quadratic term.
    """
    p = _p(coeffs)
    n_samp = getattr(coeffs, "sample_count", 0)
    kp = _matvec(cov)(p)
    raw = float(p @ kp)
    if not n_samp:
        return Estimate(raw, 0.0)
    bias = (1.0 - raw) / n_samp
    value = (raw - 1.0 / n_samp) / (1.0 - 1.0 / n_samp) if n_samp > 1 else raw
    lin = 4.0 / n_samp * max(float(p @ (kp * kp)) - raw * raw, 0.0)
    return Estimate(value, math.sqrt(lin + 2.0 * bias * bias))


def argmax_coefficients(sampler, replicates, offset=0, workers=None):
    """Coefficients ``P[I = i]`` from argmax counts over ids ``offset .. offset + replicates``."""
    table = records.simulate(sampler, np.arange(offset, offset + replicates), workers=workers)
    dist = estimate_argmax_distribution(table.I, sampler.n)
    return ChaosCoefficients(dist.p, "argmax-counts", dist.sample_count), table


def q1_coefficients_softmax(sampler, beta, replicates, offset=0, workers=None):
    """Monte Carlo ``E[grad F_beta(X)]``, the smooth surrogate of ``P[I = i]``."""
    if not beta > 0:
        raise DomainError("beta must be positive")

    def grad_sum(chunk, x):
        return softmax_rows(x, beta)[1].sum(axis=0)

    _, parts = records.simulate(sampler, np.arange(offset, offset + replicates),
                                workers=workers, extra=grad_sum)
    p = np.sum(parts, axis=0) / replicates
    return ChaosCoefficients(p, f"softmax-expectation({beta:g})", replicates)


def _chatterjee_from_table(table, sampler, stratified):
    k = np.asarray(sampler.cov_entries(table.I, table.I_t), dtype=np.float64)
    if not stratified:
        return mean_estimate(k)
    strata = table.replicate_id % STRATA
    means, variances = [], []
    for s in range(STRATA):
        ks = k[strata == s]
        means.append(ks.mean())
        variances.append(ks.var(ddof=1) / ks.size if ks.size > 1 else 0.0)
    return Estimate(float(np.mean(means)), float(math.sqrt(np.sum(variances)) / STRATA))


def chatterjee_variance(sampler, replicates, offset=0, stratified=False, workers=None):
    """Unbiased estimate of ``Var[M]`` from OU-coupled argmax pairs.

    Each replicate draws its own ``t ~ U[0, 1]`` (or, when ``stratified``,
    ``t`` uniform within stratum ``id mod 16``) and contributes ``K(I, I^t)``.
    """
    if stratified and replicates < 2 * STRATA:
        raise DomainError(f"stratified estimate needs at least {2 * STRATA} replicates")
    table = records.simulate(sampler, np.arange(offset, offset + replicates),
                             coupled=True, stratified=stratified, workers=workers)
    return _chatterjee_from_table(table, sampler, stratified)


def coupled_argmax_agreement(sampler, t, replicates, offset=0, workers=None):
    """``P[I = I^t]`` and ``E[K(I, I^t)]`` at a fixed coupling parameter ``t``."""
    table = records.simulate(sampler, np.arange(offset, offset + replicates), t=t, workers=workers)
    same = (table.I == table.I_t).astype(np.float64)
    k = np.asarray(sampler.cov_entries(table.I, table.I_t), dtype=np.float64)
    return mean_estimate(same), mean_estimate(k)


@dataclass
class ResidualReport:
    cov: np.ndarray
    se: np.ndarray
    se_mc: np.ndarray
    se_coeffs: np.ndarray

    def max_z(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.se > 0, np.abs(self.cov) / self.se, np.where(self.cov == 0, 0.0, np.inf))
        return float(z.max())


def dense_cov(sampler):
    if hasattr(sampler, "matrix"):
        return sampler.matrix
    i, j = np.meshgrid(np.arange(sampler.n), np.arange(sampler.n), indexing="ij")
    return np.asarray(sampler.cov_entries(i.ravel(), j.ravel())).reshape(sampler.n, sampler.n)


def projection_residual_check(sampler, coeffs, replicates, offset, centre=0.0, workers=None):
    """Estimates of ``Cov[M - Q1, X_j]`` for every site ``j``, with SEs.

    ``coeffs`` must come from replicate ids disjoint from
    ``offset .. offset + replicates``.  Since ``E[X_j] = 0`` the covariance
    equals ``E[(M - Q1 - c) X_j]`` for any constant ``c``; pass an
    independent estimate of ``E[M]`` as ``centre`` to reduce variance.
    The SE adds the uncertainty of count-estimated coefficients,
    ``Var[(K (p^ - p))_j] = (sum_i p_i K_ij^2 - (Kp)_j^2) / N_A``.
    """
    p = _p(coeffs)

    def moments(chunk, x):
        m = x.max(axis=1)
        r = (m - x @ p - centre)[:, None] * x
        return r.sum(axis=0), (r * r).sum(axis=0)

    _, parts = records.simulate(sampler, np.arange(offset, offset + replicates),
                                workers=workers, extra=moments)
    s1 = np.sum([q[0] for q in parts], axis=0)
    s2 = np.sum([q[1] for q in parts], axis=0)
    mean = s1 / replicates
    var = np.maximum(s2 / replicates - mean * mean, 0.0) * replicates / (replicates - 1)
    se_mc = np.sqrt(var / replicates)
    n_a = getattr(coeffs, "sample_count", 0)
    if n_a:
        k = dense_cov(sampler)
        kp = k @ p
        se_c = np.sqrt(np.maximum((p @ (k * k)) - kp * kp, 0.0) / n_a)
    else:
        se_c = np.zeros_like(se_mc)
    return ResidualReport(mean, np.sqrt(se_mc ** 2 + se_c ** 2), se_mc, se_c)


def standardized_l2_gap(var_x, var_y):
    """``E[(X^ - Y^)^2] = 2 (1 - sqrt(Var Y / Var X))`` when ``Cov[X - Y, Y] = 0``."""
    if var_x <= 0 or var_y <= 0:
        raise DomainError(f"variances must be positive, got {var_x}, {var_y}")
    if var_y > var_x:
        raise DomainError(f"need var_y <= var_x, got {var_y} > {var_x}")
    return 2.0 * (1.0 - math.sqrt(var_y / var_x))


def empirical_standardized_gap(x, y):
    """Sample ``E[(X^ - Y^)^2]`` with both variables standardised by sample moments."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xs = (x - x.mean()) / x.std(ddof=1)
    ys = (y - y.mean()) / y.std(ddof=1)
    return mean_estimate((xs - ys) ** 2)


def reconstructed_variance(m, q):
    """``Var[M]`` rebuilt from ``Var[Q1]`` and the standardised gap.

    Inverting ``gap = 2 (1 - sqrt(Var Q / Var M))`` gives
    ``Var M = Var Q / (1 - gap / 2)^2``.  The SE is a delta-method SE over
    the per-replicate moments of ``(m, q)``.
    """
    m = np.asarray(m, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    n = m.size

    def f(mom):
        em, eq, emm, eqq, emq = mom
        vm, vq, c = emm - em * em, eqq - eq * eq, emq - em * eq
        corr = c / math.sqrt(vm * vq)
        return vq / (corr * corr)

    cols = np.stack([m, q, m * m, q * q, m * q], axis=1)
    mom = cols.mean(axis=0)
    value = f(mom) * n / (n - 1)
    grad = np.empty(5)
    for k in range(5):
        h = 1e-6 * max(abs(mom[k]), 1.0)
        up, dn = mom.copy(), mom.copy()
        up[k] += h
        dn[k] -= h
        grad[k] = (f(up) - f(dn)) / (2 * h)
    cov = np.cov(cols, rowvar=False)
    return Estimate(float(value), float(math.sqrt(max(grad @ cov @ grad, 0.0) / n)))


def residual_ratio(m, q, inflation=0.0):
    """``Var[Q1] / Var[M]`` estimated as ``1 - Var[M - Q1] / Var[M]``.

    This uses ``Cov[M - Q1, Q1] = 0`` and is far less noisy than a ratio of
    two separately estimated variances, because the residual is small.
    ``inflation`` is subtracted from the residual variance; with
    coefficients estimated from ``N_A`` independent replicates it should be
    ``(1 - p'Kp) / N_A``, the expected extra variance from coefficient noise.
    The SE is a delta-method SE over per-replicate moments.
    """
    m = np.asarray(m, dtype=np.float64)
    a = m - np.asarray(q, dtype=np.float64)
    n = m.size
    cols = np.stack([m, a, m * m, a * a], axis=1)
    em, ea, emm, eaa = cols.mean(axis=0)
    vm, va = emm - em * em, eaa - ea * ea
    va_c = va * n / (n - 1) - inflation
    vm_c = vm * n / (n - 1)
    value = 1.0 - va_c / vm_c
    # d/d(moments) of 1 - va / vm
    grad = np.array([-2 * em * va / vm ** 2, 2 * ea / vm, va / vm ** 2, -1.0 / vm])
    cov = np.cov(cols, rowvar=False)
    return Estimate(float(value), float(math.sqrt(max(grad @ cov @ grad, 0.0) / n)))


@dataclass
class VarianceReport:
    var_m_direct: float
    var_m_chatterjee: float
    var_q1_formula: float
    var_q1_sample: float
    ratio: float
    se_var_m_direct: float
    se_var_m_chatterjee: float
    se_var_q1_formula: float
    se_var_q1_sample: float
    se_ratio: float
    var_m_reconstructed: float
    se_var_m_reconstructed: float
    plugin_bias_bound: float
    coeff_replicates: int
    eval_replicates: int

    def to_json(self):
        return {k: float(v) if isinstance(v, float) else v for k, v in asdict(self).items()}


def variance_report(sampler, replicates, coeff_replicates=None, stratified=True, workers=None,
                    return_table=False):
    """All ``Var[M]`` and ``Var[Q1]`` routes on one model.

    Batch A (ids ``0 .. coeff_replicates``) estimates ``P[I = i]``; batch B
    (the next ``replicates`` ids) gives ``M``, ``Q1`` and the coupled argmax.
    """
    n_a = coeff_replicates or replicates
    coeffs, _ = argmax_coefficients(sampler, n_a, 0, workers)
    table = records.simulate(sampler, np.arange(n_a, n_a + replicates), coeffs=coeffs,
                             coupled=True, stratified=stratified, workers=workers)
    direct = variance_estimate(table.M)
    chat = _chatterjee_from_table(table, sampler, stratified)
    formula = var_q1_plugin(coeffs, sampler)
    sample = variance_estimate(table.Q1)
    ratio = formula.value / direct.value
    se_ratio = abs(ratio) * math.hypot(formula.se / formula.value if formula.value else 0.0,
                                       direct.se / direct.value)
    rec = reconstructed_variance(table.M, table.Q1)
    report = VarianceReport(
        var_m_direct=direct.value, var_m_chatterjee=chat.value,
        var_q1_formula=formula.value, var_q1_sample=sample.value, ratio=ratio,
        se_var_m_direct=direct.se, se_var_m_chatterjee=chat.se,
        se_var_q1_formula=formula.se, se_var_q1_sample=sample.se, se_ratio=se_ratio,
        var_m_reconstructed=rec.value, se_var_m_reconstructed=rec.se,
        plugin_bias_bound=1.0 / n_a, coeff_replicates=n_a, eval_replicates=replicates)
    if return_table:
        return report, table, coeffs
    return report
