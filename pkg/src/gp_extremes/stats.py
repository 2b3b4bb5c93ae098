"""Small statistical helpers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def within(self, target, z=3.0, extra_se=0.0):
        return abs(self.value - target) <= z * math.hypot(self.se, extra_se)


def mean_estimate(x):
    x = np.asarray(x, dtype=np.float64)
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)))


def variance_estimate(x):
    """Unbiased sample variance with SE ``sqrt((m4 - s^4) / N)``."""
    x = np.asarray(x, dtype=np.float64)
    c = x - x.mean()
    s2 = float(np.dot(c, c) / (x.size - 1))
    m4 = float(np.mean(c ** 4))
    return Estimate(s2, math.sqrt(max(m4 - s2 * s2, 0.0) / x.size))


def covariance_estimate(x, y):
    """Sample covariance of paired columns with a plug-in SE of the product mean."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    prod = (x - x.mean(axis=0)) * (y - y.mean(axis=0))
    n = prod.shape[0]
    return prod.sum(axis=0) / (n - 1), prod.std(axis=0, ddof=1) / math.sqrt(n)


def wilson_interval(k, n, level=0.99):
    """Wilson score interval for a binomial proportion (vectorised)."""
    z = sps.norm.ppf(0.5 + level / 2.0)
    k = np.asarray(k, dtype=np.float64)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


def merge_indistinguishable(values, ses, z=2.0):
    """Pool consecutive points that are within ``z`` combined SEs of each other.

    Returns a list of ``(value, se, members)`` groups, each pooled by
    inverse-variance weighting.
    """
    groups = []
    for k, (v, s) in enumerate(zip(values, ses)):
        if groups:
            gv, gs, members = groups[-1]
            if abs(v - gv) <= z * math.hypot(s, gs):
                w1, w2 = 1.0 / max(gs, 1e-300) ** 2, 1.0 / max(s, 1e-300) ** 2
                groups[-1] = ((gv * w1 + v * w2) / (w1 + w2), math.sqrt(1.0 / (w1 + w2)), members + [k])
                continue
        groups.append((float(v), float(s), [k]))
    return groups


def trend_increasing(values, ses, z=2.0, min_points=3):
    """Falsifiable finite-size form of "increases along the schedule".

    Neighbours within ``z`` combined SEs are merged; the trend passes when
    there are at least ``min_points`` raw points, at least two groups
    survive, and the group values strictly increase.
    """
    if len(values) < min_points:
        return False
    groups = merge_indistinguishable(values, ses, z)
    return len(groups) >= 2 and all(b[0] > a[0] for a, b in zip(groups, groups[1:]))


def standardize(x):
    x = np.asarray(x, dtype=np.float64)
    return (x - x.mean()) / x.std(ddof=1)


def ks_normal(x):
    """KS distance of the sample-standardised data from N(0, 1)."""
    return float(sps.kstest(standardize(x), "norm").statistic)


def fit_gumbel(x):
    """Maximum-likelihood Gumbel (max) location and scale."""
    loc, scale = sps.gumbel_r.fit(np.asarray(x, dtype=np.float64))
    return float(loc), float(scale)


def ks_gumbel(x):
    loc, scale = fit_gumbel(x)
    return float(sps.kstest(np.asarray(x, dtype=np.float64), "gumbel_r", args=(loc, scale)).statistic)


def weighted_slope(x, y, se_y):
    """Weighted least-squares slope with SE inflated by the residual scatter."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = 1.0 / np.maximum(np.asarray(se_y, dtype=np.float64), 1e-12) ** 2
    xm = np.sum(w * x) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    resid = y - ym - slope * (x - xm)
    dof = max(x.size - 2, 1)
    chi2 = float(np.sum(w * resid ** 2) / dof)
    se = math.sqrt(max(chi2, 1.0) / sxx)
    return float(slope), float(se), float(ym - slope * xm)
