"""Numerical checkers for regularity conditions on covariance profiles.

A finite computation cannot certify a limit, so each checker is a
falsifier: it evaluates the relevant statistic on a geometric grid of
scales and reports a verdict together with the raw sequence.

Profiles are any callable ``w(r)``; if the callable has a ``log`` method
(as :class:`~gp_extremes.kernels.KernelProfile` does) ratios are formed in
log space so rapidly decaying profiles do not underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

U_POINTS = 256
MOVING_TOL = 0.10
SLOPE_TOL = 0.01


def _logw(profile):
    if hasattr(profile, "log"):
        return profile.log

    def logw(r):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(profile(r), dtype=np.float64))
    return logw


def geometric_grid(lo, hi, per_decade=8):
    k = int(round(np.log10(hi / lo) * per_decade))
    return np.logspace(np.log10(lo), np.log10(hi), k + 1)


@dataclass
class FlatnessReport:
    eta: float
    beta: float
    v_grid: np.ndarray
    sup_stats: np.ndarray
    proxy: float
    movement: float
    verdict: str

    def to_json(self):
        return {"eta": self.eta, "beta": self.beta, "v_grid": self.v_grid.tolist(),
                "sup_stats": self.sup_stats.tolist(), "proxy": self.proxy,
                "movement": self.movement, "verdict": self.verdict}


def flatness_sup(profile, v, beta, u_points=U_POINTS):
    """``sup_{u in [v^-beta, 1]} |w(uv)/w(v) - 1|`` on a log-spaced u-grid."""
    logw = _logw(profile)
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    expo = np.linspace(-beta, 0.0, u_points)
    uv = v[:, None] ** (1.0 + expo[None, :])
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(logw(uv) - logw(v)[:, None])
        dev = np.abs(ratio - 1.0)
    dev = np.where(np.isnan(dev), np.inf, dev)
    return dev.max(axis=1)


def flatness_check(profile, eta, beta, v_max=1e12, v_min=10.0, per_decade=8, u_points=U_POINTS):
    """Asymptotic-flatness verdict for ``profile`` at tolerance ``eta`` and window ``beta``.

    The limsup is proxied by the maximum of the statistic over the top
    decade of the v-grid.  When the statistic changes by more than 10%
    across that decade it is still moving; a moving statistic is only
    decisive in its direction of travel (rising above ``eta`` fails,
    falling below ``eta`` passes), otherwise the verdict is inconclusive.
    """
    if not eta > 0 or not 0 < beta < 1:
        raise ValueError("need eta > 0 and beta in (0, 1)")
    if v_max < 1e6:
        raise ValueError("v_max must be at least 1e6")
    v = geometric_grid(v_min, v_max, per_decade)
    stats = flatness_sup(profile, v, beta, u_points)
    top = stats[v >= v_max / 10.0 * (1 - 1e-12)]
    proxy = float(top.max())
    first, last = float(top[0]), float(top[-1])
    if not np.isfinite(proxy):
        movement = float("inf")
    elif first == last:
        movement = 0.0
    else:
        movement = abs(last - first) / max(abs(first), 1e-300)
    if not np.isfinite(proxy):
        verdict = "fail"
    elif movement <= MOVING_TOL:
        verdict = "pass" if proxy <= eta else "fail"
    elif last > first:
        verdict = "fail" if proxy > eta else "inconclusive"
    else:
        verdict = "pass" if proxy <= eta else "inconclusive"
    return FlatnessReport(float(eta), float(beta), v, stats, proxy, movement, verdict)


@dataclass
class SlowVariationReport:
    u: float
    v_grid: np.ndarray
    deviation: np.ndarray
    vanishing: bool


def slow_variation_check(profile, u_fixed, v_max=1e12, v_min=10.0, per_decade=8):
    """``|w(u v) / w(v) - 1|`` along a geometric v-grid for one fixed ``u``.

    ``vanishing`` is set when the deviation decreases over the grid and
    ends below half its starting value.
    """
    if not 0 < u_fixed <= 1:
        raise ValueError("u_fixed must lie in (0, 1]")
    logw = _logw(profile)
    v = geometric_grid(v_min, v_max, per_decade)
    with np.errstate(over="ignore", invalid="ignore"):
        dev = np.abs(np.exp(logw(u_fixed * v) - logw(v)) - 1.0)
    dev = np.where(np.isnan(dev), np.inf, dev)
    with np.errstate(invalid="ignore"):
        vanishing = bool(dev[-1] == 0.0 or (np.all(np.diff(dev) <= 1e-15) and dev[-1] < 0.5 * dev[0]))
    return SlowVariationReport(float(u_fixed), v, dev, vanishing)


@dataclass
class DivergenceReport:
    r_grid: np.ndarray
    values: np.ndarray
    tail_slope: float
    regime: str


def k_logr_divergence(profile, r_grid=None):
    """The sequence ``w(r) log r`` and its regime.

    The regime comes from the slope of ``log(w(r) log r)`` against
    ``log log r`` over the last two decades of ``r_grid``: above 0.01 the
    product grows without bound (strong), below -0.01 it dies (berman),
    otherwise it levels off (boundary).
    """
    r = geometric_grid(10.0, 1e12) if r_grid is None else np.asarray(r_grid, dtype=np.float64)
    logw = _logw(profile)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_s = logw(r) + np.log(np.log(r))
    values = np.exp(log_s)
    tail = r >= r[-1] / 100.0 * (1 - 1e-12)
    if np.any(~np.isfinite(log_s[tail])) or tail.sum() < 2:
        return DivergenceReport(r, values, float("-inf"), "berman")
    x = np.log(np.log(r[tail]))
    slope = float(np.polyfit(x, log_s[tail], 1)[0])
    if slope > SLOPE_TOL:
        regime = "strong"
    elif slope < -SLOPE_TOL:
        regime = "berman"
    else:
        regime = "boundary"
    return DivergenceReport(r, values, slope, regime)


def hm_regularity(profile, n_grid):
    """``(1/n) sum_{k=1}^n |K(k) - K(n)| log n`` for each ``n`` in ``n_grid`` (unit spacing)."""
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if n_grid.min() < 1:
        raise ValueError("n must be positive")
    k = np.asarray(profile(np.arange(1, n_grid.max() + 1, dtype=np.float64)), dtype=np.float64)
    out = np.empty(n_grid.size)
    for idx, n in enumerate(n_grid):
        out[idx] = np.abs(k[:n] - k[n - 1]).mean() * np.log(n)
    return out
