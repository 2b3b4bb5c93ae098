"""Desk-scale experiments on the Gaussian limit of the maximum.

The main entry point, :func:`run_limit_experiment`, samples the maximum on
a schedule of growing boxes and records, for each box: the centring and
scale of ``M``, KS distances to the normal and to a fitted Gumbel law,
``Var[Q1] / Var[M]``, ``Var[M] / w(R)``, the growth ratio
``E[M] / sqrt(2 d log N)`` and the largest argmax mass of a sub-box of
side ``R^(1 - beta)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import records
from .chaos import ChaosCoefficients, residual_ratio, var_q1_plugin
from .maxstats import estimate_argmax_distribution
from .rng import Purpose
from .sampling import LatticeGrid, couple_values, make_sampler, map_replicates
from .stats import (fit_gumbel, ks_gumbel, ks_normal, mean_estimate, trend_increasing,
                    variance_estimate, weighted_slope, wilson_interval)


def stage_seed(seed, *keys):
    """Independent 64-bit seed for one stage of an experiment."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# delocalisation


def window_points(grid, beta):
    """Sites per axis of the sub-box ``x + [0, R^(1 - beta)]^d``."""
    side = grid.R ** (1.0 - beta) if grid.R > 0 else 0.0
    return min(grid.per_axis, int(math.floor(side / grid.eps + 1e-9)) + 1)


def window_masses(p, grid, width):
    """Argmax mass of every window of ``width`` sites per axis, sliding by half a window."""
    n = grid.per_axis
    step = max(1, width // 2)
    starts = list(range(0, n - width + 1, step))
    if starts[-1] != n - width:
        starts.append(n - width)
    starts = np.asarray(starts)
    if grid.d == 1:
        c = np.concatenate([[0.0], np.cumsum(p)])
        return c[starts + width] - c[starts]
    q = np.asarray(p).reshape(grid.shape)
    c = np.zeros((n + 1, n + 1))
    c[1:, 1:] = q.cumsum(0).cumsum(1)
    s0, s1 = np.meshgrid(starts, starts, indexing="ij")
    return (c[s0 + width, s1 + width] - c[s0, s1 + width] - c[s0 + width, s1] + c[s0, s1]).ravel()


@dataclass
class DelocalisationPoint:
    R: float
    window: int
    window_fraction: float
    max_mass: float
    se: float


def delocalisation_from_counts(p, sample_count, grid, beta):
    width = window_points(grid, beta)
    masses = window_masses(p, grid, width)
    top = float(masses.max())
    return DelocalisationPoint(float(grid.R), width, (width / grid.per_axis) ** grid.d, top,
                               math.sqrt(max(top * (1 - top), 1.0 / sample_count) / sample_count))


def uniform_window_z(p, sample_count, grid, beta):
    """Largest ``|mass - fraction| / SE`` over all windows, for a uniform argmax law.

    Under exchangeability every window carries mass equal to its share of
    the sites; the SE is the binomial one at that share.
    """
    width = window_points(grid, beta)
    frac = (width / grid.per_axis) ** grid.d
    masses = window_masses(p, grid, width)
    se = math.sqrt(frac * (1 - frac) / sample_count)
    return float(np.max(np.abs(masses - frac)) / se), frac


def fit_delocalisation(points):
    """Slope of ``log(max mass)`` against ``log R``; ``beta' = -slope``."""
    x = np.log([pt.R for pt in points])
    y = np.log([pt.max_mass for pt in points])
    se = [pt.se / pt.max_mass for pt in points]
    slope, se_slope, _ = weighted_slope(x, y, se)
    return {"slope": slope, "se": se_slope, "beta_prime": -slope,
            "ci95": (slope - 1.96 * se_slope, slope + 1.96 * se_slope),
            "excludes_zero": bool(slope + 1.96 * se_slope < 0)}


def delocalisation_probe(model, R_schedule, beta, replicates, seed, eps=1.0, backend="auto", workers=None):
    """Max window mass for each ``R`` plus the fitted decay exponent."""
    points = []
    for R in R_schedule:
        grid = LatticeGrid(model.d, R, eps)
        sampler = make_sampler(model, grid, stage_seed(seed, 1, grid.per_axis), backend)
        table = records.simulate(sampler, np.arange(replicates), workers=workers)
        dist = estimate_argmax_distribution(table.I, grid.n)
        points.append(delocalisation_from_counts(dist.p, replicates, grid, beta))
    fit = fit_delocalisation(points) if len(points) >= 2 else None
    return points, fit


# ---------------------------------------------------------------------------
# main experiment


@dataclass
class LimitRow:
    per_axis: int
    n: int
    R: float
    w_R: float
    mean_M: float
    se_mean_M: float
    var_M: float
    se_var_M: float
    var_Q1: float
    se_var_Q1: float
    ratio: float
    se_ratio: float
    ratio_plugin: float
    se_ratio_plugin: float
    eval_replicates: int
    ks_normal: float
    ks_gumbel: float
    gumbel_loc: float
    gumbel_scale: float
    var_M_over_w: float
    se_var_M_over_w: float
    growth_ratio: float
    se_growth_ratio: float
    gamma: float
    deloc_window: int
    deloc_fraction: float
    deloc_max_mass: float
    deloc_se: float
    tie_count: int
    warnings: list = field(default_factory=list)


@dataclass
class LimitExperimentResult:
    kernel: str
    d: int
    eps: float
    beta: float
    replicates: int
    seed: int
    backend: str
    rows: list
    deloc_fit: Optional[dict] = None
    eval_table: Optional[records.ReplicateTable] = field(default=None, repr=False)
    eval_sampler: Optional[object] = field(default=None, repr=False)
    samples_M: dict = field(default_factory=dict, repr=False)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def to_json(self):
        return {
            "kernel": self.kernel, "d": self.d, "eps": self.eps, "beta": self.beta,
            "replicates": self.replicates, "seed": self.seed, "backend": self.backend,
            "rows": [asdict(r) for r in self.rows], "deloc_fit": self.deloc_fit,
        }


def run_limit_experiment(model, sizes, replicates, seed, eps=1.0, beta=0.5, backend="auto",
                         workers=None, eval_replicates=None, coupled_top=False):
    """Sample the maximum on boxes with ``sizes`` sites per axis.

    For each box, batch A (ids ``0 .. replicates``) gives the law of ``M``,
    the argmax counts and the delocalisation masses.  Batch B (the next
    ``eval_replicates`` ids, default ``replicates``) evaluates ``Q1`` with
    the batch-A coefficients, from which ``Var[Q1] / Var[M]`` is estimated
    through the residual ``M - Q1``; with ``eval_replicates=0`` only the
    plug-in ratio ``p'Kp / Var[M]`` is reported.  ``coupled_top`` adds an
    OU-coupled argmax (``t ~ U[0, 1]``) to batch B of the largest box.  The
    largest box's batch-B table is kept as ``eval_table``.
    """
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    n_eval = replicates if eval_replicates is None else int(eval_replicates)
    rows = []
    points = []
    result = LimitExperimentResult(model.profile.spec(), model.d, float(eps), float(beta),
                                   int(replicates), int(seed), backend, rows)
    for size in sizes:
        grid = LatticeGrid.from_points(size, model.d, eps)
        sampler = make_sampler(model, grid, stage_seed(seed, 0, size), backend)
        table = records.simulate(sampler, np.arange(replicates), workers=workers)
        dist = estimate_argmax_distribution(table.I, grid.n)
        coeffs = ChaosCoefficients(dist.p, "argmax-counts", replicates)
        mean_m = mean_estimate(table.M)
        var_m = variance_estimate(table.M)
        var_q = var_q1_plugin(coeffs, sampler)
        plug = var_q.value / var_m.value
        se_plug = abs(plug) * math.hypot(var_q.se / max(var_q.value, 1e-300), var_m.se / var_m.value)
        if n_eval:
            evaluation = records.simulate(
                sampler, np.arange(replicates, replicates + n_eval), coeffs=coeffs,
                coupled=coupled_top and size == sizes[-1], workers=workers)
            est = residual_ratio(evaluation.M, evaluation.Q1, (1.0 - var_q.value) / replicates)
            ratio, se_ratio = est.value, est.se
            if size == sizes[-1]:
                result.eval_table = evaluation
                result.eval_sampler = sampler
        else:
            ratio, se_ratio = plug, se_plug
        w_r = float(model.lag_cov(grid.R)) if grid.R > 0 else 1.0
        norm = math.sqrt(2 * model.d * math.log(size)) if size > 1 else float("nan")
        loc, scale = fit_gumbel(table.M)
        deloc = delocalisation_from_counts(dist.p, replicates, grid, beta)
        points.append(deloc)
        rows.append(LimitRow(
            per_axis=size, n=grid.n, R=float(grid.R), w_R=w_r,
            mean_M=mean_m.value, se_mean_M=mean_m.se, var_M=var_m.value, se_var_M=var_m.se,
            var_Q1=var_q.value, se_var_Q1=var_q.se, ratio=ratio, se_ratio=se_ratio,
            ratio_plugin=plug, se_ratio_plugin=se_plug, eval_replicates=n_eval,
            ks_normal=ks_normal(table.M), ks_gumbel=ks_gumbel(table.M),
            gumbel_loc=loc, gumbel_scale=scale,
            var_M_over_w=var_m.value / w_r if w_r > 0 else float("inf"),
            se_var_M_over_w=var_m.se / w_r if w_r > 0 else float("inf"),
            growth_ratio=mean_m.value / norm, se_growth_ratio=mean_m.se / norm,
            gamma=mean_m.value / math.sqrt(1.0 - w_r) if w_r < 1 else float("nan"),
            deloc_window=deloc.window, deloc_fraction=deloc.window_fraction,
            deloc_max_mass=deloc.max_mass, deloc_se=deloc.se,
            tie_count=int(table.tie.sum()), warnings=list(sampler.warnings)))
        result.samples_M[size] = table.M
    if len(points) >= 2 and all(pt.max_mass > 0 for pt in points):
        result.deloc_fit = fit_delocalisation(points)
    return result


def ratio_trend(result, z=2.0):
    """Trend flag for ``Var[Q1] / Var[M]`` along the schedule."""
    return trend_increasing(result.column("ratio"), result.column("se_ratio"), z)


def variance_scale_check(result, band=(0.5, 2.0)):
    """``Var[M] / w(R)`` at the top box lies in ``band`` and moves toward 1."""
    v = result.column("var_M_over_w")
    se = result.column("se_var_M_over_w")
    if not np.all(np.isfinite(v)):  # w(R) underflowed to 0
        return {"values": v.tolist(), "ses": se.tolist(), "in_band": False, "toward_one": False}
    gap = np.abs(v - 1.0)
    return {"values": v.tolist(), "ses": se.tolist(),
            "in_band": bool(band[0] <= v[-1] <= band[1]),
            "toward_one": trend_increasing(-gap, se)}


def growth_check(result, band=(0.6, 1.1)):
    """``mean(M_R) / sqrt(2 d log N_R)`` per box, with trend and band flags."""
    ratios = result.column("growth_ratio")
    ses = result.column("se_growth_ratio")
    return {"ratios": ratios.tolist(), "ses": ses.tolist(),
            "increasing": trend_increasing(ratios, ses),
            "in_band": bool(band[0] <= ratios[-1] <= band[1])}


def scaling_constants_study(result, profile=None):
    """``gamma_R = mean(M_R) / sqrt(1 - w(R))`` per box (exploratory)."""
    out = []
    for row in result.rows:
        w_r = float(profile(row.R)) if profile is not None else row.w_R
        scale = math.sqrt(1.0 - w_r) if w_r < 1 else float("nan")
        out.append({"per_axis": row.per_axis, "R": row.R, "w_R": w_r,
                    "gamma": row.mean_M / scale, "se": row.se_mean_M / scale})
    return out


def expected_max_iid(n):
    """``E[max of n iid N(0, 1)]`` by quadrature of the max's CDF ``Phi(x)^n``."""
    from scipy import integrate, stats

    def upper(x):
        return -np.expm1(n * stats.norm.logcdf(x))

    def lower(x):
        return np.exp(n * stats.norm.logcdf(x))

    pos = integrate.quad(upper, 0, np.inf, limit=200)[0]
    neg = integrate.quad(lower, -np.inf, 0, limit=200)[0]
    return pos - neg


# ---------------------------------------------------------------------------
# hypercontractivity


def alpha_slack(t):
    """``1/(1+t) - 1/(1+1/t) - (1-t)/2`` (the limit 1/2 at ``t = 0``)."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(t == 0, 0.5, 1.0 / (1.0 + t) - 1.0 / (1.0 + 1.0 / np.where(t == 0, 1.0, t))
                        - (1.0 - t) / 2.0)


def alpha_inequality_table(t_grid):
    """Slack of the exponent inequality on ``t_grid``, in floats and exactly.

    Returns a dict with the float slack array, its minimum and location,
    and the exact minimum slack computed with rationals (``t`` converted
    exactly from its binary value).
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.min() <= 0 or t_grid.max() > 1:
        raise ValueError("t_grid must lie in (0, 1]")
    slack = alpha_slack(t_grid)
    exact = [Fraction(1) / (1 + q) - Fraction(1) / (1 + 1 / q) - (1 - q) / 2
             for q in map(Fraction, t_grid.tolist())]
    k = int(np.argmin(slack))
    return {"t": t_grid, "slack": slack, "min_slack": float(slack[k]), "argmin": float(t_grid[k]),
            "exact_min_slack": min(exact), "exact_all_nonnegative": all(e >= 0 for e in exact)}


def hypercontractivity_bivariate(t):
    """Exact ``P[I = 0, I^t = 0]`` and the bound ``(1/2)^(1 + (1 - t)/2)`` for two iid sites."""
    left = 0.25 + math.asin(t) / (2 * math.pi)
    return left, 0.5 ** (1.0 + (1.0 - t) / 2.0)


def cell_neighbourhoods(grid, cell):
    """Cell coordinates of every site and the list of cell centres ``i``.

    Cells are the boxes of ``cell`` sites per axis; the neighbourhood of
    cell ``i`` is ``i`` joined with its ``3^d - 1`` sup-norm neighbours.
    """
    coords = grid.coords(np.arange(grid.n)) // cell
    ncell = -(-grid.per_axis // cell)
    centres = np.stack(np.unravel_index(np.arange(ncell ** grid.d), (ncell,) * grid.d), axis=-1)
    return coords, centres


@dataclass
class HyperRow:
    cell: tuple
    t: float
    p_S: float
    left: float
    left_ci: tuple
    right: float
    right_ci: tuple
    violation: bool


def hypercontractivity_probe(sampler, grid, cell, t_grid, replicates, offset=0, level=0.99, workers=None):
    """Estimate both sides of ``P[I in S, I^t in S] <= P[I in S]^(1 + (1-t)/2)``.

    ``S`` ranges over the dilated cell neighbourhoods.  A violation is
    recorded only when the lower Wilson limit of the left side exceeds
    the upper limit of the right side (both at ``level``).
    """
    coords, centres = cell_neighbourhoods(grid, cell)
    t_grid = [float(t) for t in t_grid]

    def fn(chunk, x):
        fresh = sampler.draw(chunk, Purpose.COUPLE)
        ci = coords[np.argmax(x, axis=1)]
        in_s = np.all(np.abs(ci[:, None, :] - centres[None, :, :]) <= 1, axis=2)
        base = in_s.sum(axis=0)
        joint = []
        for t in t_grid:
            cj = coords[np.argmax(couple_values(x, fresh, t), axis=1)]
            in_t = np.all(np.abs(cj[:, None, :] - centres[None, :, :]) <= 1, axis=2)
            joint.append((in_s & in_t).sum(axis=0))
        return base, np.array(joint)

    parts = map_replicates(sampler, np.arange(offset, offset + replicates), fn, workers)
    base = np.sum([p[0] for p in parts], axis=0)
    joint = np.sum([p[1] for p in parts], axis=0)
    lo_s, hi_s = wilson_interval(base, replicates, level)
    rows = []
    for k, t in enumerate(t_grid):
        expo = 1.0 + (1.0 - t) / 2.0
        lo_l, hi_l = wilson_interval(joint[k], replicates, level)
        for c in range(len(centres)):
            p_s = base[c] / replicates
            rows.append(HyperRow(tuple(int(v) for v in centres[c]), t, float(p_s),
                                 float(joint[k][c] / replicates), (float(lo_l[c]), float(hi_l[c])),
                                 float(p_s ** expo), (float(lo_s[c] ** expo), float(hi_s[c] ** expo)),
                                 bool(lo_l[c] > hi_s[c] ** expo)))
    return rows
