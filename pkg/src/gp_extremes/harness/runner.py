"""Scenario execution and atomic output writing.

A run produces ``summary.json``, ``replicates.csv`` and ``plots/*.svg``
in the output directory.  Everything is first written to a sibling
temporary directory which replaces the output directory only when the
whole scenario succeeded.  ``summary.json`` holds no timing, so reruns
with the same config and seed are byte-identical; the wall time goes to
``timing.json``.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .. import __version__, backend, diagnostics, limitlab, records
from ..chaos import variance_report
from ..errors import GPExtremesError, ScenarioError
from ..sampling import LatticeGrid, make_sampler, resolve_workers
from . import verify
from .svg import emit_svg


@dataclass
class ReportSummary:
    scenario: str
    name: str
    version: str
    config: dict
    stages: dict
    warnings: list
    failures: int = 0
    checks_passed: int = 0
    checks_failed: int = 0
    wall_time: float = 0.0
    out_dir: str = ""
    files: list = field(default_factory=list)

    def to_json(self):
        """Deterministic content of ``summary.json`` (no wall time, no paths)."""
        return {
            "scenario": self.scenario, "name": self.name, "version": self.version,
            "config": self.config, "stages": self.stages, "warnings": self.warnings,
            "failures": self.failures, "checks_passed": self.checks_passed,
            "checks_failed": self.checks_failed,
        }

    @property
    def ok(self):
        return self.failures == 0


def version_string():
    return f"gp_extremes {__version__} ({backend.NAME} core)"


def jsonable(obj):
    """Convert numpy scalars/arrays, tuples and non-finite floats for ``json``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(obj, "to_json"):
        return jsonable(obj.to_json())
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _tag(warnings, stage):
    return [{"stage": stage, "operation": op, "message": msg} for op, msg in warnings]


# ---------------------------------------------------------------------------
# scenarios; each returns (stages, warnings, table, plots, failures, counts)


def _sample(cfg, workers):
    model = cfg.model()
    stages, warnings, plots = {}, [], []
    table = None
    for size in cfg.schedule:
        grid = LatticeGrid.from_points(size, cfg.d, cfg.eps)
        sampler = make_sampler(model, grid, limitlab.stage_seed(cfg.seed, 0, size), cfg.backend)
        rep, table, coeffs = variance_report(sampler, cfg.replicates, cfg.coeff_replicates,
                                             stratified=True, workers=workers, return_table=True)
        stats = records.replicate_statistics(table, sampler.cov_entries)
        stages[f"n{size}"] = {"per_axis": size, "sites": grid.n, "R": grid.R,
                              "sampler": sampler.name, "variance": rep, "replicate_statistics": stats}
        warnings += _tag(sampler.warnings, f"n{size}")
    stages["replicate_statistics"] = stats
    plots.append(("histogram", table.M, "M_histogram.svg", "maximum", "M", "density"))
    plots.append(("qq-normal", table.M, "M_qq.svg", "normal QQ of M", "", ""))
    return stages, warnings, table, plots, 0, (0, 0)


def _experiment(cfg, workers):
    model = cfg.model()
    result = limitlab.run_limit_experiment(
        model, cfg.schedule, cfg.replicates, cfg.seed, eps=cfg.eps, beta=cfg.beta,
        backend=cfg.backend, workers=workers, eval_replicates=cfg.coeff_replicates,
        coupled_top=cfg.coupled)
    stages = {"limit": result.to_json(), "growth": limitlab.growth_check(result),
              "scaling_constants": limitlab.scaling_constants_study(result, cfg.profile())}
    if len(cfg.schedule) >= 3:
        stages["ratio_trend_increasing"] = limitlab.ratio_trend(result)
        stages["variance_scale"] = limitlab.variance_scale_check(result)
    warnings = []
    for row in result.rows:
        warnings += _tag(row.warnings, f"n{row.per_axis}")
    table = result.eval_table
    if table is not None:
        cov = result.eval_sampler.cov_entries if table.I_t is not None else None
        stages["replicate_statistics"] = records.replicate_statistics(table, cov)
    top = cfg.schedule[-1]
    sizes = [float(s) for s in cfg.schedule]
    plots = [
        ("histogram", result.samples_M[top], "M_histogram.svg", f"M at {top} sites per axis", "M", "density"),
        ("qq-normal", result.samples_M[top], "M_qq.svg", f"normal QQ of M at {top}", "", ""),
        ("line", {"Var[Q1]/Var[M]": [np.log2(sizes), result.column("ratio")]}, "ratio.svg",
         "first-chaos variance ratio", "log2 points per axis", "ratio"),
        ("line", {"normal": [np.log2(sizes), result.column("ks_normal")],
                  "Gumbel": [np.log2(sizes), result.column("ks_gumbel")]}, "ks.svg",
         "KS distance", "log2 points per axis", "KS"),
        ("line", {"growth": [np.log2(sizes), result.column("growth_ratio")]}, "growth.svg",
         "E[M] / sqrt(2 d log N)", "log2 points per axis", "ratio"),
    ]
    return stages, warnings, table, plots, 0, (0, 0)


def _flatness(cfg, workers):
    profile = cfg.profile()
    stages = {"flatness": [diagnostics.flatness_check(profile, cfg.eta, b) for b in cfg.flat_beta]}
    div = diagnostics.k_logr_divergence(profile)
    stages["k_logr"] = {"regime": div.regime, "tail_slope": div.tail_slope,
                        "r_grid": div.r_grid, "values": div.values}
    sv = diagnostics.slow_variation_check(profile, 0.5)
    stages["slow_variation"] = {"u": sv.u, "v_grid": sv.v_grid, "deviation": sv.deviation,
                                "vanishing": sv.vanishing}
    series = {}
    for rep in stages["flatness"]:
        y = np.log10(np.maximum(rep.sup_stats, 1e-300))
        series[f"beta={rep.beta:g}"] = [np.log10(rep.v_grid), np.where(np.isfinite(y), y, np.nan)]
    plots = []
    if any(np.isfinite(s[1]).any() for s in series.values()):
        plots.append(("line", series, "flatness.svg", "flatness statistic", "log10 v", "log10 sup"))
    return stages, [], None, plots, 0, (0, 0)


def _verify(cfg, workers):
    checks = verify.run_all(cfg.seed, cfg.replicates, cfg.t_grid, cfg.cell)
    passed = sum(c.passed for c in checks)
    failed = len(checks) - passed
    stages = {"checks": checks}
    return stages, [], None, [], failed, (passed, failed)


SCENARIOS = {"sample": _sample, "experiment": _experiment, "flatness": _flatness, "verify": _verify}


def _write_outputs(tmp, summary, table, plots):
    os.makedirs(os.path.join(tmp, "plots"))
    files = ["summary.json", "replicates.csv"]
    if table is not None:
        records.write_csv(table, os.path.join(tmp, "replicates.csv"))
    else:
        with open(os.path.join(tmp, "replicates.csv"), "w") as fh:
            fh.write(",".join(records.CSV_HEADER) + "\n")
    for kind, data, fname, title, xl, yl in plots:
        emit_svg(kind, data, os.path.join(tmp, "plots", fname), title, xl, yl)
        files.append(f"plots/{fname}")
    with open(os.path.join(tmp, "summary.json"), "w") as fh:
        fh.write(dumps(summary.to_json()))
    with open(os.path.join(tmp, "timing.json"), "w") as fh:
        fh.write(dumps({"wall_time": summary.wall_time}))
    return files


def _publish(tmp, out):
    old = None
    if os.path.exists(out):
        old = tempfile.mkdtemp(prefix=".old-", dir=os.path.dirname(out) or ".")
        os.rmdir(old)
        os.replace(out, old)
    os.replace(tmp, out)
    if old:
        shutil.rmtree(old, ignore_errors=True)


def run_scenario(cfg, out_dir=None, workers=None):
    """Run ``cfg.scenario`` and publish its files to ``out_dir`` (default ``cfg.out``)."""
    out = os.path.abspath(out_dir or cfg.out)
    workers = resolve_workers(workers if workers is not None else cfg.workers)
    parent = os.path.dirname(out)
    os.makedirs(parent, exist_ok=True)
    start = time.perf_counter()
    try:
        stages, warnings, table, plots, failures, (npass, nfail) = SCENARIOS[cfg.scenario](cfg, workers)
    except GPExtremesError as exc:
        raise ScenarioError(f"scenario {cfg.name!r} ({cfg.scenario}): {exc}") from exc
    summary = ReportSummary(cfg.scenario, cfg.name, version_string(), cfg.to_json(), stages, warnings,
                            failures, npass, nfail, time.perf_counter() - start, out)
    tmp = tempfile.mkdtemp(prefix=".tmp-", dir=parent)
    try:
        summary.files = _write_outputs(tmp, summary, table, plots)
        _publish(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return summary
