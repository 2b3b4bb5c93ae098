"""Per-replicate records and the raw replicate CSV dump.

CSV header is exactly ``replicate_id,t,M,I,M_t,I_t,Q1``; missing values
(no coupling, no coefficients) are written as empty fields.  Floats are
written with ``repr`` so a round trip is bit-exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .maxstats import argmax_rows
from .rng import Purpose
from .sampling import couple_values, map_replicates

CSV_HEADER = ("replicate_id", "t", "M", "I", "M_t", "I_t", "Q1")
STRATA = 16


@dataclass(frozen=True)
class ReplicateRecord:
    replicate_id: int
    M: float
    I: int
    t: Optional[float] = None
    M_t: Optional[float] = None
    I_t: Optional[int] = None
    Q1: Optional[float] = None


@dataclass
class ReplicateTable:
    """Column store of replicate records; optional columns may be None."""

    replicate_id: np.ndarray
    M: np.ndarray
    I: np.ndarray
    tie: np.ndarray
    t: Optional[np.ndarray] = None
    M_t: Optional[np.ndarray] = None
    I_t: Optional[np.ndarray] = None
    Q1: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.M)

    def records(self):
        cols = [getattr(self, c) for c in CSV_HEADER]
        for k in range(len(self)):
            vals = [None if c is None else c[k].item() for c in cols]
            yield ReplicateRecord(vals[0], vals[2], vals[3], vals[1], vals[4], vals[5], vals[6])

    @classmethod
    def concat(cls, parts):
        def cat(name):
            cols = [getattr(p, name) for p in parts]
            return None if cols[0] is None else np.concatenate(cols)
        return cls(**{name: cat(name) for name in cls.__dataclass_fields__})


def stratified_times(u, ids, strata=STRATA):
    """Map uniforms to ``t`` so replicate ``r`` falls in stratum ``r mod strata``."""
    return ((np.asarray(ids) % strata) + u) / strata


def simulate(sampler, ids, coeffs=None, coupled=False, stratified=False, t=None,
             workers=None, extra=None):
    """Draw replicates ``ids`` and record max, argmax and optional coupled/Q1 columns.

    ``t`` fixes the coupling parameter; otherwise each coupled replicate draws
    ``t ~ U[0, 1]`` from its own TIME stream (stratified into 16 equal
    strata when ``stratified``).  ``extra(chunk_ids, X)`` may return one
    more per-chunk value, returned alongside the table as a list.
    """
    p = None if coeffs is None else np.asarray(getattr(coeffs, "p", coeffs), dtype=np.float64)
    coupled = coupled or t is not None

    def fn(chunk, x):
        m, i, tie = argmax_rows(x)
        part = ReplicateTable(chunk.copy(), m, i, tie)
        if p is not None:
            part.Q1 = x @ p
        if coupled:
            if t is None:
                u = rng.uniforms(sampler.seed, chunk, Purpose.TIME, 1)[:, 0]
                tt = stratified_times(u, chunk) if stratified else u
            else:
                tt = np.full(len(chunk), float(t))
            xt = couple_values(x, sampler.draw(chunk, Purpose.COUPLE), tt)
            part.t = tt
            part.M_t, part.I_t, _ = argmax_rows(xt)
        return part, (extra(chunk, x) if extra is not None else None)

    out = map_replicates(sampler, ids, fn, workers)
    table = ReplicateTable.concat([o[0] for o in out])
    if extra is not None:
        return table, [o[1] for o in out]
    return table


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(table, path):
    cols = [getattr(table, c) for c in CSV_HEADER]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k in range(len(table)):
            w.writerow([_fmt(None if c is None else c[k].item()) for c in cols])


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected replicate CSV header {header}")
        rows = list(reader)
    if not rows:
        raise ValueError("replicate CSV has no rows")
    cols = list(zip(*rows))

    def column(k, kind):
        if any(v == "" for v in cols[k]):
            return None
        return np.array([kind(v) for v in cols[k]], dtype=np.int64 if kind is int else np.float64)

    table = ReplicateTable(
        replicate_id=column(0, int), M=column(2, float), I=column(3, int),
        tie=np.zeros(len(rows), dtype=bool), t=column(1, float), M_t=column(4, float),
        I_t=column(5, int), Q1=column(6, float))
    return table


def replicate_statistics(table, cov_entries=None):
    """Summary statistics recomputable from the CSV columns alone (plus ``K``)."""
    n = len(table)
    out = {
        "count": n,
        "mean_M": float(np.mean(table.M)),
        "var_M": float(np.var(table.M, ddof=1)),
        "se_mean_M": float(np.std(table.M, ddof=1) / math.sqrt(n)),
    }
    if table.Q1 is not None:
        out["var_Q1_sample"] = float(np.var(table.Q1, ddof=1))
    if table.I_t is not None and cov_entries is not None:
        k = np.asarray(cov_entries(table.I, table.I_t), dtype=np.float64)
        out["var_M_chatterjee"] = float(np.mean(k))
        out["se_var_M_chatterjee"] = float(np.std(k, ddof=1) / math.sqrt(n))
    return out
