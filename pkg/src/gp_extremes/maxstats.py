"""Maximum, argmax and soft-max functionals of sampled fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend

BETA_LADDER = (1.0, 4.0, 16.0, 64.0, 256.0)


@dataclass(frozen=True)
class MaxRecord:
    M: float
    I: int
    tie_flag: bool = False


@dataclass
class ArgmaxDistribution:
    p: np.ndarray
    sample_count: int

    def mass(self, indices):
        return float(self.p[np.asarray(indices)].sum())


def argmax_max(values):
    """Max and lowest maximising index of one sample (a FieldSample or a vector)."""
    values = getattr(values, "values", values)
    row = np.asarray(values, dtype=np.float64).reshape(1, -1)
    m, i, tie = backend.argmax_rows(row)
    return MaxRecord(float(m[0]), int(i[0]), bool(tie[0]))


def argmax_rows(values):
    """Vectorised :func:`argmax_max` over rows: arrays ``(M, I, tie)``."""
    return backend.argmax_rows(np.ascontiguousarray(values, dtype=np.float64))


def softmax_value(values, beta):
    """``beta^-1 log sum_i exp(beta x_i)``; lies in ``[max x, max x + log(n) / beta]``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    values = np.asarray(values, dtype=np.float64)
    f, _ = backend.softmax_rows(np.ascontiguousarray(values.reshape(-1, values.shape[-1])), float(beta))
    return float(f[0]) if values.ndim == 1 else f


def softmax_gradient(values, beta):
    """Gradient of :func:`softmax_value`: the Gibbs weights ``exp(beta x_i) / sum_j exp(beta x_j)``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    values = np.asarray(values, dtype=np.float64)
    _, g = backend.softmax_rows(np.ascontiguousarray(values.reshape(-1, values.shape[-1])), float(beta))
    return g[0] if values.ndim == 1 else g


def softmax_rows(values, beta):
    return backend.softmax_rows(np.ascontiguousarray(values, dtype=np.float64), float(beta))


def estimate_argmax_distribution(indices, n):
    """Empirical law of the argmax from records or raw indices over ``n`` sites."""
    idx = np.asarray([r.I if isinstance(r, MaxRecord) else r for r in indices], dtype=np.int64) \
        if not isinstance(indices, np.ndarray) else indices.astype(np.int64)
    if idx.size == 0:
        raise ValueError("need at least one replicate")
    counts = np.bincount(idx, minlength=n).astype(np.float64)
    return ArgmaxDistribution(counts / idx.size, int(idx.size))


def beta_ladder(spread=1.0):
    """The geometric ladder ``{1, 4, 16, 64, 256}`` scaled by ``1 / spread``."""
    return tuple(b / spread for b in BETA_LADDER)
