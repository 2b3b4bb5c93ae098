"""Exact Gaussian samplers on lattices.

Two backends share one interface (:class:`Sampler`):

* :class:`CholeskySampler` -- dense factor ``Q`` with ``X = Q Z``; the
  reference backend, and the only one for deformed (nonstationary) models.
* :class:`FFTSampler` -- circulant embedding for stationary models in
  one or two dimensions.  A real white-noise vector ``W`` of the embedding
  size is scaled by ``sqrt(lambda / m)`` and transformed; the sum of the
  real and imaginary parts of the transform (a Hartley transform) has
  exactly the circulant covariance, so each replicate needs one real FFT.

Randomness comes from counter-based streams (:mod:`gp_extremes.rng`), and
work is split into chunks whose size depends only on the problem size, so
results do not depend on the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft
import scipy.linalg

from . import rng
from .errors import EmbeddingFailure, FactorizationFailure, ValidationError
from .kernels import TOL_PSD, build_cov_matrix, deform
from .rng import Purpose

JITTER_LADDER = (1e-12, 1e-10, 1e-8)
CHOLESKY_MAX_N = 4096
FFT_MAX_N_2D = 512
_CHUNK_BUDGET = 1 << 21  # doubles of white noise per chunk


@dataclass(frozen=True)
class LatticeGrid:
    """Sites of ``[0, R]^d`` on the lattice ``eps Z^d``, in row-major order."""

    d: int
    R: float
    eps: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValidationError("d", f"dimension must be 1 or 2, got {self.d}")
        if not self.R >= 0 or not self.eps > 0:
            raise ValidationError("R", f"need R >= 0 and eps > 0, got R={self.R}, eps={self.eps}")

    @classmethod
    def from_points(cls, per_axis, d=1, eps=1.0):
        return cls(d, (per_axis - 1) * eps, eps)

    @property
    def per_axis(self):
        return int(math.floor(self.R / self.eps + 1e-9)) + 1

    @property
    def shape(self):
        return (self.per_axis,) * self.d

    @property
    def n(self):
        return self.per_axis ** self.d

    @property
    def points(self):
        return self.eps * self.coords(np.arange(self.n))

    def coords(self, idx):
        """Integer lattice coordinates of flat indices, shape (len(idx), d)."""
        idx = np.asarray(idx, dtype=np.int64)
        return np.stack(np.unravel_index(idx, self.shape), axis=-1)

    def subgrid_indices(self, coarse):
        """Flat indices in ``self`` of the sites of a nested coarser grid."""
        ratio = coarse.eps / self.eps
        step = int(round(ratio))
        if abs(ratio - step) > 1e-9 or coarse.d != self.d or coarse.per_axis > (self.per_axis - 1) // step + 1:
            raise ValidationError("eps", f"{coarse} is not nested in {self}")
        axis = np.arange(coarse.per_axis) * step
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.ravel_multi_index(tuple(m.ravel() for m in mesh), self.shape)

    def __str__(self):
        return f"LatticeGrid(d={self.d}, R={self.R:g}, eps={self.eps:g}, n={self.n})"


@dataclass
class FieldSample:
    grid: Optional[LatticeGrid]
    values: np.ndarray
    replicate_id: int
    seed: int


@dataclass
class CoupledSample:
    base: FieldSample
    t: float
    values: np.ndarray


# ---------------------------------------------------------------------------
# factorisation and embedding


@dataclass
class CholeskyFactor:
    lower: np.ndarray
    jitter: float


def cholesky_sampler(matrix, jitter=0.0):
    """Lower Cholesky factor of ``matrix + jitter I``, escalating jitter on failure.

    Raises
    ------
    FactorizationFailure
        If the factorisation fails at every jitter in ``(jitter,) + JITTER_LADDER``.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    eye = np.eye(matrix.shape[0])
    ladder = [jitter] + [j for j in JITTER_LADDER if j > jitter]
    for jit in ladder:
        try:
            lower = scipy.linalg.cholesky(matrix + jit * eye, lower=True, check_finite=True)
        except np.linalg.LinAlgError:
            continue
        return CholeskyFactor(lower, jit)
    raise FactorizationFailure(f"Cholesky failed up to jitter {ladder[-1]:g} (n={matrix.shape[0]})")


@dataclass
class Spectrum:
    """Eigenvalues of the circulant (or block-circulant) embedding."""

    values: np.ndarray
    raw: np.ndarray
    per_axis: int
    eps: float
    clipped: bool = False
    doublings: int = 0
    negative_mass: float = 0.0

    @property
    def d(self):
        return self.values.ndim

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.per_axis ** self.d


def _embedding_row(cov, m, eps, d):
    k = np.arange(m)
    lag = np.minimum(k, m - k).astype(np.float64)
    if d == 1:
        return np.asarray(cov(eps * lag), dtype=np.float64)
    r = eps * np.sqrt(lag[:, None] ** 2 + lag[None, :] ** 2)
    return np.asarray(cov(r), dtype=np.float64)


def embedding_size(per_axis, minimal=False):
    m = max(2 * (per_axis - 1), 1)
    if minimal or m == 1:
        return m
    return sfft.next_fast_len(m, real=True)


def circulant_embed(cov, per_axis, eps=1.0, d=1, tol_psd=TOL_PSD, max_doublings=4, minimal=False):
    """Spectrum of the circulant extension of the lag covariances ``cov(eps k)``.

    ``cov`` is any callable of the separation (a :class:`KernelProfile`,
    or ``CovarianceModel.lag_cov``).  Negative eigenvalues down to
    ``-tol_psd * max`` are clipped to zero and flagged; beyond that the
    embedding is doubled, up to ``max_doublings`` times.

    Raises
    ------
    EmbeddingFailure
        If negative spectral mass persists after all doublings.
    """
    m0 = embedding_size(per_axis, minimal)
    worst = None
    for doubling in range(max_doublings + 1):
        m = m0 * 2 ** doubling
        row = _embedding_row(cov, m, eps, d)
        raw = sfft.fftn(row).real
        top = raw.max()
        low = raw.min()
        if low >= -tol_psd * top:
            neg = raw < 0
            values = np.where(neg, 0.0, raw)
            return Spectrum(values, raw, per_axis, eps, clipped=bool(neg.any()),
                            doublings=doubling, negative_mass=float(-raw[neg].sum()))
        worst = low / top
        if m == 1:
            break
    raise EmbeddingFailure(
        f"circulant embedding has relative eigenvalue {worst:.3e} after {max_doublings} doublings")


# ---------------------------------------------------------------------------
# samplers


class Sampler:
    """Common interface: batched draws keyed by replicate id and purpose."""

    n: int
    grid: Optional[LatticeGrid]
    seed: int
    warnings: list
    name = "sampler"

    def draw(self, ids, tag=Purpose.BASE):
        raise NotImplementedError

    def cov_entries(self, i, j):
        raise NotImplementedError

    def cov_matvec(self, v):
        raise NotImplementedError

    @property
    def chunk_size(self):
        return max(1, min(1024, _CHUNK_BUDGET // max(self.noise_size, 1)))

    def sample(self, replicate_id, tag=Purpose.BASE):
        values = self.draw([replicate_id], tag)[0]
        return FieldSample(self.grid, values, int(replicate_id), self.seed)


class CholeskySampler(Sampler):
    name = "cholesky"

    def __init__(self, matrix, seed, grid=None, jitter=0.0, model=None):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.factor = cholesky_sampler(self.matrix, jitter)
        self.n = self.matrix.shape[0]
        self.grid = grid
        self.seed = int(seed)
        self.model = model
        self.warnings = []
        if self.factor.jitter > 0:
            self.warnings.append(("cholesky_sampler", f"jitter {self.factor.jitter:g} added"))

    @property
    def noise_size(self):
        return self.n

    def draw(self, ids, tag=Purpose.BASE):
        z = rng.normals(self.seed, ids, tag, self.n)
        return z @ self.factor.lower.T

    def cov_entries(self, i, j):
        return self.matrix[np.asarray(i), np.asarray(j)]

    def cov_matvec(self, v):
        return self.matrix @ np.asarray(v, dtype=np.float64)


class FFTSampler(Sampler):
    name = "fft"

    def __init__(self, spectrum, seed, grid=None, model=None):
        self.spectrum = spectrum
        self.grid = grid
        self.model = model
        self.seed = int(seed)
        self.n = spectrum.n
        self._scale = np.sqrt(spectrum.values / spectrum.values.size)
        self.warnings = []
        if spectrum.clipped:
            self.warnings.append(
                ("circulant_embed", f"clipped negative spectral mass {spectrum.negative_mass:.3e}"))
        if spectrum.doublings:
            self.warnings.append(("circulant_embed", f"embedding doubled {spectrum.doublings} times"))

    @property
    def noise_size(self):
        return self.spectrum.values.size

    def draw(self, ids, tag=Purpose.BASE):
        sp = self.spectrum
        k = len(np.atleast_1d(ids))
        w = rng.normals(self.seed, ids, tag, sp.values.size).reshape((k,) + sp.values.shape)
        w *= self._scale
        p = sp.per_axis
        if sp.d == 1:
            y = sfft.rfft(w, axis=1)[:, :p]
        else:
            y = sfft.rfftn(w, axes=(1, 2))[:, :p, :p]
        out = y.real + y.imag
        return np.ascontiguousarray(out.reshape(k, self.n))

    def cov_entries(self, i, j):
        pts = self.grid.points
        return self.model.eval_cov(pts[np.asarray(i)], pts[np.asarray(j)])

    def cov_matvec(self, v):
        sp = self.spectrum
        p = sp.per_axis
        pad = np.zeros(sp.raw.shape)
        if sp.d == 1:
            pad[:p] = v
            return sfft.ifft(sp.raw * sfft.fft(pad)).real[:p]
        pad[:p, :p] = np.asarray(v).reshape(p, p)
        return sfft.ifftn(sp.raw * sfft.fftn(pad)).real[:p, :p].ravel()


def make_sampler(model, grid, seed, backend="auto"):
    """Build a sampler for ``model`` on ``grid``.

    ``auto`` uses Cholesky for deformed models and for ``n <= 4096``, and
    the FFT backend otherwise.
    """
    model.validate_grid(grid)
    if backend == "auto":
        backend = "cholesky" if (not model.stationary or grid.n <= CHOLESKY_MAX_N) else "fft"
    if backend == "cholesky":
        cm = build_cov_matrix(model, grid)
        s = CholeskySampler(cm.matrix, seed, grid=grid, model=model)
        s.warnings = cm.warnings + s.warnings
        return s
    if backend == "fft":
        if not model.stationary:
            raise ValidationError("backend", "the FFT backend needs a stationary model")
        if grid.d == 2 and grid.per_axis > FFT_MAX_N_2D:
            raise ValidationError("backend", f"2D FFT sampling is capped at {FFT_MAX_N_2D}^2 sites")
        spec = circulant_embed(model.lag_cov, grid.per_axis, grid.eps, grid.d)
        return FFTSampler(spec, seed, grid=grid, model=model)
    raise ValidationError("backend", f"unknown backend {backend!r}")


def sample_stationary_fft(spectrum, stream, grid=None):
    """One circulant-embedding sample drawn from ``stream``."""
    s = FFTSampler(spectrum, stream.seed, grid=grid)
    values = s.draw([stream.replicate_id], stream.tag)[0]
    return FieldSample(grid, values, stream.replicate_id, stream.seed)


def couple(base, t, sampler, tag=Purpose.COUPLE):
    """Ornstein-Uhlenbeck coupling ``t f + sqrt(1 - t^2) f~`` of a FieldSample."""
    if not 0.0 <= t <= 1.0:
        raise ValidationError("t", f"coupling parameter must lie in [0, 1], got {t}")
    fresh = sampler.draw([base.replicate_id], tag)[0]
    return CoupledSample(base, t, couple_values(base.values, fresh, t))


def couple_values(base, fresh, t):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    return t * base + np.sqrt(1.0 - t * t) * fresh


# ---------------------------------------------------------------------------
# replicate engine


DEFAULT_WORKERS = 1


def resolve_workers(workers=None):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("GP_EXTREMES_WORKERS")
    if env:
        return max(1, int(env))
    return DEFAULT_WORKERS


def chunks(ids, size):
    ids = np.asarray(ids, dtype=np.int64)
    return [ids[i:i + size] for i in range(0, len(ids), size)]


def map_replicates(sampler, ids, fn, workers=None, tag=Purpose.BASE):
    """Apply ``fn(chunk_ids, X)`` to base draws chunk by chunk, results in id order.

    Chunk boundaries depend only on ``sampler.chunk_size``; the worker
    count changes scheduling, never results.
    """
    parts = chunks(ids, sampler.chunk_size)

    def work(chunk):
        return fn(chunk, sampler.draw(chunk, tag))

    nw = resolve_workers(workers)
    if nw == 1 or len(parts) == 1:
        return [work(c) for c in parts]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(work, parts))


@dataclass
class RefinementRow:
    eps: float
    n: int
    mean_M: float
    se_M: float
    mean_increment: float = float("nan")
    se_increment: float = float("nan")
    monotone_violations: int = 0


def refine_grid_study(model, R, eps_schedule, replicates, seed, backend="auto", workers=None):
    """Maxima on nested grids ``eps_0 > eps_0/2 > ...`` from one fine-grid draw per replicate.

    Returns one :class:`RefinementRow` per mesh; ``mean_increment`` is the
    mean of ``M_{R,eps} - M_{R,2 eps}`` and ``monotone_violations`` counts
    replicates whose maximum decreased under refinement (always 0 for
    nested grids).
    """
    eps_schedule = [float(e) for e in eps_schedule]
    for a, b in zip(eps_schedule, eps_schedule[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ValidationError("eps", "schedule must halve at each step")
    grids = [LatticeGrid(model.d, R, e) for e in eps_schedule]
    fine = grids[-1]
    sampler = make_sampler(model, fine, seed, backend)
    subsets = [fine.subgrid_indices(g) for g in grids]

    def fn(chunk, x):
        return np.stack([x[:, s].max(axis=1) for s in subsets], axis=1)

    maxima = np.concatenate(map_replicates(sampler, np.arange(replicates), fn, workers))
    rows = []
    for k, g in enumerate(grids):
        col = maxima[:, k]
        row = RefinementRow(g.eps, g.n, float(col.mean()), float(col.std(ddof=1) / math.sqrt(replicates)))
        if k:
            inc = col - maxima[:, k - 1]
            row.mean_increment = float(inc.mean())
            row.se_increment = float(inc.std(ddof=1) / math.sqrt(replicates))
            row.monotone_violations = int(np.count_nonzero(inc < 0))
        rows.append(row)
    return rows
