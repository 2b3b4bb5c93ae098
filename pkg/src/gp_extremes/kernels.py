"""Unit-variance covariance models for the three correlation-decay regimes.

Radial profiles ``w(r)`` with ``w(0) = 1``:

=============  ==========================================  =========
family         w(r), r > 0                                 regime
=============  ==========================================  =========
iid-delta      0                                           berman
log-power      log(e + r) ** -a,  0 < a < 1                strong
boundary-log   min(1, mu / log(e + r))                     boundary
power-law      (1 + r) ** -a,  a > 0                       berman
exponential    exp(-r)                                     berman
=============  ==========================================  =========

All decaying families are completely monotone in ``r`` (mixtures of
exponentials), hence positive definite in every dimension.  The
boundary-log family has a flat top on ``r <= r0 = exp(mu) - e``; a grid
using it must have mesh larger than ``r0`` so distinct sites stay
strictly less than perfectly correlated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NotPositiveDefinite, ValidationError

FAMILIES = ("iid-delta", "log-power", "boundary-log", "power-law", "exponential")
REGIMES = {
    "iid-delta": "berman",
    "log-power": "strong",
    "boundary-log": "boundary",
    "power-law": "berman",
    "exponential": "berman",
}
DEFORMATIONS = (None, "sine")
TOL_PSD = 1e-8


@dataclass(frozen=True)
class KernelProfile:
    family: str
    a: float = 0.5
    mu: float = 3.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError("family", f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "log-power" and not 0.0 < self.a < 1.0:
            raise ValidationError("a", f"log-power exponent must lie in (0, 1), got {self.a}")
        if self.family == "power-law" and not self.a > 0.0:
            raise ValidationError("a", f"power-law exponent must be positive, got {self.a}")
        if self.family == "boundary-log" and not self.mu > 0.0:
            raise ValidationError("mu", f"boundary constant must be positive, got {self.mu}")

    @property
    def regime(self):
        return REGIMES[self.family]

    @property
    def flat_radius(self):
        """Radius below which the boundary-log profile is clipped to 1."""
        if self.family != "boundary-log":
            return 0.0
        return max(0.0, math.exp(self.mu) - math.e)

    def __call__(self, r):
        return eval_profile(self, r)

    def log(self, r):
        """``log w(r)``, finite where ``w`` would underflow."""
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(divide="ignore"):
            if self.family == "exponential":
                out = -r
            elif self.family == "log-power":
                out = -self.a * np.log(np.log(np.e + r))
            elif self.family == "power-law":
                out = -self.a * np.log1p(r)
            else:
                out = np.log(eval_profile(self, r))
        return out[()] if out.ndim == 0 else out

    def spec(self):
        if self.family in ("log-power", "power-law"):
            return f"family={self.family} a={self.a!r}"
        if self.family == "boundary-log":
            return f"family={self.family} mu={self.mu!r}"
        return f"family={self.family}"


def eval_profile(profile, r):
    """Evaluate the radial profile ``w(r)`` (vectorised over ``r >= 0``)."""
    r = np.asarray(r, dtype=np.float64)
    fam = profile.family
    if fam == "iid-delta":
        out = np.where(r == 0.0, 1.0, 0.0)
    elif fam == "log-power":
        out = np.log(np.e + r) ** -profile.a
    elif fam == "boundary-log":
        out = np.minimum(1.0, profile.mu / np.log(np.e + r))
        out = np.where(r == 0.0, 1.0, out)
    elif fam == "power-law":
        out = (1.0 + r) ** -profile.a
    else:
        out = np.exp(-r)
    return out[()] if out.ndim == 0 else out


def deform(points, deformation):
    """Apply the coordinatewise time change ``tau``; identity when None."""
    points = np.asarray(points, dtype=np.float64)
    if deformation is None:
        return points
    if deformation == "sine":
        return points + np.sin(points)
    raise ValidationError("deformation", f"unknown deformation {deformation!r}")


@dataclass(frozen=True)
class CovarianceModel:
    """``K(x, y) = (1 - nugget) w(|tau(x) - tau(y)|) + nugget [x == y]``."""

    profile: KernelProfile
    d: int = 1
    deformation: Optional[str] = None
    nugget: float = 0.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValidationError("d", f"dimension must be 1 or 2, got {self.d}")
        if self.deformation not in DEFORMATIONS:
            raise ValidationError("deformation", f"unknown deformation {self.deformation!r}")
        if not 0.0 <= self.nugget < 1.0:
            raise ValidationError("nugget", f"nugget must lie in [0, 1), got {self.nugget}")

    @property
    def stationary(self):
        return self.deformation is None

    @property
    def regime(self):
        return self.profile.regime

    def lag_cov(self, r):
        """Covariance at (deformed) separation ``r``."""
        r = np.asarray(r, dtype=np.float64)
        w = eval_profile(self.profile, r)
        if self.nugget:
            w = np.where(r == 0.0, 1.0, (1.0 - self.nugget) * w)
        return w

    def eval_cov(self, x, y):
        """Covariance between sites ``x`` and ``y`` (arrays of shape (..., d))."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if self.d == 1 and (y.ndim == 0 or y.shape[-1] != 1):
            y = y[..., None]
        diff = deform(x, self.deformation) - deform(y, self.deformation)
        out = self.lag_cov(np.sqrt(np.sum(diff * diff, axis=-1)))
        return out[()] if np.ndim(out) == 0 else out

    def validate_grid(self, grid):
        r0 = self.profile.flat_radius
        if grid.n > 1 and grid.eps <= r0:
            raise ValidationError(
                "eps", f"mesh {grid.eps} must exceed the boundary-log flat radius {r0:.6g}")
        if grid.d != self.d:
            raise ValidationError("d", f"grid dimension {grid.d} != model dimension {self.d}")

    def envelope(self, r):
        """Decreasing envelope ``omega`` with ``K(x, y) <= omega(|x - y|)``.

        The sine time change satisfies ``|tau(x) - tau(y)| >= |x - y| - 2``
        coordinatewise, so the envelope is the profile shifted by
        ``2 sqrt(d)`` (clipped at 0).
        """
        r = np.asarray(r, dtype=np.float64)
        if self.stationary:
            return eval_profile(self.profile, r)
        return eval_profile(self.profile, np.maximum(r - 2.0 * math.sqrt(self.d), 0.0))


@dataclass
class CovarianceMatrix:
    matrix: np.ndarray
    repaired: bool = False
    min_eig: float = float("nan")
    max_eig: float = float("nan")
    warnings: list = field(default_factory=list)


def build_cov_matrix(model, grid, tol_psd=TOL_PSD, check=True):
    """Dense covariance matrix of ``model`` on ``grid``.

    Raises
    ------
    NotPositiveDefinite
        If the smallest eigenvalue is below ``-tol_psd * largest``.
    """
    model.validate_grid(grid)
    pts = deform(grid.points, model.deformation)
    if grid.n == 1:
        return CovarianceMatrix(np.ones((1, 1)), min_eig=1.0, max_eig=1.0)
    k = model.lag_cov(cdist(pts, pts))
    k = np.triu(k, 1)
    k = k + k.T
    np.fill_diagonal(k, 1.0)
    out = CovarianceMatrix(k)
    if not check:
        return out
    lam, vec = np.linalg.eigh(k)
    out.min_eig, out.max_eig = float(lam[0]), float(lam[-1])
    if lam[0] < -tol_psd * lam[-1]:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {lam[0]:.3e} below -{tol_psd:g} x largest {lam[-1]:.3e} "
            f"for {model.profile.spec()} on {grid}")
    if lam[0] < 0.0:
        fixed = (vec * np.maximum(lam, 0.0)) @ vec.T
        s = np.sqrt(np.diag(fixed))
        fixed = fixed / np.outer(s, s)
        fixed = np.triu(fixed, 1)
        fixed = fixed + fixed.T
        np.fill_diagonal(fixed, 1.0)
        out.matrix = fixed
        out.repaired = True
        out.warnings.append(("build_cov_matrix", f"clipped eigenvalues down to {lam[0]:.3e}"))
    return out


def export_matrix_csv(matrix, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(matrix):
            writer.writerow([repr(float(v)) for v in row])


def parse_kernel_spec(text):
    """Parse ``"family=log-power a=0.5 deformation=sine"`` into a dict of fields."""
    out = {}
    for token in text.split():
        if "=" not in token:
            raise ValidationError("kernel", f"expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        if key in out:
            raise ValidationError(key, "given twice in kernel spec")
        if key in ("a", "mu", "nugget"):
            try:
                out[key] = float(value)
            except ValueError:
                raise ValidationError(key, f"not a number: {value!r}") from None
        elif key == "family":
            out[key] = value
        elif key == "deformation":
            out[key] = None if value in ("none", "") else value
        else:
            raise ValidationError(key, "unknown kernel key")
    return out


def model_from_spec(text, d=1):
    fields_ = parse_kernel_spec(text)
    profile = KernelProfile(**{k: fields_[k] for k in ("family", "a", "mu") if k in fields_})
    return CovarianceModel(profile, d=d, deformation=fields_.get("deformation"),
                           nugget=fields_.get("nugget", 0.0))
