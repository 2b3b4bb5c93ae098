"""Plain-text experiment configuration.

One ``key=value`` token per setting, ``#`` starts a comment.  Several
tokens may share a line (``family=log-power a=0.5``), which keeps kernel
specs readable; a key may still appear only once per file.  Lists are
comma-separated.

Recognised keys and defaults are in :data:`DEFAULTS`; anything else is an
error.  ``seed`` has no default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..errors import GPExtremesError, ParseError, ValidationError
from ..kernels import CovarianceModel, KernelProfile

SCENARIOS = ("sample", "experiment", "flatness", "verify")
BACKENDS = ("auto", "cholesky", "fft")
MIN_BUDGET = 100

DEFAULTS = {
    "scenario": "experiment",
    "name": None,
    "family": "log-power",
    "a": 0.5,
    "mu": 3.0,
    "nugget": 0.0,
    "deformation": None,
    "d": 1,
    "schedule": (1024,),
    "eps": 1.0,
    "replicates": 1000,
    "coeff_replicates": None,
    "seed": None,
    "backend": "auto",
    "out": "out",
    "workers": None,
    "beta": 0.5,
    "eta": 0.1,
    "flat_beta": (0.05, 0.17, 0.5),
    "t_grid": (0.0, 0.25, 0.5, 0.75, 0.9),
    "cell": None,
    "coupled": True,
}

_INT = {"d", "replicates", "coeff_replicates", "workers", "cell"}
_FLOAT = {"a", "mu", "nugget", "eps", "beta", "eta"}
_INT_LIST = {"schedule"}
_FLOAT_LIST = {"flat_beta", "t_grid"}
_BOOL = {"coupled"}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    scenario: str = "experiment"
    name: str = "experiment"
    family: str = "log-power"
    a: float = 0.5
    mu: float = 3.0
    nugget: float = 0.0
    deformation: str = None
    d: int = 1
    schedule: tuple = (1024,)
    eps: float = 1.0
    replicates: int = 1000
    coeff_replicates: int = 1000
    backend: str = "auto"
    out: str = "out"
    workers: int = None
    beta: float = 0.5
    eta: float = 0.1
    flat_beta: tuple = (0.05, 0.17, 0.5)
    t_grid: tuple = (0.0, 0.25, 0.5, 0.75, 0.9)
    cell: int = None
    coupled: bool = True
    sources: dict = field(default_factory=dict, compare=False)

    def profile(self):
        return KernelProfile(self.family, self.a, self.mu)

    def model(self):
        return CovarianceModel(self.profile(), d=self.d, deformation=self.deformation,
                               nugget=self.nugget)

    def kernel_spec(self):
        out = self.profile().spec()
        if self.deformation:
            out += f" deformation={self.deformation}"
        if self.nugget:
            out += f" nugget={self.nugget!r}"
        return out

    def to_json(self):
        """Settings that determine the results (not output location or worker count)."""
        skip = {"out", "workers", "sources"}
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name not in skip}

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _convert(key, value):
    try:
        if key in _INT:
            return int(value)
        if key in _FLOAT:
            return float(value)
        if key in _INT_LIST:
            return tuple(int(v) for v in value.split(",") if v)
        if key in _FLOAT_LIST:
            return tuple(float(v) for v in value.split(",") if v)
        if key in _BOOL:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if key == "seed":
            seed = int(value, 0)
            if not 0 <= seed < 2 ** 64:
                raise ValueError(value)
            return seed
        if key == "deformation":
            return None if value.lower() in ("none", "") else value
    except ValueError:
        raise ValidationError(key, f"cannot parse {value!r}") from None
    return value


def parse_tokens(text):
    """Raw ``{key: string}`` mapping; ParseError carries the 1-based line number."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        for token in body.split():
            if "=" not in token:
                raise ParseError(f"expected key=value, got {token!r}", lineno)
            key, value = token.split("=", 1)
            if not key:
                raise ParseError(f"empty key in {token!r}", lineno)
            if key in raw:
                raise ParseError(f"duplicate key {key!r} (first on line {raw[key][1]})", lineno)
            if key not in DEFAULTS:
                raise ParseError(f"unknown key {key!r}", lineno)
            raw[key] = (value, lineno)
    return {k: v for k, (v, _) in raw.items()}


def build_config(values, sources=None):
    """Validate a ``{key: converted value}`` mapping into an ExperimentConfig."""
    merged = {k: v for k, v in DEFAULTS.items()}
    merged.update(values)
    if merged["seed"] is None:
        raise ValidationError("seed", "a master seed is required")
    if merged["scenario"] not in SCENARIOS:
        raise ValidationError("scenario", f"expected one of {SCENARIOS}")
    if merged["backend"] not in BACKENDS:
        raise ValidationError("backend", f"expected one of {BACKENDS}")
    if merged["d"] not in (1, 2):
        raise ValidationError("d", "dimension must be 1 or 2")
    if not merged["eps"] > 0:
        raise ValidationError("eps", "mesh must be positive")
    sched = merged["schedule"]
    if not sched or any(s < 2 for s in sched):
        raise ValidationError("schedule", "need at least one size of two or more points per axis")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValidationError("schedule", "sizes must be strictly increasing")
    if merged["coeff_replicates"] is None:
        merged["coeff_replicates"] = merged["replicates"]
    for key in ("replicates", "coeff_replicates"):
        if merged[key] < MIN_BUDGET:
            raise ValidationError(key, f"budget must be at least {MIN_BUDGET}")
    if merged["workers"] is not None and merged["workers"] < 1:
        raise ValidationError("workers", "must be at least 1")
    if not 0 < merged["beta"] < 1:
        raise ValidationError("beta", "must lie in (0, 1)")
    if not merged["eta"] > 0:
        raise ValidationError("eta", "must be positive")
    if any(not 0 < b < 1 for b in merged["flat_beta"]):
        raise ValidationError("flat_beta", "each value must lie in (0, 1)")
    if any(not 0 <= t <= 1 for t in merged["t_grid"]):
        raise ValidationError("t_grid", "each value must lie in [0, 1]")
    if merged["cell"] is not None and merged["cell"] < 1:
        raise ValidationError("cell", "must be at least 1")
    if merged["name"] is None:
        merged["name"] = merged["scenario"]
    cfg = ExperimentConfig(**merged, sources=dict(sources or {}))
    try:
        cfg.model()
    except ValidationError:
        raise
    except (GPExtremesError, ValueError) as exc:
        raise ValidationError("kernel", str(exc)) from None
    return cfg


def parse_config(text, overrides=None):
    """Parse and validate config text.

    ``overrides`` (already typed, e.g. from command-line flags) win over the
    file, which wins over :data:`DEFAULTS`.
    """
    raw = parse_tokens(text)
    values = {k: _convert(k, v) for k, v in raw.items()}
    sources = {k: "file" for k in values}
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in DEFAULTS:
            raise ValidationError(k, "unknown setting")
        values[k] = v
        sources[k] = "flag"
    return build_config(values, sources)
