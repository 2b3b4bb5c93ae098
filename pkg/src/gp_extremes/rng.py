"""Counter-based random streams.

A stream is identified by ``(master seed, replicate id, purpose tag)``.
Block ``j`` of a stream is the Philox4x32-10 encryption of the counter
``(j, id_lo, id_hi, tag)`` under the key ``(seed_lo, seed_hi)``, so any
replicate's draws can be regenerated in isolation, in any order, by any
worker.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import backend


class Purpose(IntEnum):
    BASE = 0
    COUPLE = 1
    TIME = 2
    COEFFS = 3
    MISC = 15


def _ids(ids):
    ids = np.ascontiguousarray(np.atleast_1d(np.asarray(ids, dtype=np.int64)))
    if ids.size and ids.min() < 0:
        raise ValueError("replicate ids must be nonnegative")
    return ids


def normals(seed, ids, tag, count):
    """Standard normals, one row of length ``count`` per replicate id."""
    return backend.normals(int(seed) & 0xFFFFFFFFFFFFFFFF, _ids(ids), int(tag), int(count))


def uniforms(seed, ids, tag, count):
    """Uniforms on [0, 1) with 53-bit resolution, one row per replicate id."""
    return backend.uniforms(int(seed) & 0xFFFFFFFFFFFFFFFF, _ids(ids), int(tag), int(count))


@dataclass(frozen=True)
class Stream:
    seed: int
    replicate_id: int
    tag: int = Purpose.BASE

    def normals(self, count):
        return normals(self.seed, [self.replicate_id], self.tag, count)[0]

    def uniforms(self, count):
        return uniforms(self.seed, [self.replicate_id], self.tag, count)[0]
