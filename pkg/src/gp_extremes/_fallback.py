"""Pure numpy implementations of the compiled hot loops.

Same signatures and results as ``_speedups``.  Integer stream words are
bit-identical; floating point results agree to a few ulp (libm vs numpy
transcendental functions).
"""

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _philox_arrays(c0, c1, c2, c3, k0, k1):
    # words are held in uint64 so the 32x32 product is exact
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = ((p1 >> _S32) ^ c1 ^ np.uint64(k0),
                          p1 & _MASK,
                          (p0 >> _S32) ^ c3 ^ np.uint64(k1),
                          p0 & _MASK)
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def philox4x32(counter, key):
    c = [np.uint64(int(w) & 0xFFFFFFFF) for w in counter]
    out = _philox_arrays(*c, int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF)
    return tuple(int(w) for w in out)


def _blocks(seed, ids, tag, count):
    ids = np.asarray(ids, dtype=np.int64).astype(np.uint64)
    nblk = (count + 1) // 2
    j = np.arange(nblk, dtype=np.uint64)[None, :]
    c0 = np.broadcast_to(j, (ids.size, nblk))
    c1 = np.broadcast_to((ids & _MASK)[:, None], c0.shape)
    c2 = np.broadcast_to((ids >> _S32)[:, None], c0.shape)
    c3 = np.full(c0.shape, tag & 0xFFFFFFFF, dtype=np.uint64)
    seed = int(seed)
    return _philox_arrays(c0, c1, c2, c3, seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF)


def _u53(a, b):
    return ((a >> np.uint64(5)).astype(np.float64) * 67108864.0
            + (b >> np.uint64(6)).astype(np.float64)) * (1.0 / 9007199254740992.0)


def uniforms(seed, ids, tag, count):
    w0, w1, w2, w3 = _blocks(seed, ids, tag, count)
    out = np.empty((w0.shape[0], 2 * w0.shape[1]), dtype=np.float64)
    out[:, 0::2] = _u53(w0, w1)
    out[:, 1::2] = _u53(w2, w3)
    return np.ascontiguousarray(out[:, :count])


def normals(seed, ids, tag, count):
    w0, w1, w2, w3 = _blocks(seed, ids, tag, count)
    rad = np.sqrt(-2.0 * np.log(1.0 - _u53(w0, w1)))
    theta = 2.0 * np.pi * _u53(w2, w3)
    out = np.empty((w0.shape[0], 2 * w0.shape[1]), dtype=np.float64)
    out[:, 0::2] = rad * np.cos(theta)
    out[:, 1::2] = rad * np.sin(theta)
    return np.ascontiguousarray(out[:, :count])


def argmax_rows(values):
    values = np.asarray(values, dtype=np.float64)
    idx = np.argmax(values, axis=1)
    m = values[np.arange(values.shape[0]), idx]
    tie = np.count_nonzero(values == m[:, None], axis=1) > 1
    return m, idx.astype(np.int64), tie


def softmax_rows(values, beta):
    values = np.asarray(values, dtype=np.float64)
    m = values.max(axis=1)
    e = np.exp(beta * (values - m[:, None]))
    s = e.sum(axis=1)
    return m + np.log(s) / beta, e / s[:, None]
