"""Compare the compiled core with the numpy fallback on the hot loops.

Run with ``python3 benchmarks/bench_core.py``.  Prints the median wall time
of each kernel under both implementations and checks that their outputs
agree (bit-exact for the integer paths, ulp-level for floating point).
"""

import argparse
import timeit

import numpy as np

from gp_extremes import _fallback, backend


def cases(rows, cols):
    ids = np.arange(rows, dtype=np.int64)
    values = np.random.default_rng(0).standard_normal((rows, cols))
    return {
        "normals": lambda impl: impl.normals(12345, ids, 0, cols),
        "uniforms": lambda impl: impl.uniforms(12345, ids, 0, cols),
        "argmax_rows": lambda impl: impl.argmax_rows(values),
        "softmax_rows": lambda impl: impl.softmax_rows(values, 4.0),
    }


def median_time(fn, repeat):
    return float(np.median(timeit.repeat(fn, number=1, repeat=repeat)))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--cols", type=int, default=1024)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    impls = {"python": _fallback}
    if "compiled" in backend.IMPLEMENTATIONS:
        impls["compiled"] = backend.IMPLEMENTATIONS["compiled"]
    else:
        print("compiled core not built; timing the fallback only")
    print(f"{args.rows} x {args.cols}, median of {args.repeat}")
    print(f"{'kernel':<14}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}  agree")
    for name, fn in cases(args.rows, args.cols).items():
        times = {k: median_time(lambda: fn(impl), args.repeat) for k, impl in impls.items()}
        outs = [fn(impl) for impl in impls.values()]
        outs = [o if isinstance(o, tuple) else (o,) for o in outs]
        agree = all(np.allclose(a, b, rtol=1e-12, atol=0) for o in outs[1:] for a, b in zip(outs[0], o))
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{name:<14}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times.values()) + f"{speed:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
