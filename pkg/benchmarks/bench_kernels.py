"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best of REPEAT runs for both backends and the
largest absolute difference between their outputs.
"""
import argparse
import timeit

import numpy as np

from qclt import _pykernels, kernels
from qclt.phase_space import radial_grid

try:
    from qclt import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    for K in (32, 64, 128):
        p = rng.dirichlet(np.ones(K + 1))
        yield f"diag_convolve K={K}", lambda impl, p=p, K=K: kernels.diag_convolve(p, p, 0.5, 2 * K, impl=impl)
    for K in (64, 256):
        g = radial_grid(K)
        u = np.ascontiguousarray(g.nodes ** 2)
        w = np.ascontiguousarray(g.weights * np.exp(-u / 3))
        yield f"laguerre_project K={K}", lambda impl, u=u, w=w, K=K: impl.laguerre_project(u, w, K)
        coef = rng.normal(size=K + 1)
        yield f"laguerre_eval K={K}", lambda impl, c=coef, u=u: impl.laguerre_eval(c, u)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")
    rng = np.random.default_rng(0)
    print(f"{'case':<24}{'cython ms':>12}{'python ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(rng):
        a, b = fn(_ckernels), fn(_pykernels)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        tc = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        tp = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<24}{tc:>12.2f}{tp:>12.2f}{tp / tc:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
