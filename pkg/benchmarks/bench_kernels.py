"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each case runs on identical inputs for both backends; the best of
``--repeat`` wall times is reported together with the speedup.
"""

import argparse
import json
import sys
import time

import numpy as np
import scipy.sparse as sp

from subkernel import _pykernels, bernstein as bern, markov, space

try:
    from subkernel import _ckernels
except ImportError:
    _ckernels = None


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    w = bern.weights(bern.BernsteinFunction.stable(0.5), 4096)
    pmf = np.array(w.c)
    a = np.random.default_rng(0).random(4096)

    Z = space.build_lattice(1, 2049)
    k = markov.average_two_step(markov.srw(Z))
    PT = k.transpose_csr()
    c = Z.center()
    V0 = np.zeros((Z.n, 3))
    V0[[c - 128, c, c + 128], [0, 1, 2]] = 1.0
    W = np.ascontiguousarray(bern.step_law_table(w, 64, 4096)[0])
    inv_mu = 1.0 / Z.mu

    P = sp.csr_matrix(k.P)
    P.sort_indices()
    indptr, indices = P.indptr.astype(np.int64), P.indices.astype(np.int64)
    cum = np.concatenate([np.cumsum(P.data[indptr[i]:indptr[i + 1]]) for i in range(Z.n)])
    cdf = np.concatenate([[0.0], np.cumsum(pmf[1:])])

    return {
        "truncated_convolve K=4096": lambda m: m.truncated_convolve(a, pmf, 4096),
        "renewal_sequence S=4096": lambda m: m.renewal_sequence(pmf, 4096),
        "power_accumulate N=2049 K=4096 rows=3": lambda m: m.power_accumulate(PT, V0, W, inv_mu, 1e-9),
        "sample_paths 20000 x 8": lambda m: m.sample_paths(
            cdf, indptr, indices, cum, c, 8, 20000, np.random.Generator(np.random.PCG64(1))),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback can be timed", file=sys.stderr)
    results = []
    print(f"{'case':42s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, fn in cases().items():
        tp = _best(lambda: fn(_pykernels), args.repeat)
        tc = _best(lambda: fn(_ckernels), args.repeat) if _ckernels is not None else float("nan")
        results.append({"case": name, "python": tp, "cython": tc, "speedup": tp / tc})
        print(f"{name:42s} {tp:10.4f} {tc:10.4f} {tp / tc:8.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
