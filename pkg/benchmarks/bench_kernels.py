"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times each hot kernel directly, then the two end-to-end consumers
(``aggregate_bra`` and ``brute_force_subset``) with the backend swapped in.
Outputs are checked for bit-equality along the way.
"""
from __future__ import annotations

import argparse
import json
import timeit
from contextlib import contextmanager

import numpy as np

from brafl import bra, core, oracle
from brafl._backend import available_backends

CONSUMERS = (bra, core, oracle)


@contextmanager
def backend(module):
    saved = [m.kernels for m in CONSUMERS]
    for m in CONSUMERS:
        m.kernels = module
    try:
        yield
    finally:
        for m, k in zip(CONSUMERS, saved):
            m.kernels = k


def cases(rng):
    X = rng.standard_normal((50, 2000))
    w = rng.random(50)
    small = rng.standard_normal((20, 8))
    D = available_backends()["python"].pairwise_sqdists(small)
    cert = rng.standard_normal((12, 5))
    agg = cert.mean(axis=0)
    bra_X = rng.standard_normal((100, 5000))
    bra_X[:30] *= 20
    return {
        "sqdists_to K=50 d=2000": lambda k: k.sqdists_to(X, X[0]),
        "weighted_centroid K=50 d=2000": lambda k: k.weighted_centroid(X, w),
        "pairwise_sqdists K=50 d=2000": lambda k: k.pairwise_sqdists(X),
        "best_subset K=20 n=15": lambda k: k.best_subset(D, 15),
        "subset_bound K=12 n=8": lambda k: k.subset_bound(cert, agg, 8, 1.0),
        "aggregate_bra K=100 d=5000": lambda k: _with(k, lambda: bra.aggregate_bra(bra_X).mean),
        "brute_force_subset K=20 M=5": lambda k: _with(k, lambda: oracle.brute_force_subset(small, 5).subset),
    }


def _with(module, fn):
    with backend(module):
        return fn()


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    args = p.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    rows = []
    print(f"{'case':34s} " + " ".join(f"{name:>12s}" for name in backends) + "   speedup  identical")
    for name, fn in cases(np.random.default_rng(args.seed)).items():
        times, outs = {}, {}
        for bname, mod in backends.items():
            outs[bname] = fn(mod)
            number = 1
            while min(timeit.repeat(lambda: fn(mod), number=number, repeat=1)) < 0.05:
                number *= 4
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        same = _same(outs["python"], outs["cython"]) if "cython" in outs else True
        rows.append({"case": name, "seconds": times, "speedup": speedup, "identical": same})
        print(f"{name:34s} " + " ".join(f"{times[b] * 1e3:10.3f}ms" for b in backends)
              + f"   {speedup:6.1f}x  {same}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["identical"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
