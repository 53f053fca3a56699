"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--runs 20000] [--repeat 3]

Each kernel is run on identical inputs by every available implementation;
outputs are compared before timings are reported.
"""

import argparse
import time

import numpy as np

from gwperc import constants, kernels, make_spec, rng
from gwperc.offspring import sampler_table

LAWS = {"uniform3": {"kind": "explicit", "pmf": {"1": 1 / 3, "2": 1 / 3, "3": 1 / 3}},
        "mu1.2": {"kind": "explicit", "pmf": {"1": 0.8, "2": 0.2}},
        "zeta1.5": {"kind": "zeta_tail", "alpha": 1.5}}


def cases(runs):
    for name, d in LAWS.items():
        spec = make_spec(d)
        kind, table, alpha = sampler_table(spec)
        p = constants(spec).p_c
        h1, h2 = rng.root_key(1)
        n = 128
        col = np.full(n + 1, -1, dtype=np.int64)
        col[n] = 0
        yield (f"cluster annealed {name} n={n}", runs,
               lambda impl: impl.cluster_batch(kind, table, alpha, p, True, h1, h2, 3, 0, runs,
                                               n, col, 1, -1, 10**7))
        depth = 14 if name != "mu1.2" else 60
        yield (f"subtree counts {name} depth={depth}", 1,
               lambda impl, depth=depth: impl.subtree_counts(kind, table, alpha, h1, h2, depth, 10**8))
        k = max(1, runs // 200)
        # heavy tails make deep W windows explode, keep the zeta window shallow
        m_w = 5 if spec.kind == "zeta_tail" else 10
        yield (f"iic {name} n=32 m_w={m_w}", k,
               lambda impl, m_w=m_w: impl.iic_batch(kind, table, alpha, p, h1, h2, 3, 0, k, 32,
                                                    m_w, 10**7, False))


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = kernels.available()
    names = sorted(impls)
    print(f"{'case':40s} {'items':>7s} " + " ".join(f"{n + ' s':>10s}" for n in names)
          + ("    numpy/cython" if len(names) == 2 else ""))
    for label, items, fn in cases(args.runs):
        times, outs = [], []
        for n in names:
            t, out = best_of(lambda: fn(impls[n]), args.repeat)
            times.append(t)
            outs.append(out)
        if len(outs) == 2:
            a, b = (o if isinstance(o, tuple) else (o,) for o in outs)
            assert all(x is None and y is None or np.array_equal(x, y) for x, y in zip(a, b)), label
        line = f"{label:40s} {items:7d} " + " ".join(f"{t:10.4f}" for t in times)
        if len(times) == 2:
            line += f"  {times[1] / times[0]:8.1f}x"
        print(line, flush=True)


if __name__ == "__main__":
    main()
