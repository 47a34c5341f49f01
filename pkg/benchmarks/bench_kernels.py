"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --N 100000 --repeat 5
"""
import argparse
import timeit

import numpy as np

from copsonlab.kernels import available_backends


def _cases(N, rng):
    a = rng.random(N)
    lam = np.arange(1, N + 1, dtype=float) ** -2.0
    tail_next = np.append(lam[::-1].cumsum()[::-1][1:], 0.0) + 1.0 / N
    return {
        "prefix_sum": (a,),
        "suffix_sum": (a,),
        "total_sum": (a,),
        "leindler_recurrence": (lam, tail_next, 0.5),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=100000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = available_backends()
    cases = _cases(args.N, np.random.default_rng(args.seed))
    print(f"N={args.N} repeat={args.repeat} backends={','.join(backends)}")
    print(f"{'kernel':<22}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for name, inputs in cases.items():
        times = {}
        for b, mod in backends.items():
            fn = getattr(mod, name)
            times[b] = min(timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat))
        row = f"{name:<22}" + "".join(f"{times[b] * 1e3:>12.3f}ms" for b in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
