"""Time the compiled and numpy tableau kernels on identical workloads.

Usage: python benchmarks/bench_tableau.py [--sizes 16 64 256] [--repeat 3] [--out bench.csv]
"""

import argparse
import csv
import sys
import time

import numpy as np

from graphstate_forge import _backend
from graphstate_forge.builder import HeraldModel, build_G
from graphstate_forge.pauli import PauliTerm
from graphstate_forge.tableau import new_state

GATES_1Q = ("h", "s", "sdg", "x", "y", "z")


def random_workload(n: int, depth: int, seed: int) -> list[tuple]:
    """Gate and measurement list shared by every backend."""
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(depth):
        for q in range(n):
            ops.append((GATES_1Q[rng.integers(len(GATES_1Q))], q))
        perm = rng.permutation(n)
        for a, b in zip(perm[::2], perm[1::2]):
            ops.append(("cz" if rng.random() < 0.5 else "cx", int(a), int(b)))
        for q in rng.choice(n, size=max(1, n // 8), replace=False):
            ops.append(("measure", int(q), "XYZ"[rng.integers(3)]))
    return ops


def run_workload(backend: str, n: int, ops: list[tuple], seed: int):
    state = new_state(n, "all-plus", seed=seed, backend=backend)
    outcomes = []
    for op in ops:
        if op[0] == "measure":
            outcomes.append(state.measure(PauliTerm.from_ops(n, {op[1]: op[2]}))[0])
        else:
            getattr(state, op[0])(*op[1:])
    return state, outcomes


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 256])
    parser.add_argument("--depth", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="also write the table as CSV")
    args = parser.parse_args(argv)

    backends = _backend.available()
    rows = []
    for n in args.sizes:
        ops = random_workload(n, args.depth, args.seed)
        results = {b: run_workload(b, n, ops, args.seed) for b in backends}
        ref_state, ref_out = results[backends[0]]
        for b, (state, out) in results.items():
            same = out == ref_out and all(np.array_equal(u, v) for u, v in zip(state.canonical(), ref_state.canonical()))
            if not same:
                print(f"backend {b} disagrees with {backends[0]} at n={n}", file=sys.stderr)
                return 1
        for b in backends:
            rows.append(("random_circuit", n, b, best_time(lambda: run_workload(b, n, ops, args.seed), args.repeat)))
    for b in backends:
        rows.append(("build_G", 12, b, best_time(lambda: build_G(HeraldModel(0.5), seed=args.seed, backend=b),
                                                  args.repeat)))

    base = {(w, n): t for w, n, b, t in rows if b == "numpy"}
    print(f"{'workload':<16}{'n':>6}  {'backend':<8}{'seconds':>12}{'speedup':>10}")
    for w, n, b, t in rows:
        print(f"{w:<16}{n:>6}  {b:<8}{t:>12.5f}{base.get((w, n), t) / t:>10.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("workload", "n", "backend", "seconds", "speedup_vs_numpy"))
            w.writerows((wl, n, b, repr(t), repr(base.get((wl, n), t) / t)) for wl, n, b, t in rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
