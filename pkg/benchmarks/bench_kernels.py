"""Timing comparison of the Monte Carlo kernels: numpy vs compiled.

Run with `python3 benchmarks/bench_kernels.py [--trials N] [--repeats K]`.
Both backends see identical pre-drawn inputs, so the table also asserts
agreement (exact for integer kernels, ~1e-12 for float reductions) before
printing speedups.
"""

import argparse
import time

import numpy as np

from genselect._kernels import available_backends, get_backend


def _time(fn, *args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def _check(name, a, b):
    if isinstance(a, tuple):
        ok = all(abs(x - y) < 1e-9 for x, y in zip(a, b))
    elif isinstance(a, np.ndarray):
        ok = bool(np.array_equal(a, b))
    else:
        ok = a == b
    if not ok:
        raise AssertionError(f"{name}: backends disagree ({a!r} vs {b!r})")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200_000)
    parser.add_argument("--agents", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernel extension not built; timing numpy only")

    rng = np.random.default_rng(0)
    q = rng.normal(0.6, 0.1, size=(args.trials, args.agents))
    votes = rng.integers(0, args.agents, size=(args.trials, args.agents))
    tie_u = rng.random(args.trials)
    mix_u = rng.random(args.trials)
    shared_u = rng.random(args.trials)
    vote_u = rng.random((args.trials, 7))

    cases = [
        ("rowmax_mean_std", (q,)),
        ("rowargmax", (q,)),
        ("plurality_winners", (votes, args.agents, tie_u)),
        ("cjt_correct_count", (mix_u, shared_u, vote_u, 0.7, 0.3)),
    ]

    header = f"{'kernel':<20} " + " ".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f" {'speedup':>9}"
    print(f"trials={args.trials}, agents={args.agents}, "
          f"best of {args.repeats}")
    print(header)
    print("-" * len(header))
    for name, case_args in cases:
        results = {b: get_backend(b).__dict__[name](*case_args)
                   for b in backends}
        if len(backends) > 1:
            _check(name, results["numpy"], results["compiled"])
        times = {b: _time(get_backend(b).__dict__[name], *case_args,
                          repeats=args.repeats) for b in backends}
        row = f"{name:<20} " + " ".join(f"{times[b] * 1e3:>10.2f}ms"
                                        for b in backends)
        if len(backends) > 1:
            row += f" {times['numpy'] / times['compiled']:>8.2f}x"
        print(row)


if __name__ == "__main__":
    main()
