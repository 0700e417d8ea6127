"""Time the compiled simplex kernel against the numpy fallback.

    python benchmarks/bench_simplex.py --sizes 200,800,1600 --reps 5
"""
import argparse
import time

import numpy as np

from falfa import lp


def make_problem(n: int, eps: float, seed: int) -> lp.LpProblem:
    rng = np.random.default_rng(seed)
    return lp.build_lp(rng.normal(0, 2, n), rng.normal(0, 2, n), rng.integers(0, 2, n), eps)


def best_time(problem, backend, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        sol = lp.solve_simplex(problem, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), sol


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,400,1600,3200")
    ap.add_argument("--epsilon", type=float, default=0.2)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if lp.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled kernel not built; timing the numpy fallback only")
    print(f"{'n':>6} {'pivots':>7} " + " ".join(f"{b + ' ms':>11}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for n in (int(s) for s in args.sizes.split(",")):
        prob = make_problem(n, args.epsilon, args.seed)
        res = {b: best_time(prob, b, args.reps) for b in backends}
        sols = [s for _, s in res.values()]
        assert all(np.array_equal(sols[0].y_prime, s.y_prime) for s in sols), "backends disagree"
        line = f"{n:6d} {sols[0].iterations:7d} " + " ".join(
            f"{res[b][0] * 1e3:11.2f}" for b in backends)
        if len(backends) == 2:
            line += f" {res['python'][0] / res['cython'][0]:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
