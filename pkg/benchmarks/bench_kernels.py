"""Compare the compiled kernels with the pure-Python fallback.

Run ``python benchmarks/bench_kernels.py``. Reports the best-of-N wall time
of a single vector-field evaluation and of a full trajectory for both
backends, plus the largest difference between their outputs.
"""
import argparse
import timeit

import numpy as np

from otgames import _core
from otgames._core import _fallback
from otgames.dynamics import integrate
from otgames.games import GameModel
from otgames.graph import complete_graph


def best(fn, number, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_rhs(n, beta, rng):
    a = rng.uniform(-1, 1, (n, n))
    g = complete_graph(n)
    rho = rng.dirichlet(np.ones(n))
    f = a @ rho
    args = (rho, f, beta, g.edge_i, g.edge_j)
    t_c = best(lambda: _core._kernels.fp_rhs(*args), 2000)
    t_p = best(lambda: _fallback.fp_rhs(*args), 2000)
    gap = np.max(np.abs(_core._kernels.fp_rhs(*args) - _fallback.fp_rhs(*args)))
    return t_c, t_p, gap


def bench_integrate(n, beta, t_end, rng):
    a = rng.uniform(-1, 1, (n, n))
    m = GameModel.from_matrix(a)
    g = complete_graph(n)
    rho0 = rng.dirichlet(np.ones(n))
    t_c = best(lambda: integrate(m, g, rho0, beta, t_end, backend="cython"), 1, 3)
    t_p = best(lambda: integrate(m, g, rho0, beta, t_end, backend="python"), 1, 3)
    a_c = integrate(m, g, rho0, beta, t_end, backend="cython").states
    a_p = integrate(m, g, rho0, beta, t_end, backend="python").states
    return t_c, t_p, float(np.max(np.abs(a_c - a_p)))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=20.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if not _core.is_compiled():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<10} {'n':>3} {'beta':>5} {'cython':>12} {'python':>12} {'speedup':>8} {'max gap':>9}")
    for n in (3, 5, 10, 20):
        for beta in (0.0, 0.1):
            t_c, t_p, gap = bench_rhs(n, beta, rng)
            print(f"{'rhs':<10} {n:>3} {beta:>5} {t_c * 1e6:>10.2f}us {t_p * 1e6:>10.2f}us "
                  f"{t_p / t_c:>7.1f}x {gap:>9.1e}")
    for n in (3, 5, 10):
        for beta in (0.0, 0.1):
            t_c, t_p, gap = bench_integrate(n, beta, args.t_end, rng)
            print(f"{'integrate':<10} {n:>3} {beta:>5} {t_c * 1e3:>10.2f}ms {t_p * 1e3:>10.2f}ms "
                  f"{t_p / t_c:>7.1f}x {gap:>9.1e}")


if __name__ == "__main__":
    main()
