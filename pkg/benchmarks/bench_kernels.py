"""Time the numba kernels against their numpy twins.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once untimed (JIT warm-up), then N timed runs; the best
wall time is reported. Outputs are compared so a speedup never hides a
divergence.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from litdark.hamiltonians import AgentParams, ExchangeParams
from litdark.kernels import grid_nb, grid_np, pack, sim_nb, sim_np
from litdark.market import MarketParams
from litdark.rng import path_keys


def best_of(fn, repeat):
    fn()
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    ap, ep = AgentParams(), ExchangeParams()

    mp = MarketParams(q_bar=20)
    P = pack(mp, ap)
    vols = np.arange(21.0)
    z = np.array([0.3, -0.2, 0.05, 0.05])
    yield ("best_response_search q_bar=20",
           lambda m: m.best_response_search(z, 4.0, vols, vols, np.inf, np.inf, P), 0)

    mp5 = MarketParams(q_bar=5)
    P5 = pack(mp5, ap, ep)
    v5 = np.arange(6.0)
    q5 = np.arange(-5.0, 6.0)
    zv = np.linspace(-1, 1, 11)
    yield ("exchange_search q_bar=5, 11 z values",
           lambda m: m.exchange_search(q5, zv, v5, v5, -np.ones(11), False, P5), 2)

    mp40 = MarketParams(q_bar=40)
    P40 = pack(mp40, ap)
    v40 = np.arange(41.0)
    yield ("mm_step q_bar=40",
           lambda m: m.mm_step(-np.ones(81), v40, v40, False, 1.0, P40), 0)

    nq = 11
    rng = np.random.default_rng(0)
    quotes = rng.integers(0, 6, (1, nq, 4)).astype(float)
    ztab = np.zeros((1, nq, 5))
    htab = np.zeros((1, nq))
    keys = path_keys(0, 2000)
    yield ("simulate 2000 paths, q_bar=5, T=0.05",
           lambda m: m.simulate(keys, 0.05, 1.0, 0.005, quotes, ztab, htab, 0.0, 0.0, 100.0,
                                P5, 0), 0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    grid = {"best_response_search": (grid_nb, grid_np), "exchange_search": (grid_nb, grid_np),
            "mm_step": (grid_nb, grid_np), "simulate": (sim_nb, sim_np)}
    print(f"{'kernel':40s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}  match")
    for name, call, key in cases():
        nb_mod, np_mod = grid[name.split()[0]]
        t_nb, out_nb = best_of(lambda: call(nb_mod), args.repeat)
        t_np, out_np = best_of(lambda: call(np_mod), args.repeat)
        a, b = np.asarray(out_nb[key], dtype=float), np.asarray(out_np[key], dtype=float)
        match = a.shape == b.shape and np.allclose(a, b, rtol=1e-10, atol=1e-12)
        print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}  {match}")


if __name__ == "__main__":
    main()
