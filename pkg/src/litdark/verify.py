"""Oracle and property checks behind ``litdark verify``.

Each check returns (name, passed, detail). They run on a small instance derived
from the resolved config (q_bar shrunk to 5) so the report finishes quickly.
"""
from __future__ import annotations

import numpy as np

from .agent import BestResponseNet
from .hamiltonians import (MIRROR_INDEX, hamiltonian_arrays, hamiltonian_grad_arrays,
                           mirror_vec, zs_star)
from .neural import Mlp
from .oracle import GridSpec, best_response_grid_arrays, exchange_slice_grid
from .simulator import SimConfig, contract_tables, fill_rate_check, fixed_policy, simulate_paths

SMALL_Q = 5


def _small(cfg):
    return cfg.market.replace(q_bar=SMALL_Q)


def check_gradient(cfg, n=200, seed=0):
    mp, ap = _small(cfg), cfg.agent
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.2, mp.q_bar, (n, 4))
    z = rng.uniform(-cfg.exchange.z_bar, cfg.exchange.z_bar, (n, 4))
    q = rng.uniform(-mp.q_bar + 0.5, mp.q_bar - 0.5, n)
    g = hamiltonian_grad_arrays(L, z, q, ap, mp)
    step = 1e-4
    worst = 0.0
    for c in range(4):
        e = np.zeros(4)
        e[c] = step
        fd = (hamiltonian_arrays(L + e, z, q, ap, mp) - hamiltonian_arrays(L - e, z, q, ap, mp)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fd - g[:, c]) / np.maximum(np.abs(fd), 1e-8))))
    return "hamiltonian gradient vs finite differences", worst <= 1e-5, f"max rel err {worst:.2e}"


def check_backprop(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for tag in ("elu", "tanh", "sigmoid", "affine"):
        net = Mlp.create((3, 6, 2), ("elu", tag), rng)
        x = rng.normal(size=(1, 3))
        cot = rng.normal(size=(1, 2))
        _, cache = net.forward_cache(x)
        grads, _ = net.vjp(cache, cot)
        analytic = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
        theta = net.flat()
        fd = np.empty_like(theta)
        for i in range(theta.size):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += 1e-4
            tm[i] -= 1e-4
            net.set_flat(tp)
            fp = float(np.sum(cot * net.forward(x)))
            net.set_flat(tm)
            fm = float(np.sum(cot * net.forward(x)))
            fd[i] = (fp - fm) / 2e-4
        net.set_flat(theta)
        scale = np.maximum(np.abs(fd), 1e-6)
        worst = max(worst, float(np.max(np.abs(fd - analytic) / scale)))
    return "network backward pass vs finite differences", worst <= 1e-5, f"max rel err {worst:.2e}"


def check_grid_mirror(cfg, n=20, seed=1):
    mp, ap = _small(cfg), cfg.agent
    gs = GridSpec(1.0, cfg.solver.z_step, cfg.exchange.z_bar)
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        z = rng.uniform(-1, 1, 4) * cfg.exchange.z_bar
        q = float(rng.integers(-mp.q_bar, mp.q_bar + 1))
        L1, h1 = best_response_grid_arrays(z, q, ap, mp, gs)
        L2, h2 = best_response_grid_arrays(z[MIRROR_INDEX], -q, ap, mp, gs)
        bad += int(not (np.array_equal(L1, mirror_vec(L2)) and h1 == h2))
    return "grid best response mirror symmetry", bad == 0, f"{bad}/{n} asymmetric"


def check_exchange_slice(cfg):
    mp, ap, ep = _small(cfg), cfg.agent, cfg.exchange
    gs = GridSpec(1.0, max(cfg.solver.z_step, 0.1), ep.z_bar)
    s = exchange_slice_grid(-np.ones(2 * mp.q_bar + 1), ap, ep, mp, gs, cfg.solver.dt)
    sym = bool(np.array_equal(s.v, s.v[::-1]))
    zs_ok = bool(np.array_equal(s.z[:, 4], zs_star(s.q, ap, ep)))
    return ("one-step exchange oracle symmetry and z_s closed form", sym and zs_ok,
            f"v symmetric={sym}, z_s exact={zs_ok}")


def check_simulation(cfg, n_paths=200):
    mp, ap, ep = _small(cfg), cfg.agent, cfg.exchange
    rng = np.random.default_rng(3)
    nq = 2 * mp.q_bar + 1
    quotes = rng.integers(0, mp.q_bar + 1, (1, nq, 4)).astype(float)
    z = np.zeros((1, nq, 5))
    pol = contract_tables(quotes, z, 1.0, mp, ap)
    sc = SimConfig(T=0.05, euler_dt=0.005, n_paths=n_paths, seed=11)
    a = simulate_paths(sc, pol, ap, ep, mp)
    b = simulate_paths(sc, pol, ap, ep, mp)
    col = a.column
    lat_ok = bool(np.all(col("n_ad_lat") + col("n_ad_nonlat") == col("n_ad"))
                  and np.all(col("n_bd_lat") + col("n_bd_nonlat") == col("n_bd")))
    inv_ok = bool(np.all(col("q_min") >= -mp.q_bar) and np.all(col("q_max") <= mp.q_bar))
    imp = mp.gamma_lit * col("signed_lit_volume") + mp.gamma_dark * col("signed_dark_volume")
    imp_err = float(np.max(np.abs(col("s_T") - col("s_tilde_T") - imp)))
    replay = bool(np.array_equal(a.stats, b.stats))
    ok = lat_ok and inv_ok and imp_err < 1e-9 and replay
    return ("simulation conservation laws and replay", ok,
            f"latency split={lat_ok}, inventory={inv_ok}, impact err={imp_err:.1e}, replay={replay}")


def check_thinning(cfg, T=200.0):
    mp, ap, ep = cfg.market.replace(q_bar=10 ** 9), cfg.agent, cfg.exchange
    pol = fixed_policy([3.0, 1.0, 2.0, 2.0], mp, T)
    res = simulate_paths(SimConfig(T=T, euler_dt=T, n_paths=1, seed=5), pol, ap, ep, mp)
    _, _, zsc = fill_rate_check(res)
    return "thinning fill rates vs compensators", bool(np.all(np.abs(zsc) < 3)), \
        "z-scores " + ", ".join(f"{x:+.2f}" for x in zsc)


def check_agent(cfg, path, n=30, seed=4):
    br = BestResponseNet.load(path)
    mp, ap = cfg.market, cfg.agent
    gs = GridSpec(cfg.solver.volume_step, cfg.solver.z_step, cfg.exchange.z_bar)
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(n):
        z = rng.uniform(-1, 1, 4) * cfg.exchange.z_bar
        q = rng.uniform(-mp.q_bar, mp.q_bar)
        _, hg = best_response_grid_arrays(z, q, ap, mp, gs)
        hn = float(br.h_value(z, q, ap, mp))
        gaps.append((hg - hn) / abs(hg))
    worst = max(gaps)
    return "trained best response vs grid optimum", worst <= 0.05, f"worst rel gap {worst:.3%}"


def run_checks(cfg, agent_checkpoint=None, quick=True):
    report = [check_gradient(cfg), check_backprop(), check_grid_mirror(cfg),
              check_exchange_slice(cfg), check_simulation(cfg)]
    if not quick:
        report.append(check_thinning(cfg))
    if agent_checkpoint:
        report.append(check_agent(cfg, agent_checkpoint))
    return report
