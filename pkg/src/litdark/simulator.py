"""Monte Carlo simulation of the controlled lit/dark market.

Policies are tabulated on (time slice, integer inventory) before simulation,
so the event loop runs inside a compiled kernel with no Python callbacks.
Each path owns a counter-based random stream keyed by (seed, path id).
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .hamiltonians import AgentParams, ExchangeParams, hamiltonian_arrays
from .kernels.simlayout import (EVENT_NAMES, STAT_NAMES, STREAMS, ST_CAND, ST_COMP,
                                ST_COUNT, ST_FEE, ST_PL, ST_Y)
from .market import MarketParams
from .rng import path_keys

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    T: float = 1.0
    euler_dt: float = 0.01
    n_paths: int = 1000
    seed: int = 0
    q0: int = 0
    max_events: int = 0      # per-path event log length; 0 keeps summaries only
    log_paths: int = 10      # how many paths go to paths.csv

    def __post_init__(self):
        if not (self.T > 0 and self.euler_dt > 0):
            raise ValueError("T and euler_dt must be positive")
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be at least 1")
        if self.max_events < 0:
            raise ValueError("max_events must be non-negative")

    def replace(self, **changes) -> "SimConfig":
        d = asdict(self)
        d.update(changes)
        return SimConfig(**d)

    @classmethod
    def from_mapping(cls, data) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sim keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class PolicyTables:
    """Controls on a (slice, inventory) grid.

    quotes: (n_slices, nq, 4); z: (n_slices, nq, 5) with z_s last; h: (n_slices, nq)
    coupon H. ``nq`` is either ``2 q_bar + 1`` or 1 (inventory-independent).
    """
    quotes: np.ndarray
    z: np.ndarray
    h: np.ndarray
    slice_dt: float
    contract: bool = True
    n_clamped: int = 0

    def __post_init__(self):
        self.quotes = np.ascontiguousarray(self.quotes, dtype=float)
        self.z = np.ascontiguousarray(self.z, dtype=float)
        self.h = np.ascontiguousarray(self.h, dtype=float)
        n, nq = self.quotes.shape[:2]
        if self.quotes.shape != (n, nq, 4) or self.z.shape != (n, nq, 5) or self.h.shape != (n, nq):
            raise ValueError("policy tables have inconsistent shapes")
        if np.any(self.quotes < 0):
            raise ValueError("negative volumes in policy table")
        if not self.slice_dt > 0:
            raise ValueError("slice_dt must be positive")


def clamp_quotes(quotes, q, q_bar):
    """Per-venue inventory feasibility: ask volumes <= q + q_bar, bid <= q_bar - q."""
    out = np.array(quotes, dtype=float, copy=True)
    cap_a = (q + q_bar)[..., None]
    cap_b = (q_bar - q)[..., None]
    out[..., [0, 2]] = np.minimum(out[..., [0, 2]], cap_a)
    out[..., [1, 3]] = np.minimum(out[..., [1, 3]], cap_b)
    return out, int(np.sum(np.any(out != np.asarray(quotes), axis=-1)))


def fixed_policy(quotes, mp: MarketParams, slice_dt: float = 1.0) -> PolicyTables:
    """Constant quotes, no contract."""
    L = np.asarray(quotes, dtype=float).reshape(1, 1, 4)
    return PolicyTables(L, np.zeros((1, 1, 5)), np.zeros((1, 1)), slice_dt, contract=False)


def tables_from_callable(fn, n_slices: int, slice_dt: float, mp: MarketParams,
                         ap: AgentParams) -> PolicyTables:
    """Tabulate ``fn(t, q) -> (quotes4, z5)``; the coupon is h^c at the clamped quotes."""
    qg = np.arange(-mp.q_bar, mp.q_bar + 1, dtype=float)
    quotes = np.zeros((n_slices, qg.size, 4))
    z = np.zeros((n_slices, qg.size, 5))
    for k in range(n_slices):
        for i, q in enumerate(qg):
            L, zz = fn(k * slice_dt, q)
            quotes[k, i] = L
            z[k, i] = zz
    return contract_tables(quotes, z, slice_dt, mp, ap)


def contract_tables(quotes, z, slice_dt, mp: MarketParams, ap: AgentParams) -> PolicyTables:
    qg = np.arange(-mp.q_bar, mp.q_bar + 1, dtype=float)
    n = quotes.shape[0]
    if quotes.shape[1] != qg.size:
        raise ValueError("contract tables must cover the whole inventory grid")
    q = np.broadcast_to(qg, (n, qg.size))
    L, n_clamped = clamp_quotes(quotes, q, mp.q_bar)
    h = hamiltonian_arrays(L, z[..., :4], q, ap, mp)
    return PolicyTables(L, z, h, slice_dt, contract=True, n_clamped=n_clamped)


def tables_from_mm(sol, mp: MarketParams) -> PolicyTables:
    """Quotes of the no-exchange solution; no contract."""
    n, nq = sol.quotes.shape[:2]
    q = np.broadcast_to(np.arange(-mp.q_bar, mp.q_bar + 1, dtype=float), (n, nq))
    L, n_clamped = clamp_quotes(sol.quotes, q, mp.q_bar)
    dt = float(sol.value.times[1] - sol.value.times[0])
    return PolicyTables(L, np.zeros((n, nq, 5)), np.zeros((n, nq)), dt,
                        contract=False, n_clamped=n_clamped)


def tables_from_oracle(slices, dt: float, mp: MarketParams, ap: AgentParams) -> PolicyTables:
    """Grid oracle slices (ordered from t=0); quotes are the grid best responses."""
    quotes = np.stack([s.quotes for s in slices])
    z = np.stack([s.z for s in slices])
    return contract_tables(quotes, z, dt, mp, ap)


def tables_from_exchange(sol, br, mp: MarketParams, ap: AgentParams, use_grid=None) -> PolicyTables:
    """Learned incentives with either the network best response (rounded to whole
    units) or, when ``use_grid`` is a GridSpec, the exact grid best response."""
    from .oracle import best_response_grid_arrays

    z = sol.incentives
    dt = float(sol.value.times[1] - sol.value.times[0])
    if use_grid is None:
        quotes = np.rint(sol.quotes)
    else:
        qg = np.arange(-mp.q_bar, mp.q_bar + 1, dtype=float)
        quotes = np.zeros(sol.quotes.shape)
        for k in range(z.shape[0]):
            for i, q in enumerate(qg):
                quotes[k, i] = best_response_grid_arrays(z[k, i, :4], q, ap, mp, use_grid, use_cap=True)[0]
    return contract_tables(quotes, z, dt, mp, ap)


@dataclass
class SimResult:
    stats: np.ndarray          # (n_paths, N_STAT)
    events: np.ndarray         # (n_paths, max_events, EV_COLS)
    config: SimConfig
    y0: float
    extra: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.stats[:, STAT_NAMES.index(name)]

    def summary(self) -> dict:
        out = {"n_paths": int(self.stats.shape[0]), "y0": self.y0}
        for name in STAT_NAMES:
            col = self.column(name)
            out[name] = {"mean": float(np.mean(col)), "std_error": _se(col)}
        out.update(self.extra)
        return out

    def write(self, out_dir, n_log: int | None = None):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2))
        n_log = self.config.log_paths if n_log is None else n_log
        with open(out / "paths.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "t", "event", "side", "pool", "latency", "volume", "price",
                        "q", "cash", "y"])
            cols = {n: i for i, n in enumerate(EVENT_NAMES)}
            for p in range(min(n_log, self.stats.shape[0])):
                n_ev = min(int(self.column("n_events")[p]), self.events.shape[1])
                for e in self.events[p, :n_ev]:
                    j = int(e[cols["stream"]])
                    side, pool = STREAMS[j]
                    lat = {-1.0: "", 0.0: "nonlat", 1.0: "lat"}[float(e[cols["latency"]])]
                    w.writerow([p, repr(float(e[cols["t"]])), j, side, pool,
                                lat, repr(float(e[cols["volume"]])), repr(float(e[cols["price"]])),
                                repr(float(e[cols["q"]])), repr(float(e[cols["cash"]])),
                                repr(float(e[cols["y"]]))])


def _se(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def reservation_y0(ap: AgentParams, ep: ExchangeParams) -> float:
    """Y_0 = -log(-R) / gamma."""
    return -math.log(-ep.reservation) / ap.gamma


def simulate_paths(cfg: SimConfig, pol: PolicyTables, ap: AgentParams, ep: ExchangeParams,
                   mp: MarketParams, first_path: int = 0, y0: float | None = None) -> SimResult:
    nq = pol.quotes.shape[1]
    if nq not in (1, 2 * mp.q_bar + 1):
        raise ValueError("policy tables do not match the inventory grid")
    if abs(cfg.q0) > mp.q_bar:
        raise ValueError("initial inventory outside the risk limit")
    horizon = pol.quotes.shape[0] * pol.slice_dt
    if cfg.T > horizon * (1 + 1e-12) and (pol.contract or pol.quotes.shape[0] > 1):
        log.warning("simulating to T=%g past the policy horizon %g; the last slice is held",
                    cfg.T, horizon)
    if y0 is None:
        y0 = reservation_y0(ap, ep) if pol.contract else 0.0
    keys = path_keys(cfg.seed, int(cfg.n_paths), first_path)
    P = kernels.pack(mp, ap, ep)
    stats, events = kernels.simulate(keys, float(cfg.T), float(pol.slice_dt), float(cfg.euler_dt),
                                     pol.quotes, pol.z, pol.h, float(cfg.q0), float(y0),
                                     float(mp.s0), P, int(cfg.max_events))
    if not np.all(np.isfinite(stats)):
        raise FloatingPointError("simulation produced non-finite statistics")
    return SimResult(stats, events, cfg, float(y0))


def simulate_path(cfg: SimConfig, pol: PolicyTables, ap, ep, mp, path_id: int = 0,
                  max_events: int = 100000) -> dict:
    """Single trajectory with its full event log."""
    res = simulate_paths(cfg.replace(n_paths=1, max_events=max_events), pol, ap, ep, mp,
                         first_path=path_id)
    n_ev = int(res.column("n_events")[0])
    if n_ev > max_events:
        raise ValueError(f"path has {n_ev} events, more than max_events={max_events}")
    ev = res.events[0, :n_ev]
    traj = {name: ev[:, i].copy() for i, name in enumerate(EVENT_NAMES)}
    traj["stats"] = {name: float(res.stats[0, i]) for i, name in enumerate(STAT_NAMES)}
    return traj


def agent_utility_samples(res: SimResult, ap: AgentParams) -> np.ndarray:
    return -np.exp(-ap.gamma * (res.stats[:, ST_PL] + res.stats[:, ST_Y]))


def exchange_utility_samples(res: SimResult, ep: ExchangeParams) -> np.ndarray:
    return -np.exp(-ep.eta * (res.stats[:, ST_FEE] - res.stats[:, ST_Y]))


def mc_agent_utility(cfg: SimConfig, pol: PolicyTables, ap, ep, mp, y0=None):
    """(mean, std error) of -exp(-gamma (PL_T - PL_0 + Y_T))."""
    u = agent_utility_samples(simulate_paths(cfg, pol, ap, ep, mp, y0=y0), ap)
    return float(np.mean(u)), _se(u)


def mc_exchange_utility(cfg: SimConfig, pol: PolicyTables, ap, ep, mp, y0=None):
    """(mean, std error) of -exp(-eta (fees_T - Y_T))."""
    u = exchange_utility_samples(simulate_paths(cfg, pol, ap, ep, mp, y0=y0), ep)
    return float(np.mean(u)), _se(u)


def fill_rate_check(res: SimResult):
    """Per-stream (count, compensator) pairs summed over paths, and z-scores."""
    counts = res.stats[:, ST_COUNT:ST_COUNT + 4].sum(axis=0)
    comp = res.stats[:, ST_COMP:ST_COMP + 4].sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        zscore = np.where(comp > 0, (counts - comp) / np.sqrt(comp), 0.0)
    return counts, comp, zscore


__all__ = ["SimConfig", "PolicyTables", "SimResult", "simulate_paths", "simulate_path",
           "mc_agent_utility", "mc_exchange_utility", "fixed_policy", "tables_from_mm",
           "tables_from_oracle", "tables_from_exchange", "tables_from_callable",
           "contract_tables", "clamp_quotes", "reservation_y0", "fill_rate_check", "ST_CAND"]
