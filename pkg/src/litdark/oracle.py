"""Exhaustive grid baselines for the agent best response and the exchange step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .hamiltonians import AgentParams, ExchangeParams, Incentives
from .errors import NumericalError
from .market import MarketParams, Quotes


@dataclass(frozen=True)
class GridSpec:
    volume_step: float = 1.0
    z_step: float = 0.05
    z_range: float = 1.0

    def __post_init__(self):
        if not (self.volume_step > 0 and self.z_step > 0 and self.z_range > 0):
            raise ValueError("grid steps and range must be positive")
        n = self.z_range / self.z_step
        if abs(n - round(n)) > 1e-9:
            raise ValueError("z_step must divide z_range")

    def volumes(self, q_bar: int) -> np.ndarray:
        n = q_bar / self.volume_step
        if abs(n - round(n)) > 1e-9:
            raise ValueError("volume_step must divide q_bar")
        return np.arange(int(round(n)) + 1) * self.volume_step

    def z_values(self) -> np.ndarray:
        n = int(round(self.z_range / self.z_step))
        return np.arange(-n, n + 1) * self.z_step


def _caps(q, mp, use_cap):
    if use_cap:
        return q + mp.q_bar, mp.q_bar - q
    return np.inf, np.inf


def best_response_grid_arrays(z, q, ap: AgentParams, mp: MarketParams, gs: GridSpec,
                              use_cap: bool = False):
    """Grid argmax of h^c over [0, q_bar]^4; returns (volumes (4,), value)."""
    vols = gs.volumes(mp.q_bar)
    P = kernels.pack(mp, ap)
    cap_a, cap_b = _caps(float(q), mp, use_cap)
    idx, val = kernels.best_response_search(np.asarray(z, dtype=float), float(q), vols, vols,
                                            float(cap_a), float(cap_b), P)
    return vols[idx], float(val)


def best_response_grid(inc: Incentives, q: float, ap: AgentParams, mp: MarketParams,
                       gs: GridSpec, use_cap: bool = False):
    L, val = best_response_grid_arrays(inc.trade_array(), q, ap, mp, gs, use_cap)
    return Quotes.from_array(L), val


@dataclass
class GridSlice:
    """One backward step of the grid oracle on the whole inventory grid."""
    q: np.ndarray        # (nq,)
    z: np.ndarray        # (nq, 5); column 4 is z_s
    quotes: np.ndarray   # (nq, 4)
    u: np.ndarray        # sup_z U at each q
    h: np.ndarray        # agent Hamiltonian at the chosen (z, quotes)
    v: np.ndarray        # next_v + dt * u


def exchange_slice_grid(next_v, ap: AgentParams, ep: ExchangeParams, mp: MarketParams,
                        gs: GridSpec, dt: float = 1.0, use_cap: bool = False) -> GridSlice:
    next_v = np.asarray(next_v, dtype=float)
    if next_v.shape != (2 * mp.q_bar + 1,):
        raise ValueError("next_v must cover the inventory grid")
    if np.any(next_v >= 0):
        raise ValueError("next_v must be strictly negative")
    vols = gs.volumes(mp.q_bar)
    for v in vols:
        if abs(v - round(v)) > 1e-12:
            raise ValueError("the exchange oracle needs integer volumes")
    zvals = gs.z_values()
    q = np.arange(-mp.q_bar, mp.q_bar + 1, dtype=float)
    P = kernels.pack(mp, ap, ep)
    zi, quotes, u, hv, zs = kernels.exchange_search(q, zvals, vols, vols, next_v, bool(use_cap), P)
    z = np.concatenate([zvals[zi], zs[:, None]], axis=1)
    return GridSlice(q, z, quotes, u, hv, next_v + dt * u)


def exchange_one_step_grid(q: float, next_v, ap: AgentParams, ep: ExchangeParams,
                           mp: MarketParams, gs: GridSpec, dt: float = 1.0,
                           use_cap: bool = False):
    """(Incentives, v(t, q)) from one exhaustive step at a single inventory."""
    next_v = np.asarray(next_v, dtype=float)
    if np.any(next_v >= 0):
        raise ValueError("next_v must be strictly negative")
    vols = gs.volumes(mp.q_bar)
    P = kernels.pack(mp, ap, ep)
    zi, quotes, u, hv, zs = kernels.exchange_search(np.array([float(q)]), gs.z_values(), vols,
                                                    vols, next_v, bool(use_cap), P)
    zv = gs.z_values()[zi[0]]
    qi = int(round(q + mp.q_bar))
    return Incentives.from_array(zv, zs[0]), float(next_v[qi] + dt * u[0])


def exchange_backward_grid(ap: AgentParams, ep: ExchangeParams, mp: MarketParams,
                           gs: GridSpec, T: float, dt: float, use_cap: bool = False):
    """Backward induction from v(T) = -1; returns the list of slices from t=0 to T-dt."""
    n = _n_steps(T, dt)
    v = -np.ones(2 * mp.q_bar + 1)
    slices = []
    for k in range(n):
        if np.any(v >= 0):
            raise NumericalError(f"v(t={T - k * dt:g}) is not strictly negative; reduce dt")
        s = exchange_slice_grid(v, ap, ep, mp, gs, dt, use_cap)
        slices.append(s)
        v = s.v
    return slices[::-1]


def _n_steps(T, dt):
    n = T / dt
    if dt <= 0 or abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ValueError("dt must divide T")
    return int(round(n))
