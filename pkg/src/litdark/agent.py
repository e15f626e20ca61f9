"""Neural best response of the market maker to a given incentive vector."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .hamiltonians import (MIRROR_INDEX, AgentParams, ExchangeParams, Incentives,
                           hamiltonian_arrays, hamiltonian_grad_arrays)
from .market import MarketParams, Quotes
from .neural import Mlp, TrainConfig

log = logging.getLogger(__name__)

HIDDEN = (10, 10)


def hamiltonian_scale(mp: MarketParams, ep: ExchangeParams) -> float:
    """Fixed normaliser that makes the training signal O(1) per unit of scaled volume."""
    return (mp.a_lit + mp.a_dark) * (ep.z_bar + mp.half_tick * mp.q_bar)


def penalty_grad(L, q, q_bar):
    """Subgradient of (q + bl + bd - q_bar)_+ + (al + ad - q - q_bar)_+ (zero at the kink)."""
    over_bid = (q + L[..., 1] + L[..., 3] - q_bar) > 0
    over_ask = (L[..., 0] + L[..., 2] - q - q_bar) > 0
    g = np.zeros_like(L)
    g[..., 0] = over_ask
    g[..., 2] = over_ask
    g[..., 1] = over_bid
    g[..., 3] = over_bid
    return g


def penalty_value(L, q, q_bar):
    return (np.maximum(q + L[..., 1] + L[..., 3] - q_bar, 0.0)
            + np.maximum(L[..., 0] + L[..., 2] - q - q_bar, 0.0))


@dataclass
class BestResponseNet:
    """Volumes ``q_bar * s(z / z_bar, q / q_bar)`` for a sigmoid-output MLP ``s``.

    With ``symmetric`` the output is averaged with the mirrored evaluation,
    ``0.5 * (s(z, q) + M s(M z, -q))``, so bid-ask symmetry holds exactly.
    """
    net: Mlp
    q_bar: int
    z_bar: float
    history: dict = field(default_factory=dict)
    symmetric: bool = True

    @classmethod
    def create(cls, q_bar: int, z_bar: float, rng: np.random.Generator,
               symmetric: bool = True) -> "BestResponseNet":
        sizes = (5,) + HIDDEN + (4,)
        net = Mlp.create(sizes, ("elu",) * len(HIDDEN) + ("sigmoid",), rng)
        return cls(net, int(q_bar), float(z_bar), symmetric=bool(symmetric))

    def features(self, z, q):
        z = np.asarray(z, dtype=float)
        q = np.asarray(q, dtype=float)
        z2 = z.reshape(-1, 4)
        q2 = np.broadcast_to(q, z.shape[:-1]).reshape(-1, 1)
        return np.concatenate([z2 / self.z_bar, q2 / self.q_bar], axis=1)

    def _inputs(self, z, q):
        x = self.features(z, q)
        if not self.symmetric:
            return x
        xm = np.concatenate([x[:, MIRROR_INDEX], -x[:, 4:]], axis=1)
        return np.concatenate([x, xm])

    def _combine(self, u):
        if not self.symmetric:
            return u
        n = u.shape[0] // 2
        return 0.5 * (u[:n] + u[n:, MIRROR_INDEX])

    def _split_cotangent(self, g):
        if not self.symmetric:
            return g
        return 0.5 * np.concatenate([g, g[:, MIRROR_INDEX]])

    def quotes_arrays(self, z, q):
        """Volumes for incentives ``z`` (..., 4) and inventories ``q`` (...)."""
        z = np.asarray(z, dtype=float)
        u = self._combine(self.net.forward(self._inputs(z, q)))
        return (self.q_bar * u).reshape(z.shape[:-1] + (4,))

    def h_value(self, z, q, ap: AgentParams, mp: MarketParams):
        """h^c at the network's quotes."""
        return hamiltonian_arrays(self.quotes_arrays(z, q), z, q, ap, mp)

    def save(self, path):
        data = {"kind": "best_response", "q_bar": self.q_bar, "z_bar": self.z_bar,
                "symmetric": self.symmetric, "net": self.net.to_dict(), "history": self.history}
        Path(path).write_text(json.dumps(data))

    @classmethod
    def load(cls, path) -> "BestResponseNet":
        data = json.loads(Path(path).read_text())
        if data.get("kind") != "best_response":
            raise ValueError(f"{path} is not a best-response checkpoint")
        return cls(Mlp.from_dict(data["net"]), int(data["q_bar"]), float(data["z_bar"]),
                   data.get("history", {}), bool(data.get("symmetric", False)))


def best_response(br: BestResponseNet, inc: Incentives, q: float) -> Quotes:
    return Quotes.from_array(br.quotes_arrays(inc.trade_array(), q))


def _sample(rng, n, q_bar, z_bar):
    z = rng.uniform(-z_bar, z_bar, (n, 4))
    q = rng.uniform(-q_bar, q_bar, n)
    return z, q


def train_best_response(cfg: TrainConfig, ap: AgentParams, ep: ExchangeParams,
                        mp: MarketParams, br: BestResponseNet | None = None,
                        max_epochs: int | None = None) -> BestResponseNet:
    """Stochastic gradient ascent on the penalised Hamiltonian, divided by a fixed scale.

    For the plain net each batch holds K/2 uniform draws and their bid-ask
    mirrors; the symmetric net sees K independent draws. Training stops
    once the objective on a fixed validation set improves by less than
    ``plateau_tol`` (relative) over ``plateau_window`` epochs.
    """
    rng = np.random.default_rng(cfg.seed)
    if br is None:
        br = BestResponseNet.create(mp.q_bar, ep.z_bar, rng, cfg.agent_symmetric)
    scale = hamiltonian_scale(mp, ep)
    qb = mp.q_bar
    rho = cfg.penalty_rho
    half = max(1, cfg.batch_size // 2)
    z_val, q_val = _sample(np.random.default_rng(cfg.seed + 7919), 2048, qb, ep.z_bar)

    def objective(z, q):
        L = br.quotes_arrays(z, q)
        return float(np.mean(hamiltonian_arrays(L, z, q, ap, mp)
                             - rho * penalty_value(L, q, qb)) / scale)

    epochs = cfg.epochs_agent if max_epochs is None else max_epochs
    trace = []
    prev = objective(z_val, q_val)
    trace.append(prev)
    for epoch in range(1, epochs + 1):
        if br.symmetric:
            z, q = _sample(rng, cfg.batch_size, qb, ep.z_bar)
        else:
            z, q = _sample(rng, half, qb, ep.z_bar)
            z = np.concatenate([z, z[:, MIRROR_INDEX]])
            q = np.concatenate([q, -q])
        raw, cache = br.net.forward_cache(br._inputs(z, q))
        L = qb * br._combine(raw)
        g_L = (hamiltonian_grad_arrays(L, z, q, ap, mp) - rho * penalty_grad(L, q, qb)) / scale
        g_u = qb * g_L / z.shape[0]
        if not np.all(np.isfinite(g_u)):
            raise FloatingPointError(f"non-finite training signal at epoch {epoch}")
        grads, _ = br.net.vjp(cache, br._split_cotangent(g_u))
        br.net.apply_step(grads, cfg.lr_agent)
        if epoch % cfg.plateau_window == 0:
            cur = objective(z_val, q_val)
            trace.append(cur)
            rel = abs(cur - prev) / max(abs(prev), 1e-12)
            log.debug("epoch %d objective %.6g rel change %.3g", epoch, cur, rel)
            if rel < cfg.plateau_tol:
                break
            prev = cur
    br.history = {"objective": trace, "epochs": epoch if epochs else 0,
                  "config": asdict(cfg)}
    return br
