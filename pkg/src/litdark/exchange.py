"""Backward actor-critic solver for the reduced exchange problem, and the
market-maker problem without an exchange solved on the volume grid."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .agent import BestResponseNet
from .hamiltonians import (MIRROR_INDEX, AgentParams, ExchangeParams,
                           exchange_integrand_arrays, zs_star)
from .errors import NumericalError
from .market import MarketParams
from .neural import Mlp, TrainConfig
from .oracle import GridSpec, _n_steps

log = logging.getLogger(__name__)

HIDDEN = (20, 20)


@dataclass
class ValueGrid:
    times: np.ndarray    # (n+1,)
    values: np.ndarray   # (n+1, 2 q_bar + 1); last row is the terminal condition
    q_bar: int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, 2 * self.q_bar + 1):
            raise ValueError("value grid shape does not match times and inventory grid")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("value grid holds non-finite entries")

    @property
    def q(self) -> np.ndarray:
        return np.arange(-self.q_bar, self.q_bar + 1)

    def at(self, k: int) -> np.ndarray:
        return self.values[k]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q", "v"])
            for t, row in zip(self.times, self.values):
                for q, v in zip(self.q, row):
                    w.writerow([repr(float(t)), int(q), repr(float(v))])


def _terminal_grid(T, dt, q_bar):
    n = _n_steps(T, dt)
    times = np.linspace(0.0, T, n + 1)
    values = np.zeros((n + 1, 2 * q_bar + 1))
    values[-1] = -1.0
    return times, values


# ---------------------------------------------------------------- networks

@dataclass
class ActorCriticSlice:
    critic: Mlp
    actor: Mlp
    t: float
    q_bar: int
    z_bar: float
    value_scale: float = 1.0
    trace: dict = field(default_factory=dict)

    @classmethod
    def create(cls, t, q_bar, z_bar, rng) -> "ActorCriticSlice":
        critic = Mlp.create((1,) + HIDDEN + (1,), ("elu",) * len(HIDDEN) + ("affine",), rng)
        # start from the terminal value v = -1
        critic.layers[-1].weight[...] = 0.0
        critic.layers[-1].bias[...] = -1.0
        actor = Mlp.create((1,) + HIDDEN + (4,), ("elu",) * len(HIDDEN) + ("tanh",), rng)
        return cls(critic, actor, float(t), int(q_bar), float(z_bar))

    def warm_copy(self, t) -> "ActorCriticSlice":
        return ActorCriticSlice(self.critic.copy(), self.actor.copy(), float(t), self.q_bar,
                                self.z_bar, self.value_scale)

    def rescale_value(self, scale: float):
        """Change the critic output unit without changing the function it represents."""
        last = self.critic.layers[-1]
        ratio = self.value_scale / scale
        last.weight *= ratio
        last.bias *= ratio
        self.value_scale = float(scale)

    def _x(self, q):
        return np.asarray(q, dtype=float).reshape(-1, 1) / self.q_bar

    def value(self, q):
        """Critic evaluated symmetrically in q."""
        q = np.asarray(q, dtype=float).reshape(-1)
        x = self._x(q)
        raw = self.critic.forward(x)[:, 0] + self.critic.forward(-x)[:, 0]
        return 0.5 * self.value_scale * raw

    def incentives(self, q):
        """Trade incentives (n, 4), mirror-symmetrised: z(q) = M z(-q)."""
        q = np.asarray(q, dtype=float).reshape(-1)
        x = self._x(q)
        raw = self.actor.forward(x)
        raw_m = self.actor.forward(-x)[:, MIRROR_INDEX]
        return 0.5 * self.z_bar * (raw + raw_m)

    def critic_vjp(self, q, cot):
        x = self._x(q)
        cot = 0.5 * np.asarray(cot, dtype=float).reshape(-1, 1)
        _, cache = self.critic.forward_cache(np.concatenate([x, -x]))
        grads, _ = self.critic.vjp(cache, np.concatenate([cot, cot]))
        return grads

    def actor_vjp(self, q, cot_z):
        """Weight gradient of sum_k cot_z[k] . incentives(q_k)."""
        x = self._x(q)
        c = 0.5 * self.z_bar * np.asarray(cot_z, dtype=float)
        _, cache = self.actor.forward_cache(np.concatenate([x, -x]))
        grads, _ = self.actor.vjp(cache, np.concatenate([c, c[:, MIRROR_INDEX]]))
        return grads

    def to_dict(self) -> dict:
        return {"kind": "actor_critic_slice", "t": self.t, "q_bar": self.q_bar,
                "z_bar": self.z_bar, "value_scale": self.value_scale,
                "critic": self.critic.to_dict(), "actor": self.actor.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "ActorCriticSlice":
        return cls(Mlp.from_dict(d["critic"]), Mlp.from_dict(d["actor"]), d["t"], d["q_bar"],
                   d["z_bar"], d.get("value_scale", 1.0))


# ---------------------------------------------------------------- integrand

class SliceProblem:
    """U^c at one time slice with the best response taken from the frozen agent net."""

    def __init__(self, br: BestResponseNet, next_v, ap, ep, mp, dt):
        self.br, self.ap, self.ep, self.mp, self.dt = br, ap, ep, mp, dt
        self.next_v = np.asarray(next_v, dtype=float)
        # fixed normaliser for the actor signal
        self.u_scale = (mp.a_lit + mp.a_dark) * ep.eta * float(np.max(np.abs(self.next_v)))

    def integrand(self, z, q):
        L = self.br.quotes_arrays(z, q)
        zs = zs_star(q, self.ap, self.ep)
        return exchange_integrand_arrays(z, zs, q, L, self.next_v, self.ap, self.ep, self.mp)

    def grad_z(self, z, q, step):
        g = np.empty_like(z)
        for c in range(4):
            zp = z.copy()
            zm = z.copy()
            zp[:, c] += step
            zm[:, c] -= step
            g[:, c] = (self.integrand(zp, q) - self.integrand(zm, q)) / (2.0 * step)
        return g

    def target(self, z, q):
        vq = np.interp(q, np.arange(-self.mp.q_bar, self.mp.q_bar + 1), self.next_v)
        return vq + self.dt * self.integrand(z, q)


def sample_inventory(q_bar, cfg: TrainConfig, rng):
    if cfg.q_sampling == "grid":
        return rng.integers(-q_bar, q_bar + 1, cfg.batch_size).astype(float)
    return rng.uniform(-q_bar, q_bar, cfg.batch_size)


def _batch(sl, cfg, rng, q):
    if q is None:
        return sample_inventory(sl.q_bar, cfg, rng)
    return np.asarray(q, dtype=float).reshape(-1)


def critic_update(sl: ActorCriticSlice, prob: SliceProblem, cfg: TrainConfig, rng,
                  grid_target=None, q=None):
    """One regression step towards v(t+dt) + dt * U^c; ``grid_target`` caches the
    target on the integer grid when the actor is frozen. ``q`` overrides sampling."""
    q = _batch(sl, cfg, rng, q)
    if grid_target is not None and np.all(q == np.rint(q)):
        y = grid_target[(q + sl.q_bar).astype(np.int64)]
    else:
        y = prob.target(sl.incentives(q), q)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("non-finite critic target")
    resid = y - sl.value(q)
    # regression carried out in units of the slice's value scale
    sl.critic.apply_step(sl.critic_vjp(q, resid / (sl.value_scale * q.size)), cfg.lr_critic)
    return float(np.mean(resid ** 2))


def actor_update_exploit(sl: ActorCriticSlice, prob: SliceProblem, cfg: TrainConfig, rng,
                         q=None):
    q = _batch(sl, cfg, rng, q)
    z = sl.incentives(q)
    g = prob.grad_z(z, q, 1e-3 * sl.z_bar) / prob.u_scale
    sl.actor.apply_step(sl.actor_vjp(q, g / q.size), cfg.lr_actor)
    return float(np.mean(prob.integrand(z, q)))


def actor_update_explore(sl: ActorCriticSlice, prob: SliceProblem, cfg: TrainConfig, rng,
                         q=None):
    q = _batch(sl, cfg, rng, q)
    z = sl.incentives(q)
    eps = rng.normal(0.0, cfg.noise_std, z.shape)
    gain = (prob.integrand(z + eps, q) - prob.integrand(z, q)) / prob.u_scale
    sl.actor.apply_step(sl.actor_vjp(q, eps * gain[:, None] / q.size), cfg.lr_explore)


def refit_critic_output(sl: ActorCriticSlice, q, y):
    """Least-squares solve for the critic's affine output layer, hidden layers fixed."""
    q = np.asarray(q, dtype=float).reshape(-1)
    x = sl._x(q)
    body = Mlp(sl.critic.layers[:-1])
    phi = 0.5 * (body.forward(x) + body.forward(-x))
    A = np.hstack([phi, np.ones((q.size, 1))]) * sl.value_scale
    coef = np.linalg.lstsq(A, np.asarray(y, dtype=float), rcond=None)[0]
    if not np.all(np.isfinite(coef)):
        raise FloatingPointError("critic refit produced non-finite weights")
    last = sl.critic.layers[-1]
    last.weight[0] = coef[:-1]
    last.bias[0] = coef[-1]


def train_slice(sl: ActorCriticSlice, prob: SliceProblem, cfg: TrainConfig, rng):
    """Alternate actor and critic steps, then fit the critic with the actor frozen:
    optionally a least-squares refit of its output layer, then SGD to tolerance."""
    u_trace, r_trace = [], []
    q_grid = np.arange(-sl.q_bar, sl.q_bar + 1, dtype=float)
    sl.rescale_value(float(np.max(np.abs(prob.target(sl.incentives(q_grid), q_grid)))) or 1.0)
    for it in range(1, cfg.epochs_actor + 1):
        u_trace.append(actor_update_exploit(sl, prob, cfg, rng))
        if it % cfg.explore_every == 0:
            actor_update_explore(sl, prob, cfg, rng)
        r_trace.append(critic_update(sl, prob, cfg, rng))
    y_raw = prob.target(sl.incentives(q_grid), q_grid)
    # the critic is symmetric in q, so it regresses on the symmetrised target
    y_grid = 0.5 * (y_raw + y_raw[::-1])
    if cfg.critic_refit:
        refit_critic_output(sl, q_grid, y_grid)

    def rel_err():
        return np.max(np.abs(sl.value(q_grid) - y_grid) / np.maximum(np.abs(y_grid), 1e-12))

    err = rel_err()
    best = (err, sl.critic.copy())
    converged = err < cfg.critic_tol
    it = 0
    while not converged and it < cfg.epochs_critic:
        it += 1
        try:
            r_trace.append(critic_update(sl, prob, cfg, rng, y_grid))
        except FloatingPointError:
            log.warning("slice t=%g: critic step diverged after %d steps; keeping the best fit",
                        sl.t, it)
            break
        if it % cfg.plateau_window == 0:
            err = rel_err()
            if err < best[0]:
                best = (err, sl.critic.copy())
            converged = err < cfg.critic_tol
    if not converged:
        err, sl.critic = best
        log.warning("slice t=%g: critic did not reach tolerance %g (max rel error %.3g)",
                    sl.t, cfg.critic_tol, err)
    sl.trace = {"mean_u": u_trace, "critic_mse": r_trace, "converged": bool(converged),
                "critic_steps": it, "critic_rel_err": float(err)}
    return sl


@dataclass
class ExchangeSolution:
    value: ValueGrid
    slices: list          # ActorCriticSlice for t_0 .. t_{n-1}
    incentives: np.ndarray  # (n, nq, 5)
    quotes: np.ndarray      # (n, nq, 4)
    h: np.ndarray           # (n, nq) agent Hamiltonian at the posted quotes

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.value.to_csv(out / "value.csv")
        q = self.value.q
        _table_csv(out / "incentives.csv", ["z_al", "z_bl", "z_ad", "z_bd", "z_s"],
                   self.value.times[:-1], q, self.incentives)
        _table_csv(out / "quotes.csv", ["l_al", "l_bl", "l_ad", "l_bd"],
                   self.value.times[:-1], q, self.quotes)
        ck = out / "slices"
        ck.mkdir(exist_ok=True)
        for k, sl in enumerate(self.slices):
            (ck / f"slice_{k:04d}.json").write_text(json.dumps(sl.to_dict()))


def _table_csv(path, cols, times, q, data):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "q"] + cols)
        for t, block in zip(times, data):
            for qq, row in zip(q, block):
                w.writerow([repr(float(t)), int(qq)] + [repr(float(x)) for x in row])


def solve_exchange(cfg: TrainConfig, br: BestResponseNet, ap: AgentParams, ep: ExchangeParams,
                   mp: MarketParams, T: float, dt: float) -> ExchangeSolution:
    """Backward in time from v(T) = -1, one actor-critic pair per slice."""
    if br.q_bar != mp.q_bar:
        raise ValueError("best-response net was trained for a different q_bar")
    times, values = _terminal_grid(T, dt, mp.q_bar)
    n = times.size - 1
    nq = 2 * mp.q_bar + 1
    q = np.arange(-mp.q_bar, mp.q_bar + 1, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    slices = [None] * n
    inc = np.zeros((n, nq, 5))
    quotes = np.zeros((n, nq, 4))
    hv = np.zeros((n, nq))
    sl = ActorCriticSlice.create(times[-2], mp.q_bar, ep.z_bar, rng)
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            sl = sl.warm_copy(times[k])
        if np.any(values[k + 1] >= 0):
            raise NumericalError(f"v(t={times[k + 1]:g}) is not strictly negative; "
                                 "the explicit step is too large, reduce dt")
        prob = SliceProblem(br, values[k + 1], ap, ep, mp, dt)
        train_slice(sl, prob, cfg, rng)
        v = sl.value(q)
        values[k] = 0.5 * (v + v[::-1])
        z = sl.incentives(q)
        inc[k, :, :4] = z
        inc[k, :, 4] = zs_star(q, ap, ep)
        quotes[k] = br.quotes_arrays(z, q)
        hv[k] = br.h_value(z, q, ap, mp)
        slices[k] = sl
        log.info("slice t=%g done: v(0)=%.6g", times[k], values[k, mp.q_bar])
    return ExchangeSolution(ValueGrid(times, values, mp.q_bar), slices, inc, quotes, hv)


@dataclass
class MMSolution:
    value: ValueGrid
    quotes: np.ndarray   # (n, nq, 4) optimal grid quotes at t_0 .. t_{n-1}

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.value.to_csv(out / "value.csv")
        _table_csv(out / "quotes.csv", ["l_al", "l_bl", "l_ad", "l_bd"],
                   self.value.times[:-1], self.value.q, self.quotes)


def solve_mm_no_exchange(ap: AgentParams, mp: MarketParams, T: float, dt: float,
                         volume_grid_step: float = 1.0, use_cap: bool = False) -> MMSolution:
    """Explicit backward Euler with exhaustive search over the volume grid."""
    if abs(volume_grid_step - round(volume_grid_step)) > 1e-12:
        raise ValueError("volume_grid_step must be an integer number of units")
    vols = GridSpec(volume_step=volume_grid_step).volumes(mp.q_bar)
    times, values = _terminal_grid(T, dt, mp.q_bar)
    n = times.size - 1
    P = kernels.pack(mp, ap)
    quotes = np.zeros((n, 2 * mp.q_bar + 1, 4))
    for k in range(n - 1, -1, -1):
        values[k], quotes[k] = kernels.mm_step(values[k + 1], vols, vols, bool(use_cap), dt, P)
    return MMSolution(ValueGrid(times, values, mp.q_bar), quotes)
