"""Market dynamics: lit imbalance, arrival intensities, impact and latency.

Scalar helpers take a :class:`Quotes`; the ``*_arrays`` variants broadcast
over numpy arrays of volumes and are what the solvers use.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields

import numpy as np


class Side(enum.Enum):
    ASK = "a"
    BID = "b"

    @property
    def sign(self) -> int:
        return 1 if self is Side.ASK else -1

    @property
    def other(self) -> "Side":
        return Side.BID if self is Side.ASK else Side.ASK


class Pool(enum.Enum):
    LIT = "l"
    DARK = "d"


class Latency(enum.Enum):
    LAT = "lat"
    NONLAT = "nonlat"

    @property
    def flag(self) -> int:
        return 1 if self is Latency.LAT else 0


@dataclass(frozen=True)
class MarketParams:
    sigma: float = 0.1
    tick: float = 0.1
    a_lit: float = 5000.0
    a_dark: float = 3000.0
    theta_lit: float = 0.15
    theta_dark: float = 0.15
    gamma_lit: float = 1e-4
    gamma_dark: float = 5e-5
    eps: float = 1e-6
    q_bar: int = 300
    s0: float = 100.0

    def __post_init__(self):
        for name in ("sigma", "tick", "a_lit", "a_dark", "eps", "s0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        # theta = 0 switches the imbalance effect off
        for name in ("theta_lit", "theta_dark"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be non-negative and finite, got {value}")
        if not self.gamma_lit >= self.gamma_dark >= 0:
            raise ValueError("need gamma_lit >= gamma_dark >= 0")
        if self.eps >= min(self.a_lit, self.a_dark):
            raise ValueError("eps must be below both base intensities")
        if int(self.q_bar) != self.q_bar or self.q_bar < 1:
            raise ValueError("q_bar must be a positive integer")
        object.__setattr__(self, "q_bar", int(self.q_bar))

    @property
    def half_tick(self) -> float:
        return 0.5 * self.tick

    def base_intensity(self, pool: Pool) -> float:
        return self.a_lit if pool is Pool.LIT else self.a_dark

    def theta(self, pool: Pool) -> float:
        return self.theta_lit if pool is Pool.LIT else self.theta_dark

    def impact(self, pool: Pool) -> float:
        return self.gamma_lit if pool is Pool.LIT else self.gamma_dark

    def replace(self, **changes) -> "MarketParams":
        data = asdict(self)
        data.update(changes)
        return MarketParams(**data)

    @classmethod
    def from_mapping(cls, data) -> "MarketParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown market keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Quotes:
    """Posted volumes on (ask, bid) x (lit, dark)."""

    al: float = 0.0
    bl: float = 0.0
    ad: float = 0.0
    bd: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.al, self.bl, self.ad, self.bd], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Quotes":
        al, bl, ad, bd = (float(x) for x in arr)
        return cls(al, bl, ad, bd)

    def mirror(self) -> "Quotes":
        return Quotes(self.bl, self.al, self.bd, self.ad)

    def volume(self, side: Side, pool: Pool) -> float:
        if pool is Pool.LIT:
            return self.al if side is Side.ASK else self.bl
        return self.ad if side is Side.ASK else self.bd

    def is_admissible(self, q_bar: int) -> bool:
        vols = self.as_array()
        if np.any(vols < 0):
            return False
        return self.al + self.ad <= 2 * q_bar and self.bl + self.bd <= 2 * q_bar


def imbalance(q: Quotes) -> tuple[float, float]:
    total = q.al + q.bl
    if total <= 0:
        return 0.0, 0.0
    return q.al / total, q.bl / total


def psi(side: Side, pool: Pool, q: Quotes) -> float:
    ia, ib = imbalance(q)
    same = (side is Side.ASK) == (pool is Pool.LIT)
    return ia if same else ib


def intensity(side: Side, pool: Pool, q: Quotes, p: MarketParams) -> float:
    if q.al + q.bl <= 0:
        return p.eps
    return p.base_intensity(pool) * math.exp(-p.theta(pool) * psi(side, pool, q) / p.sigma)


def impact_increment(side: Side, pool: Pool, filled_volume: float, p: MarketParams) -> float:
    return side.sign * p.impact(pool) * filled_volume


def latency_prob(side: Side, q: Quotes) -> float:
    """Probability that a dark fill on ``side`` executes at mid (no latency)."""
    ia, ib = imbalance(q)
    return ia if side is Side.ASK else ib


# -- array versions ---------------------------------------------------------

def imbalance_arrays(al, bl):
    al = np.asarray(al, dtype=float)
    bl = np.asarray(bl, dtype=float)
    total = al + bl
    live = total > 0
    safe = np.where(live, total, 1.0)
    ia = np.where(live, al / safe, 0.0)
    ib = np.where(live, bl / safe, 0.0)
    return ia, ib


def intensities_arrays(al, bl, p: MarketParams):
    """Return (lam_al, lam_bl, lam_ad, lam_bd) broadcast over the lit volumes."""
    ia, ib = imbalance_arrays(al, bl)
    live = (np.asarray(al) + np.asarray(bl)) > 0
    kl = p.theta_lit / p.sigma
    kd = p.theta_dark / p.sigma
    lam_al = np.where(live, p.a_lit * np.exp(-kl * ia), p.eps)
    lam_bl = np.where(live, p.a_lit * np.exp(-kl * ib), p.eps)
    lam_ad = np.where(live, p.a_dark * np.exp(-kd * ib), p.eps)
    lam_bd = np.where(live, p.a_dark * np.exp(-kd * ia), p.eps)
    return lam_al, lam_bl, lam_ad, lam_bd


def max_intensity(pool: Pool, p: MarketParams) -> float:
    """Dominating rate for thinning."""
    return max(p.base_intensity(pool), p.eps)
