"""Agent Hamiltonian, its volume gradient, and the exchange integrand.

Everything here broadcasts: volumes ``L`` have shape ``(..., 4)`` ordered
(al, bl, ad, bd), trade incentives ``z`` likewise ``(..., 4)``, and the
inventory ``q`` has the leading shape. A side is switched off when its fill
is blocked by the risk limit (ask at ``q <= -q_bar``, bid at ``q >= q_bar``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .market import MarketParams, Pool, Quotes, Side, imbalance_arrays, intensities_arrays


@dataclass(frozen=True)
class AgentParams:
    gamma: float = 0.01

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be positive")

    @classmethod
    def from_mapping(cls, data) -> "AgentParams":
        return _from_mapping(cls, data)


@dataclass(frozen=True)
class ExchangeParams:
    eta: float = 0.02
    c_lit: float = 0.05
    c_dark: float = 0.01
    reservation: float = -1.0
    z_bar: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not (self.c_lit > 0 and self.c_dark > 0):
            raise ValueError("fees must be positive")
        if not self.reservation < 0:
            raise ValueError("reservation utility must be negative")
        if not self.z_bar > 0:
            raise ValueError("z_bar must be positive")

    def replace(self, **changes) -> "ExchangeParams":
        data = asdict(self)
        data.update(changes)
        return ExchangeParams(**data)

    @classmethod
    def from_mapping(cls, data) -> "ExchangeParams":
        return _from_mapping(cls, data)


def _from_mapping(cls, data):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class Incentives:
    z_al: float = 0.0
    z_bl: float = 0.0
    z_ad: float = 0.0
    z_bd: float = 0.0
    z_s: float = 0.0

    def trade_array(self) -> np.ndarray:
        return np.array([self.z_al, self.z_bl, self.z_ad, self.z_bd], dtype=float)

    @classmethod
    def from_array(cls, arr, z_s: float = 0.0) -> "Incentives":
        a, b, c, d = (float(x) for x in arr[:4])
        return cls(a, b, c, d, float(z_s))

    def mirror(self) -> "Incentives":
        return Incentives(self.z_bl, self.z_al, self.z_bd, self.z_ad, -self.z_s)

    def within_bound(self, z_bar: float) -> bool:
        return bool(np.all(np.abs(self.trade_array()) <= z_bar))


MIRROR_INDEX = np.array([1, 0, 3, 2])


def mirror_vec(x):
    """Swap ask and bid entries of a trailing 4-vector."""
    return np.asarray(x)[..., MIRROR_INDEX]


def _side_active(q, q_bar):
    q = np.asarray(q, dtype=float)
    ask = q > -q_bar
    bid = q < q_bar
    return ask, bid


def _gains(L, q, mp: MarketParams):
    """Per-fill PnL gains for (ask lit, bid lit, ask dark lat/nonlat, bid dark lat/nonlat)."""
    al, bl, ad, bd = (L[..., k] for k in range(4))
    h = mp.half_tick
    gl, gd = mp.gamma_lit, mp.gamma_dark
    g_al = al * (h + gl * q) - gl * al * al
    g_bl = bl * (h + (-gl) * q) - gl * bl * bl
    g_ad_lat = ad * (h + gd * q) - gd * ad * ad
    g_ad_non = ad * (gd * q) - gd * ad * ad
    g_bd_lat = bd * (h + (-gd) * q) - gd * bd * bd
    g_bd_non = bd * ((-gd) * q) - gd * bd * bd
    return g_al, g_bl, g_ad_lat, g_ad_non, g_bd_lat, g_bd_non


def _f(x, gamma):
    return -np.expm1(-gamma * x) / gamma


def compensation_terms(L, z, q, ap: AgentParams, mp: MarketParams):
    """The four compensation terms E^{i,j}, dark ones already weighted by latency odds.

    Returns an array of shape ``(..., 4)``.
    """
    L = np.asarray(L, dtype=float)
    z = np.asarray(z, dtype=float)
    q = np.asarray(q, dtype=float)
    gam = ap.gamma
    ia, ib = imbalance_arrays(L[..., 0], L[..., 1])
    g_al, g_bl, g_ad_lat, g_ad_non, g_bd_lat, g_bd_non = _gains(L, q, mp)
    e_al = _f(z[..., 0] + g_al, gam)
    e_bl = _f(z[..., 1] + g_bl, gam)
    e_ad = ib * _f(z[..., 2] + g_ad_lat, gam) + ia * _f(z[..., 2] + g_ad_non, gam)
    e_bd = ia * _f(z[..., 3] + g_bd_lat, gam) + ib * _f(z[..., 3] + g_bd_non, gam)
    out = np.stack([e_al, e_bl, e_ad, e_bd], axis=-1)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite compensation term; incentives out of range")
    return out


def e_term(side: Side, pool: Pool, z: float, quotes: Quotes, q: float,
           ap: AgentParams, mp: MarketParams) -> float:
    idx = {(Side.ASK, Pool.LIT): 0, (Side.BID, Pool.LIT): 1,
           (Side.ASK, Pool.DARK): 2, (Side.BID, Pool.DARK): 3}[(side, pool)]
    zz = np.zeros(4)
    zz[idx] = z
    return float(compensation_terms(quotes.as_array(), zz, q, ap, mp)[idx])


def _weighted_terms(L, z, q, ap, mp):
    L = np.asarray(L, dtype=float)
    q = np.asarray(q, dtype=float)
    lam = np.stack(intensities_arrays(L[..., 0], L[..., 1], mp), axis=-1)
    e = compensation_terms(L, z, q, ap, mp)
    ask, bid = _side_active(q, mp.q_bar)
    act = np.stack([ask, bid, ask, bid], axis=-1).astype(float)
    return act * lam * e


def hamiltonian_arrays(L, z, q, ap: AgentParams, mp: MarketParams):
    """Continuous agent Hamiltonian h^c, broadcast over leading axes."""
    terms = _weighted_terms(L, z, q, ap, mp)
    return (terms[..., 0] + terms[..., 1]) + (terms[..., 2] + terms[..., 3])


def agent_hamiltonian(quotes: Quotes, inc: Incentives, q: float,
                      ap: AgentParams, mp: MarketParams) -> float:
    return float(hamiltonian_arrays(quotes.as_array(), inc.trade_array(), q, ap, mp))


def hamiltonian_grad_arrays(L, z, q, ap: AgentParams, mp: MarketParams):
    """Analytic gradient of h^c with respect to the four volumes, shape ``(..., 4)``.

    At zero lit volume the imbalance is not differentiable; the gradient of
    the floor-intensity branch is returned there (dark terms contribute 0).
    """
    L = np.asarray(L, dtype=float)
    z = np.asarray(z, dtype=float)
    q = np.asarray(q, dtype=float)
    gam = ap.gamma
    al, bl, ad, bd = (L[..., k] for k in range(4))
    h = mp.half_tick
    gl, gd = mp.gamma_lit, mp.gamma_dark
    kl = mp.theta_lit / mp.sigma
    kd = mp.theta_dark / mp.sigma
    ia, ib = imbalance_arrays(al, bl)
    tot = al + bl
    live = tot > 0
    lam_al, lam_bl, lam_ad, lam_bd = intensities_arrays(al, bl, mp)
    ask, bid = _side_active(q, mp.q_bar)
    ask = ask.astype(float)
    bid = bid.astype(float)

    g_al, g_bl, g_ad_lat, g_ad_non, g_bd_lat, g_bd_non = _gains(L, q, mp)
    x_al = z[..., 0] + g_al
    x_bl = z[..., 1] + g_bl
    x_adl = z[..., 2] + g_ad_lat
    x_adn = z[..., 2] + g_ad_non
    x_bdl = z[..., 3] + g_bd_lat
    x_bdn = z[..., 3] + g_bd_non

    f_al, f_bl = _f(x_al, gam), _f(x_bl, gam)
    f_adl, f_adn = _f(x_adl, gam), _f(x_adn, gam)
    f_bdl, f_bdn = _f(x_bdl, gam), _f(x_bdn, gam)
    e_ad = ib * f_adl + ia * f_adn
    e_bd = ia * f_bdl + ib * f_bdn

    # direct volume dependence through the gains
    d_al = ask * lam_al * np.exp(-gam * x_al) * (h + gl * q - 2 * gl * al)
    d_bl = bid * lam_bl * np.exp(-gam * x_bl) * (h - gl * q - 2 * gl * bl)
    d_ad = ask * lam_ad * (ib * np.exp(-gam * x_adl) * (h + gd * q - 2 * gd * ad)
                           + ia * np.exp(-gam * x_adn) * (gd * q - 2 * gd * ad))
    d_bd = bid * lam_bd * (ia * np.exp(-gam * x_bdl) * (h - gd * q - 2 * gd * bd)
                           + ib * np.exp(-gam * x_bdn) * (-gd * q - 2 * gd * bd))

    # dependence through the ask imbalance (ib = 1 - ia)
    dh_dia = (ask * (-kl * lam_al * f_al + kd * lam_ad * e_ad + lam_ad * (f_adn - f_adl))
              + bid * (kl * lam_bl * f_bl - kd * lam_bd * e_bd + lam_bd * (f_bdl - f_bdn)))
    safe = np.where(live, tot, 1.0)
    dia_dal = np.where(live, bl / (safe * safe), 0.0)
    dia_dbl = np.where(live, -al / (safe * safe), 0.0)
    dh_dia = np.where(live, dh_dia, 0.0)
    d_al = d_al + dh_dia * dia_dal
    d_bl = d_bl + dh_dia * dia_dbl
    return np.stack([d_al, d_bl, d_ad, d_bd], axis=-1)


def agent_hamiltonian_grad(quotes: Quotes, inc: Incentives, q: float,
                           ap: AgentParams, mp: MarketParams) -> np.ndarray:
    return hamiltonian_grad_arrays(quotes.as_array(), inc.trade_array(), q, ap, mp)


def zs_star(q, ap: AgentParams, ep: ExchangeParams):
    """Optimal loading on the efficient price, -gamma/(gamma+eta) * q."""
    return -ap.gamma / (ap.gamma + ep.eta) * q


def interp_value(v_row, q, q_bar):
    """Linear interpolation of a value row on {-q_bar..q_bar}, clamped at the ends."""
    v_row = np.asarray(v_row, dtype=float)
    x = np.clip(np.asarray(q, dtype=float) + q_bar, 0.0, 2.0 * q_bar)
    lo = np.minimum(np.floor(x).astype(np.int64), 2 * q_bar - 1) if q_bar > 0 else np.zeros_like(x, dtype=np.int64)
    w = x - lo
    return (1.0 - w) * v_row[lo] + w * v_row[lo + 1]


def exchange_integrand_arrays(z, zs, q, L, v_row, ap: AgentParams, ep: ExchangeParams,
                              mp: MarketParams):
    """U^c(z, q, L*, v(t, .)) broadcast over leading axes of ``z``/``q``/``L``."""
    v_row = np.asarray(v_row, dtype=float)
    if v_row.shape != (2 * mp.q_bar + 1,):
        raise ValueError("value row must cover the inventory grid")
    if np.any(v_row >= 0):
        raise ValueError("value row must be strictly negative")
    z = np.asarray(z, dtype=float)
    q = np.asarray(q, dtype=float)
    L = np.asarray(L, dtype=float)
    zs = np.asarray(zs, dtype=float)
    sig2 = mp.sigma ** 2
    eta, gam = ep.eta, ap.gamma
    vq = interp_value(v_row, q, mp.q_bar)
    diffusion = vq * (0.5 * eta * sig2 * gam * (zs + q) ** 2 + 0.5 * eta * eta * sig2 * zs * zs)

    lam = np.stack(intensities_arrays(L[..., 0], L[..., 1], mp), axis=-1)
    e = compensation_terms(L, z, q, ap, mp)
    ask, bid = _side_active(q, mp.q_bar)
    act = np.stack([ask, bid, ask, bid], axis=-1).astype(float)
    fees = np.array([ep.c_lit, ep.c_lit, ep.c_dark, ep.c_dark])
    signs = np.array([1.0, -1.0, 1.0, -1.0])
    v_shift = interp_value(v_row, q[..., None] - signs * L, mp.q_bar)
    jump = act * lam * (np.exp(eta * (z - fees * L)) * v_shift - vq[..., None] * (1.0 + eta * e))
    return diffusion + (jump[..., 0] + jump[..., 1]) + (jump[..., 2] + jump[..., 3])


def exchange_integrand(inc: Incentives, q: float, best_quotes: Quotes, v_slice,
                       ap: AgentParams, ep: ExchangeParams, mp: MarketParams) -> float:
    return float(exchange_integrand_arrays(inc.trade_array(), inc.z_s, q,
                                           best_quotes.as_array(), v_slice, ap, ep, mp))


def mm_jump_terms_arrays(L, q, v_row, ap: AgentParams, mp: MarketParams):
    """Jump part of the market-maker HJB (no exchange) at volumes ``L``."""
    L = np.asarray(L, dtype=float)
    q = np.asarray(q, dtype=float)
    gam = ap.gamma
    ia, ib = imbalance_arrays(L[..., 0], L[..., 1])
    lam_al, lam_bl, lam_ad, lam_bd = intensities_arrays(L[..., 0], L[..., 1], mp)
    g_al, g_bl, g_ad_lat, g_ad_non, g_bd_lat, g_bd_non = _gains(L, q, mp)
    ask, bid = _side_active(q, mp.q_bar)
    vq = interp_value(v_row, q, mp.q_bar)
    v_a = interp_value(v_row, q - L[..., 0], mp.q_bar)
    v_b = interp_value(v_row, q + L[..., 1], mp.q_bar)
    v_ad = interp_value(v_row, q - L[..., 2], mp.q_bar)
    v_bd = interp_value(v_row, q + L[..., 3], mp.q_bar)
    t_al = ask * lam_al * (np.exp(-gam * g_al) * v_a - vq)
    t_bl = bid * lam_bl * (np.exp(-gam * g_bl) * v_b - vq)
    t_ad = ask * lam_ad * (ib * (np.exp(-gam * g_ad_lat) * v_ad - vq)
                           + ia * (np.exp(-gam * g_ad_non) * v_ad - vq))
    t_bd = bid * lam_bd * (ia * (np.exp(-gam * g_bd_lat) * v_bd - vq)
                           + ib * (np.exp(-gam * g_bd_non) * v_bd - vq))
    return (t_al + t_bl) + (t_ad + t_bd)
