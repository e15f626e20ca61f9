"""numba event loop for the controlled market (one stream per path)."""
import numpy as np

from .._backend import njit, prange
from ..rng import uniform
from .params import A_D, A_L, C_D, C_L, EPS, GAMMA, G_D, G_L, HALF_TICK, K_D, K_L, Q_BAR, SIGMA
from .simlayout import (EV_COLS, N_STAT, ST_CAND, ST_CASH, ST_CLAMPED, ST_COMP, ST_COUNT, ST_COV,
                        ST_FEE, ST_LAT_A, ST_LAT_B, ST_NEV, ST_NONLAT_A, ST_NONLAT_B, ST_PL,
                        ST_QMAX, ST_QMIN, ST_QT, ST_S0, ST_SIGNED_DARK, ST_SIGNED_LIT, ST_ST,
                        ST_STILDE, ST_Y)

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def _lams(al, bl, P):
    tot = al + bl
    out = np.empty(6)
    if tot > 0:
        ia = al / tot
        ib = bl / tot
        out[0] = P[A_L] * np.exp(-P[K_L] * ia)
        out[1] = P[A_L] * np.exp(-P[K_L] * ib)
        out[2] = P[A_D] * np.exp(-P[K_D] * ib)
        out[3] = P[A_D] * np.exp(-P[K_D] * ia)
        out[4] = ia
        out[5] = ib
    else:
        out[0] = P[EPS]
        out[1] = P[EPS]
        out[2] = P[EPS]
        out[3] = P[EPS]
        out[4] = 0.0
        out[5] = 0.0
    return out


@njit(cache=True)
def _one_path(key, T, slice_dt, euler_dt, quotes_tab, z_tab, h_tab, q0, y0, P,
              stats, events, max_ev):
    qb = P[Q_BAR]
    sig = P[SIGMA]
    gam = P[GAMMA]
    h = P[HALF_TICK]
    a_l = P[A_L]
    a_d = P[A_D]
    lam_tot = 2.0 * a_l + 2.0 * a_d
    n_slices = quotes_tab.shape[0]
    by_q = quotes_tab.shape[1] > 1

    ctr = np.uint64(0)
    t = 0.0
    q = q0
    s_tilde = stats[ST_S0]
    s = s_tilde
    cash = 0.0
    y = y0
    fee = 0.0
    k_slice = 0
    m_euler = 0
    n_ev = 0
    stats[ST_QMIN] = q
    stats[ST_QMAX] = q

    cand = t - np.log(uniform(key, ctr)) / lam_tot
    ctr += np.uint64(1)
    vol = np.empty(4)
    while True:
        # the last slice extends to T
        b_slice = (k_slice + 1) * slice_dt if k_slice < n_slices - 1 else np.inf
        nb = min(b_slice, (m_euler + 1) * euler_dt, T)
        seg_end = min(cand, nb)
        is_event = cand < nb

        qi = int(round(q + qb)) if by_q else 0
        for c in range(4):
            vol[c] = quotes_tab[k_slice, qi, c]
        cap_a = q + qb
        cap_b = qb - q
        clamped = False
        if vol[0] > cap_a:
            vol[0] = cap_a
            clamped = True
        if vol[2] > cap_a:
            vol[2] = cap_a
            clamped = True
        if vol[1] > cap_b:
            vol[1] = cap_b
            clamped = True
        if vol[3] > cap_b:
            vol[3] = cap_b
            clamped = True
        if clamped:
            stats[ST_CLAMPED] += 1.0
        lam = _lams(vol[0], vol[1], P)
        ask_on = q > -qb
        bid_on = q < qb
        zs = z_tab[k_slice, qi, 4]
        hh = h_tab[k_slice, qi]

        # continuous part on [t, seg_end]
        dt = seg_end - t
        u1 = uniform(key, ctr)
        u2 = uniform(key, ctr + np.uint64(1))
        ctr += np.uint64(2)
        if dt > 0:
            dS = sig * np.sqrt(dt) * np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)
            s_tilde += dS
            s += dS
            y += zs * dS + (0.5 * gam * sig * sig * (zs + q) ** 2 - hh) * dt
            if ask_on:
                stats[ST_COMP + 0] += lam[0] * dt
                stats[ST_COMP + 2] += lam[2] * dt
            if bid_on:
                stats[ST_COMP + 1] += lam[1] * dt
                stats[ST_COMP + 3] += lam[3] * dt
        t = seg_end
        if not is_event:
            if t >= T:
                break
            if nb == b_slice:
                k_slice += 1
            if nb == (m_euler + 1) * euler_dt:
                m_euler += 1
            continue

        stats[ST_CAND] += 1.0
        u_str = uniform(key, ctr)
        u_acc = uniform(key, ctr + np.uint64(1))
        u_lat = uniform(key, ctr + np.uint64(2))
        u_exp = uniform(key, ctr + np.uint64(3))
        ctr += np.uint64(4)
        x = u_str * lam_tot
        if x < a_l:
            j = 0
        elif x < 2.0 * a_l:
            j = 1
        elif x < 2.0 * a_l + a_d:
            j = 2
        else:
            j = 3
        dom = a_l if j < 2 else a_d
        active = ask_on if (j == 0 or j == 2) else bid_on
        if active and u_acc * dom < lam[j]:
            ell = vol[j]
            lat_flag = 1.0
            if j == 0:
                price = s + h
                cash += price * ell
                q -= ell
                s += P[G_L] * ell
                fee += P[C_L] * ell
                stats[ST_SIGNED_LIT] += ell
                stats[ST_COV] += -ell * (P[G_L] * ell)
            elif j == 1:
                price = s - h
                cash -= price * ell
                q += ell
                s -= P[G_L] * ell
                fee += P[C_L] * ell
                stats[ST_SIGNED_LIT] -= ell
                stats[ST_COV] += ell * (-P[G_L] * ell)
            elif j == 2:
                if u_lat < lam[4]:
                    lat_flag = 0.0
                    price = s
                    stats[ST_NONLAT_A] += 1.0
                else:
                    price = s + h
                    stats[ST_LAT_A] += 1.0
                cash += price * ell
                q -= ell
                s += P[G_D] * ell
                fee += P[C_D] * ell
                stats[ST_SIGNED_DARK] += ell
                stats[ST_COV] += -ell * (P[G_D] * ell)
            else:
                if u_lat < lam[5]:
                    lat_flag = 0.0
                    price = s
                    stats[ST_NONLAT_B] += 1.0
                else:
                    price = s - h
                    stats[ST_LAT_B] += 1.0
                cash -= price * ell
                q += ell
                s -= P[G_D] * ell
                fee += P[C_D] * ell
                stats[ST_SIGNED_DARK] -= ell
                stats[ST_COV] += ell * (-P[G_D] * ell)
            y += z_tab[k_slice, qi, j]
            stats[ST_COUNT + j] += 1.0
            if q < stats[ST_QMIN]:
                stats[ST_QMIN] = q
            if q > stats[ST_QMAX]:
                stats[ST_QMAX] = q
            if n_ev < max_ev:
                events[n_ev, 0] = t
                events[n_ev, 1] = j
                events[n_ev, 2] = lat_flag if j >= 2 else -1.0
                events[n_ev, 3] = ell
                events[n_ev, 4] = price
                events[n_ev, 5] = q
                events[n_ev, 6] = cash
                events[n_ev, 7] = y
            n_ev += 1
        cand = t - np.log(u_exp) / lam_tot

    stats[ST_PL] = cash + q * s - q0 * stats[ST_S0]
    stats[ST_Y] = y
    stats[ST_FEE] = fee
    stats[ST_QT] = q
    stats[ST_ST] = s
    stats[ST_STILDE] = s_tilde
    stats[ST_CASH] = cash
    stats[ST_NEV] = n_ev
    return n_ev


@njit(cache=True, parallel=True)
def simulate(keys, T, slice_dt, euler_dt, quotes_tab, z_tab, h_tab, q0, y0, s0, P, max_ev):
    n = keys.shape[0]
    stats = np.zeros((n, N_STAT))
    events = np.zeros((n, max_ev, EV_COLS))
    for p in prange(n):
        stats[p, ST_S0] = s0
        _one_path(keys[p], T, slice_dt, euler_dt, quotes_tab, z_tab, h_tab, q0, y0, P,
                  stats[p], events[p], max_ev)
    return stats, events
