"""numpy twin of the event loop: all paths advance in lockstep.

Each iteration moves every live path by one step (a continuous segment plus,
when the candidate arrival falls inside it, one candidate event). Draw
counters are per path, so the streams match the numba kernel draw for draw.
"""
import numpy as np

from ..rng import uniform_np
from .params import A_D, A_L, C_D, C_L, EPS, GAMMA, G_D, G_L, HALF_TICK, K_D, K_L, Q_BAR, SIGMA
from .simlayout import (EV_COLS, N_STAT, ST_CAND, ST_CASH, ST_CLAMPED, ST_COMP, ST_COUNT, ST_COV,
                        ST_FEE, ST_LAT_A, ST_LAT_B, ST_NEV, ST_NONLAT_A, ST_NONLAT_B, ST_PL,
                        ST_QMAX, ST_QMIN, ST_QT, ST_S0, ST_SIGNED_DARK, ST_SIGNED_LIT, ST_ST,
                        ST_STILDE, ST_Y)

TWO_PI = 2.0 * np.pi


def _lams(al, bl, P):
    tot = al + bl
    live = tot > 0
    safe = np.where(live, tot, 1.0)
    ia = np.where(live, al / safe, 0.0)
    ib = np.where(live, bl / safe, 0.0)
    lam = np.empty((al.shape[0], 4))
    lam[:, 0] = np.where(live, P[A_L] * np.exp(-P[K_L] * ia), P[EPS])
    lam[:, 1] = np.where(live, P[A_L] * np.exp(-P[K_L] * ib), P[EPS])
    lam[:, 2] = np.where(live, P[A_D] * np.exp(-P[K_D] * ib), P[EPS])
    lam[:, 3] = np.where(live, P[A_D] * np.exp(-P[K_D] * ia), P[EPS])
    return lam, ia, ib


def simulate(keys, T, slice_dt, euler_dt, quotes_tab, z_tab, h_tab, q0, y0, s0, P, max_ev):
    keys = np.asarray(keys, dtype=np.uint64)
    n = keys.shape[0]
    stats = np.zeros((n, N_STAT))
    events = np.zeros((n, max_ev, EV_COLS))
    qb = P[Q_BAR]
    sig = P[SIGMA]
    gam = P[GAMMA]
    h = P[HALF_TICK]
    a_l = P[A_L]
    a_d = P[A_D]
    lam_tot = 2.0 * a_l + 2.0 * a_d
    n_slices = quotes_tab.shape[0]
    by_q = quotes_tab.shape[1] > 1
    one = np.uint64(1)

    ctr = np.zeros(n, dtype=np.uint64)
    t = np.zeros(n)
    q = np.full(n, float(q0))
    s_tilde = np.full(n, float(s0))
    s = s_tilde.copy()
    cash = np.zeros(n)
    y = np.full(n, float(y0))
    fee = np.zeros(n)
    k_slice = np.zeros(n, dtype=np.int64)
    m_euler = np.zeros(n, dtype=np.int64)
    n_ev = np.zeros(n, dtype=np.int64)
    stats[:, ST_S0] = s0
    stats[:, ST_QMIN] = q
    stats[:, ST_QMAX] = q
    g_imp = np.array([P[G_L], P[G_L], P[G_D], P[G_D]])
    c_fee = np.array([P[C_L], P[C_L], P[C_D], P[C_D]])
    sign = np.array([1.0, -1.0, 1.0, -1.0])

    cand = t - np.log(uniform_np(keys, ctr)) / lam_tot
    ctr += one
    alive = np.ones(n, dtype=bool)
    while alive.any():
        idx = np.nonzero(alive)[0]
        ks = k_slice[idx]
        me = m_euler[idx]
        ti = t[idx]
        qq = q[idx]
        # the last slice extends to T
        b_slice = np.where(ks < n_slices - 1, (ks + 1) * slice_dt, np.inf)
        b_euler = (me + 1) * euler_dt
        nb = np.minimum(np.minimum(b_slice, b_euler), T)
        ci = cand[idx]
        seg_end = np.minimum(ci, nb)
        is_event = ci < nb

        qi = np.rint(qq + qb).astype(np.int64) if by_q else np.zeros(idx.size, dtype=np.int64)
        vol = quotes_tab[ks, qi, :].astype(np.float64)
        cap_a = qq + qb
        cap_b = qb - qq
        over = np.stack([vol[:, 0] > cap_a, vol[:, 1] > cap_b,
                         vol[:, 2] > cap_a, vol[:, 3] > cap_b], axis=1)
        vol[:, 0] = np.minimum(vol[:, 0], cap_a)
        vol[:, 2] = np.minimum(vol[:, 2], cap_a)
        vol[:, 1] = np.minimum(vol[:, 1], cap_b)
        vol[:, 3] = np.minimum(vol[:, 3], cap_b)
        stats[idx, ST_CLAMPED] += over.any(axis=1)
        lam, ia, ib = _lams(vol[:, 0], vol[:, 1], P)
        ask_on = qq > -qb
        bid_on = qq < qb
        zs = z_tab[ks, qi, 4]
        hh = h_tab[ks, qi]

        dt = seg_end - ti
        c0 = ctr[idx]
        u1 = uniform_np(keys[idx], c0)
        u2 = uniform_np(keys[idx], c0 + one)
        ctr[idx] = c0 + np.uint64(2)
        pos = dt > 0
        dtp = np.where(pos, dt, 0.0)
        dS = np.where(pos, sig * np.sqrt(dtp) * np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2), 0.0)
        s_tilde[idx] += dS
        s[idx] += dS
        y[idx] += np.where(pos, zs * dS + (0.5 * gam * sig * sig * (zs + qq) ** 2 - hh) * dtp, 0.0)
        act = np.stack([ask_on, bid_on, ask_on, bid_on], axis=1)
        stats[idx, ST_COMP:ST_COMP + 4] += np.where(act & pos[:, None], lam * dtp[:, None], 0.0)
        t[idx] = seg_end

        # boundary crossings
        nev = ~is_event
        done = nev & (seg_end >= T)
        alive[idx[done]] = False
        step = nev & ~done
        adv_k = step & (nb == b_slice) & (ks < n_slices - 1)
        adv_m = step & (nb == b_euler)
        k_slice[idx[adv_k]] += 1
        m_euler[idx[adv_m]] += 1

        # candidate events
        e = np.nonzero(is_event)[0]
        if e.size == 0:
            continue
        pe = idx[e]
        stats[pe, ST_CAND] += 1.0
        ce = ctr[pe]
        ke = keys[pe]
        u_str = uniform_np(ke, ce)
        u_acc = uniform_np(ke, ce + one)
        u_lat = uniform_np(ke, ce + np.uint64(2))
        u_exp = uniform_np(ke, ce + np.uint64(3))
        ctr[pe] = ce + np.uint64(4)
        x = u_str * lam_tot
        j = np.where(x < a_l, 0, np.where(x < 2.0 * a_l, 1, np.where(x < 2.0 * a_l + a_d, 2, 3)))
        dom = np.where(j < 2, a_l, a_d)
        lam_j = lam[e, j]
        active = act[e, j]
        fill = active & (u_acc * dom < lam_j)
        f = np.nonzero(fill)[0]
        if f.size:
            pf = pe[f]
            ef = e[f]
            jf = j[f]
            ell = vol[ef, jf]
            sg = sign[jf]
            nonlat = np.zeros(f.size, dtype=bool)
            da = jf == 2
            db = jf == 3
            nonlat[da] = u_lat[f][da] < ia[ef][da]
            nonlat[db] = u_lat[f][db] < ib[ef][db]
            sf = s[pf]
            price = np.where(nonlat, sf, sf + sg * h)
            cash[pf] += sg * price * ell
            q[pf] -= sg * ell
            s[pf] = sf + sg * g_imp[jf] * ell
            fee[pf] += c_fee[jf] * ell
            lit = jf < 2
            stats[pf[lit], ST_SIGNED_LIT] += sg[lit] * ell[lit]
            stats[pf[~lit], ST_SIGNED_DARK] += sg[~lit] * ell[~lit]
            stats[pf, ST_COV] += -sg * ell * (sg * g_imp[jf] * ell)
            stats[pf[da & nonlat], ST_NONLAT_A] += 1.0
            stats[pf[da & ~nonlat], ST_LAT_A] += 1.0
            stats[pf[db & nonlat], ST_NONLAT_B] += 1.0
            stats[pf[db & ~nonlat], ST_LAT_B] += 1.0
            y[pf] += z_tab[ks[ef], qi[ef], jf]
            np.add.at(stats, (pf, ST_COUNT + jf), 1.0)
            qn = q[pf]
            stats[pf, ST_QMIN] = np.minimum(stats[pf, ST_QMIN], qn)
            stats[pf, ST_QMAX] = np.maximum(stats[pf, ST_QMAX], qn)
            slot = n_ev[pf]
            w = slot < max_ev
            pw, sw = pf[w], slot[w]
            events[pw, sw, 0] = t[pw]
            events[pw, sw, 1] = jf[w]
            events[pw, sw, 2] = np.where(jf[w] >= 2, np.where(nonlat[w], 0.0, 1.0), -1.0)
            events[pw, sw, 3] = ell[w]
            events[pw, sw, 4] = price[w]
            events[pw, sw, 5] = qn[w]
            events[pw, sw, 6] = cash[pw]
            events[pw, sw, 7] = y[pw]
            n_ev[pf] += 1
        cand[pe] = t[pe] - np.log(u_exp) / lam_tot

    stats[:, ST_PL] = cash + q * s - q0 * stats[:, ST_S0]
    stats[:, ST_Y] = y
    stats[:, ST_FEE] = fee
    stats[:, ST_QT] = q
    stats[:, ST_ST] = s
    stats[:, ST_STILDE] = s_tilde
    stats[:, ST_CASH] = cash
    stats[:, ST_NEV] = n_ev
    return stats, events
