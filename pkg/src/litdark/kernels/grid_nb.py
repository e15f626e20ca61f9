"""numba grid searches: agent best response, exchange one-step, market-maker HJB step.

All three exploit the same structure: given the lit pair (al, bl), the ask
dark term depends only on ``ad`` and the bid dark term only on ``bd``, so the
4-D search collapses to pairs x a 1-D scan per dark side. Ties go to the
smallest total volume, then to lexicographic (al, bl, ad, bd) order when the
inventory is long and (bl, al, bd, ad) order when it is short, so the selection
commutes with the bid-ask mirror. At q = 0 the orientation comes from comparing
the input with its mirror image; a self-mirror input keeps the long order.
"""
import numpy as np

from .._backend import njit, prange
from .params import (A_D, A_L, C_D, C_L, EPS, ETA, GAMMA, G_D, G_L, HALF_TICK,
                     K_D, K_L, Q_BAR, SIGMA)


@njit(cache=True)
def _f(x, gamma):
    return -np.expm1(-gamma * x) / gamma


@njit(cache=True)
def _pair_state(al, bl, P):
    tot = al + bl
    if tot > 0:
        ia = al / tot
        ib = bl / tot
        lam_al = P[A_L] * np.exp(-P[K_L] * ia)
        lam_bl = P[A_L] * np.exp(-P[K_L] * ib)
        lam_ad = P[A_D] * np.exp(-P[K_D] * ib)
        lam_bd = P[A_D] * np.exp(-P[K_D] * ia)
    else:
        ia = 0.0
        ib = 0.0
        lam_al = P[EPS]
        lam_bl = P[EPS]
        lam_ad = P[EPS]
        lam_bd = P[EPS]
    return ia, ib, lam_al, lam_bl, lam_ad, lam_bd


@njit(cache=True)
def _lex_greater(a0, a1, a2, a3, b0, b1, b2, b3):
    if a0 != b0:
        return a0 > b0
    if a1 != b1:
        return a1 > b1
    if a2 != b2:
        return a2 > b2
    return a3 > b3


@njit(cache=True)
def _row_flipped(q, v):
    """Short orientation: q < 0, or q = 0 and v above its reverse in lex order."""
    if q != 0.0:
        return q < 0.0
    n = v.shape[0]
    for k in range(n):
        a = v[k]
        b = v[n - 1 - k]
        if a != b:
            return a > b
    return False


@njit(cache=True)
def _z_flipped(q, z0, z1, z2, z3):
    if q != 0.0:
        return q < 0.0
    return _lex_greater(z0, z1, z2, z3, z1, z0, z3, z2)


@njit(cache=True)
def _n_allowed(vols, cap):
    n = 0
    for k in range(vols.shape[0]):
        if vols[k] <= cap:
            n += 1
    return n


@njit(cache=True)
def _dark_scan(z, q, sgn, w_lat, w_non, vol_d, nd, P):
    """Best dark volume for one side; returns (index, weighted compensation)."""
    h = P[HALF_TICK]
    gd = P[G_D]
    gam = P[GAMMA]
    best = -np.inf
    kbest = 0
    for k in range(nd):
        v = vol_d[k]
        w = (w_lat * _f(z + v * (h + (sgn * gd) * q) - gd * v * v, gam)
             + w_non * _f(z + v * ((sgn * gd) * q) - gd * v * v, gam))
        if w > best:
            best = w
            kbest = k
    return kbest, best


@njit(cache=True)
def best_response_search(z, q, vol_l, vol_d, cap_ask, cap_bid, P):
    """Exhaustive maximisation of h over the volume grid.

    Returns (i_al, i_bl, i_ad, i_bd, h_value).
    """
    qb = P[Q_BAR]
    ask_on = 1.0 if q > -qb else 0.0
    bid_on = 1.0 if q < qb else 0.0
    nl_a = _n_allowed(vol_l, cap_ask)
    nl_b = _n_allowed(vol_l, cap_bid)
    nd_a = _n_allowed(vol_d, cap_ask)
    nd_b = _n_allowed(vol_d, cap_bid)
    h = P[HALF_TICK]
    gl = P[G_L]
    gam = P[GAMMA]
    flip = _z_flipped(q, z[0], z[1], z[2], z[3])
    best = -np.inf
    best_tot = np.inf
    out = np.zeros(4, dtype=np.int64)
    for i in range(nl_a):
        al = vol_l[i]
        for j in range(nl_b):
            bl = vol_l[j]
            ia, ib, lam_al, lam_bl, lam_ad, lam_bd = _pair_state(al, bl, P)
            la = ask_on * lam_al * _f(z[0] + al * (h + gl * q) - gl * al * al, gam)
            lb = bid_on * lam_bl * _f(z[1] + bl * (h + (-gl) * q) - gl * bl * bl, gam)
            if ask_on > 0:
                ka, wa = _dark_scan(z[2], q, 1.0, ib, ia, vol_d, nd_a, P)
            else:
                ka, wa = 0, 0.0
            if bid_on > 0:
                kb, wb = _dark_scan(z[3], q, -1.0, ia, ib, vol_d, nd_b, P)
            else:
                kb, wb = 0, 0.0
            da = ask_on * lam_ad * wa
            db = bid_on * lam_bd * wb
            val = (la + lb) + (da + db)
            tot = al + bl + vol_d[ka] + vol_d[kb]
            if val > best or (val == best and (tot < best_tot or (
                    tot == best_tot and flip and j < out[1]))):
                best = val
                best_tot = tot
                out[0] = i
                out[1] = j
                out[2] = ka
                out[3] = kb
    return out, best


@njit(cache=True)
def _vidx(qi, shift, nq):
    k = qi + shift
    if k < 0:
        return 0
    if k > nq - 1:
        return nq - 1
    return k


@njit(cache=True)
def _exchange_one_q(q, zvals, vol_l, vol_d, v_row, use_cap, P):
    qb = P[Q_BAR]
    nq = v_row.shape[0]
    qi = int(round(q + qb))
    if use_cap:
        cap_ask = q + qb
        cap_bid = qb - q
    else:
        cap_ask = np.inf
        cap_bid = np.inf
    ask_on = 1.0 if q > -qb else 0.0
    bid_on = 1.0 if q < qb else 0.0
    nl_a = _n_allowed(vol_l, cap_ask)
    nl_b = _n_allowed(vol_l, cap_bid)
    nd_a = _n_allowed(vol_d, cap_ask)
    nd_b = _n_allowed(vol_d, cap_bid)
    npair = nl_a * nl_b
    nz = zvals.shape[0]
    h = P[HALF_TICK]
    gl = P[G_L]
    gam = P[GAMMA]
    eta = P[ETA]
    sig2 = P[SIGMA] * P[SIGMA]
    zs = -gam / (gam + eta) * q
    vq = v_row[qi]
    diff = vq * (0.5 * eta * sig2 * gam * (zs + q) ** 2 + 0.5 * eta * eta * sig2 * zs * zs)

    HA = np.empty((nz, npair))
    HB = np.empty((nz, npair))
    DA = np.empty((nz, npair))
    DB = np.empty((nz, npair))
    KA = np.empty((nz, npair), dtype=np.int64)
    KB = np.empty((nz, npair), dtype=np.int64)
    UA = np.empty((nz, npair))
    UB = np.empty((nz, npair))
    UDA = np.empty((nz, npair))
    UDB = np.empty((nz, npair))
    PL = np.empty(npair)
    for i in range(nl_a):
        al = vol_l[i]
        for j in range(nl_b):
            bl = vol_l[j]
            p = i * nl_b + j
            PL[p] = al + bl
            ia, ib, lam_al, lam_bl, lam_ad, lam_bd = _pair_state(al, bl, P)
            v_al = v_row[_vidx(qi, -int(round(al)), nq)]
            v_bl = v_row[_vidx(qi, int(round(bl)), nq)]
            for m in range(nz):
                zz = zvals[m]
                e_al = _f(zz + al * (h + gl * q) - gl * al * al, gam)
                e_bl = _f(zz + bl * (h + (-gl) * q) - gl * bl * bl, gam)
                HA[m, p] = ask_on * lam_al * e_al
                HB[m, p] = bid_on * lam_bl * e_bl
                UA[m, p] = ask_on * lam_al * (np.exp(eta * (zz - P[C_L] * al)) * v_al
                                              - vq * (1.0 + eta * e_al))
                UB[m, p] = bid_on * lam_bl * (np.exp(eta * (zz - P[C_L] * bl)) * v_bl
                                              - vq * (1.0 + eta * e_bl))
                if ask_on > 0:
                    ka, wa = _dark_scan(zz, q, 1.0, ib, ia, vol_d, nd_a, P)
                else:
                    ka, wa = 0, 0.0
                if bid_on > 0:
                    kb, wb = _dark_scan(zz, q, -1.0, ia, ib, vol_d, nd_b, P)
                else:
                    kb, wb = 0, 0.0
                ad = vol_d[ka]
                bd = vol_d[kb]
                KA[m, p] = ka
                KB[m, p] = kb
                DA[m, p] = ask_on * lam_ad * wa
                DB[m, p] = bid_on * lam_bd * wb
                v_ad = v_row[_vidx(qi, -int(round(ad)), nq)]
                v_bd = v_row[_vidx(qi, int(round(bd)), nq)]
                UDA[m, p] = ask_on * lam_ad * (np.exp(eta * (zz - P[C_D] * ad)) * v_ad
                                               - vq * (1.0 + eta * wa))
                UDB[m, p] = bid_on * lam_bd * (np.exp(eta * (zz - P[C_D] * bd)) * v_bd
                                               - vq * (1.0 + eta * wb))

    outer_flip = _row_flipped(q, v_row)
    best_u = -np.inf
    best_z = np.zeros(4, dtype=np.int64)
    best_p = 0
    for m1 in range(nz):
        for m2 in range(nz):
            for m3 in range(nz):
                for m4 in range(nz):
                    fl = _z_flipped(q, m1, m2, m3, m4)
                    hbest = -np.inf
                    tbest = np.inf
                    pbest = 0
                    for p in range(npair):
                        val = (HA[m1, p] + HB[m2, p]) + (DA[m3, p] + DB[m4, p])
                        if val > hbest:
                            hbest = val
                            tbest = PL[p] + vol_d[KA[m3, p]] + vol_d[KB[m4, p]]
                            pbest = p
                        elif val == hbest:
                            tot = PL[p] + vol_d[KA[m3, p]] + vol_d[KB[m4, p]]
                            if tot < tbest or (tot == tbest and fl and p % nl_b < pbest % nl_b):
                                tbest = tot
                                pbest = p
                    u = diff + (UA[m1, pbest] + UB[m2, pbest]) + (UDA[m3, pbest] + UDB[m4, pbest])
                    if u > best_u or (u == best_u and outer_flip and _lex_greater(
                            best_z[1], best_z[0], best_z[3], best_z[2], m2, m1, m4, m3)):
                        best_u = u
                        best_z[0] = m1
                        best_z[1] = m2
                        best_z[2] = m3
                        best_z[3] = m4
                        best_p = pbest
    m1, m2, m3, m4 = best_z[0], best_z[1], best_z[2], best_z[3]
    quotes = np.empty(4)
    quotes[0] = vol_l[best_p // nl_b]
    quotes[1] = vol_l[best_p % nl_b]
    quotes[2] = vol_d[KA[m3, best_p]]
    quotes[3] = vol_d[KB[m4, best_p]]
    h_val = (HA[m1, best_p] + HB[m2, best_p]) + (DA[m3, best_p] + DB[m4, best_p])
    return best_z, quotes, best_u, h_val, zs


@njit(cache=True, parallel=True)
def exchange_search(q_values, zvals, vol_l, vol_d, v_row, use_cap, P):
    """Per inventory: (z indices, quotes, max U, agent H, z_s)."""
    n = q_values.shape[0]
    zi = np.zeros((n, 4), dtype=np.int64)
    quotes = np.zeros((n, 4))
    u = np.zeros(n)
    hv = np.zeros(n)
    zs = np.zeros(n)
    for k in prange(n):
        bz, bq, bu, bh, bs = _exchange_one_q(q_values[k], zvals, vol_l, vol_d, v_row, use_cap, P)
        zi[k, :] = bz
        quotes[k, :] = bq
        u[k] = bu
        hv[k] = bh
        zs[k] = bs
    return zi, quotes, u, hv, zs


@njit(cache=True)
def _mm_dark_terms(q, qi, sgn, vq, v_row, vol_d, nd, P):
    # per-volume payoffs of a dark fill, split by latency outcome
    h = P[HALF_TICK]
    gd = P[G_D]
    gam = P[GAMMA]
    nq = v_row.shape[0]
    a_lat = np.empty(nd)
    a_non = np.empty(nd)
    for k in range(nd):
        v = vol_d[k]
        vs = v_row[_vidx(qi, -int(sgn) * int(round(v)), nq)]
        g_lat = v * (h + (sgn * gd) * q) - gd * v * v
        g_non = v * ((sgn * gd) * q) - gd * v * v
        a_lat[k] = np.exp(-gam * g_lat) * vs - vq
        a_non[k] = np.exp(-gam * g_non) * vs - vq
    return a_lat, a_non


@njit(cache=True)
def _mm_dark_scan(w_lat, w_non, a_lat, a_non):
    best = -np.inf
    kbest = 0
    for k in range(a_lat.shape[0]):
        w = w_lat * a_lat[k] + w_non * a_non[k]
        if w > best:
            best = w
            kbest = k
    return kbest, best


@njit(cache=True, parallel=True)
def mm_step(v_next, vol_l, vol_d, use_cap, dt, P):
    """One explicit backward step of the market-maker HJB without exchange."""
    nq = v_next.shape[0]
    qb = P[Q_BAR]
    h = P[HALF_TICK]
    gl = P[G_L]
    gam = P[GAMMA]
    sig2 = P[SIGMA] * P[SIGMA]
    v_new = np.empty(nq)
    quotes = np.zeros((nq, 4))
    for qi in prange(nq):
        q = qi - qb
        if use_cap:
            cap_ask = q + qb
            cap_bid = qb - q
        else:
            cap_ask = np.inf
            cap_bid = np.inf
        ask_on = 1.0 if q > -qb else 0.0
        bid_on = 1.0 if q < qb else 0.0
        nl_a = _n_allowed(vol_l, cap_ask)
        nl_b = _n_allowed(vol_l, cap_bid)
        nd_a = _n_allowed(vol_d, cap_ask)
        nd_b = _n_allowed(vol_d, cap_bid)
        vq = v_next[qi]
        da_lat, da_non = _mm_dark_terms(q, qi, 1.0, vq, v_next, vol_d, nd_a, P)
        db_lat, db_non = _mm_dark_terms(q, qi, -1.0, vq, v_next, vol_d, nd_b, P)
        flip = _row_flipped(q, v_next)
        best = -np.inf
        best_tot = np.inf
        bi = 0
        bj = 0
        bka = 0
        bkb = 0
        for i in range(nl_a):
            al = vol_l[i]
            v_al = v_next[_vidx(qi, -int(round(al)), nq)]
            for j in range(nl_b):
                bl = vol_l[j]
                v_bl = v_next[_vidx(qi, int(round(bl)), nq)]
                ia, ib, lam_al, lam_bl, lam_ad, lam_bd = _pair_state(al, bl, P)
                ta = ask_on * lam_al * (np.exp(-gam * (al * (h + gl * q) - gl * al * al)) * v_al - vq)
                tb = bid_on * lam_bl * (np.exp(-gam * (bl * (h + (-gl) * q) - gl * bl * bl)) * v_bl - vq)
                if ask_on > 0:
                    ka, wa = _mm_dark_scan(ib, ia, da_lat, da_non)
                else:
                    ka, wa = 0, 0.0
                if bid_on > 0:
                    kb, wb = _mm_dark_scan(ia, ib, db_lat, db_non)
                else:
                    kb, wb = 0, 0.0
                val = (ta + tb) + (ask_on * lam_ad * wa + bid_on * lam_bd * wb)
                tot = al + bl + vol_d[ka] + vol_d[kb]
                if val > best or (val == best and (tot < best_tot or (
                        tot == best_tot and flip and j < bj))):
                    best = val
                    best_tot = tot
                    bi = i
                    bj = j
                    bka = ka
                    bkb = kb
        quotes[qi, 0] = vol_l[bi]
        quotes[qi, 1] = vol_l[bj]
        quotes[qi, 2] = vol_d[bka]
        quotes[qi, 3] = vol_d[bkb]
        v_new[qi] = vq + dt * (vq * 0.5 * sig2 * gam * gam * q * q + best)
    return v_new, quotes
