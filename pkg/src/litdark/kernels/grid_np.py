"""Vectorised numpy counterparts of :mod:`grid_nb` with identical tie-breaking."""
import numpy as np

from .params import (A_D, A_L, C_D, C_L, EPS, ETA, GAMMA, G_D, G_L, HALF_TICK,
                     K_D, K_L, Q_BAR, SIGMA)


def _f(x, gamma):
    return -np.expm1(-gamma * x) / gamma


def _pair_state(al, bl, P):
    al, bl = np.meshgrid(al, bl, indexing="ij")
    tot = al + bl
    live = tot > 0
    safe = np.where(live, tot, 1.0)
    ia = np.where(live, al / safe, 0.0)
    ib = np.where(live, bl / safe, 0.0)
    lam_al = np.where(live, P[A_L] * np.exp(-P[K_L] * ia), P[EPS])
    lam_bl = np.where(live, P[A_L] * np.exp(-P[K_L] * ib), P[EPS])
    lam_ad = np.where(live, P[A_D] * np.exp(-P[K_D] * ib), P[EPS])
    lam_bd = np.where(live, P[A_D] * np.exp(-P[K_D] * ia), P[EPS])
    return al, bl, ia, ib, lam_al, lam_bl, lam_ad, lam_bd


def _dark_tables(z, q, sgn, vols, P):
    """F_lat, F_non with shape (len(z), len(vols))."""
    h, gd, gam = P[HALF_TICK], P[G_D], P[GAMMA]
    z = np.atleast_1d(np.asarray(z, dtype=float))[:, None]
    v = vols[None, :]
    f_lat = _f(z + v * (h + (sgn * gd) * q) - gd * v * v, gam)
    f_non = _f(z + v * ((sgn * gd) * q) - gd * v * v, gam)
    return f_lat, f_non


def _dark_best(w_lat, w_non, f_lat, f_non):
    """Best dark index and weighted value; output shape (nz, *w_lat.shape)."""
    W = (w_lat[None, ..., None] * f_lat[:, None, None, :]
         + w_non[None, ..., None] * f_non[:, None, None, :])
    k = np.argmax(W, axis=-1)
    return k, np.take_along_axis(W, k[..., None], axis=-1)[..., 0]


def _pick(val, tot, order=None):
    """Index of the max of ``val`` (last axis); ties to smallest ``tot``, then to the
    smallest ``order`` (default: position)."""
    best = np.max(val, axis=-1, keepdims=True)
    tie = val == best
    t = np.where(tie, tot, np.inf)
    tmin = np.min(t, axis=-1, keepdims=True)
    cand = tie & (t == tmin)
    if order is None:
        return np.argmax(cand, axis=-1)
    return np.argmin(np.where(cand, order, np.iinfo(np.int64).max), axis=-1)


def _short_order(ni, nj):
    """Rank of the flattened (i, j) pair grid in (j, i) order."""
    i, j = np.meshgrid(np.arange(ni), np.arange(nj), indexing="ij")
    return (j * ni + i).ravel()


def _row_flipped(q, v):
    if q != 0:
        return q < 0
    d = np.nonzero(v != v[::-1])[0]
    return bool(d.size) and v[d[0]] > v[::-1][d[0]]


def _z_flipped(q, z):
    if q != 0:
        return q < 0
    return tuple(z) > (z[1], z[0], z[3], z[2])


def _caps(q, use_cap, P):
    if use_cap:
        return q + P[Q_BAR], P[Q_BAR] - q
    return np.inf, np.inf


def best_response_search(z, q, vol_l, vol_d, cap_ask, cap_bid, P):
    qb = P[Q_BAR]
    ask_on = 1.0 if q > -qb else 0.0
    bid_on = 1.0 if q < qb else 0.0
    la_vals = vol_l[vol_l <= cap_ask]
    lb_vals = vol_l[vol_l <= cap_bid]
    da_vals = vol_d[vol_d <= cap_ask]
    db_vals = vol_d[vol_d <= cap_bid]
    h, gl, gam = P[HALF_TICK], P[G_L], P[GAMMA]
    al, bl, ia, ib, lam_al, lam_bl, lam_ad, lam_bd = _pair_state(la_vals, lb_vals, P)
    la = ask_on * lam_al * _f(z[0] + al * (h + gl * q) - gl * al * al, gam)
    lb = bid_on * lam_bl * _f(z[1] + bl * (h + (-gl) * q) - gl * bl * bl, gam)
    if ask_on > 0:
        f_lat, f_non = _dark_tables(z[2], q, 1.0, da_vals, P)
        ka, wa = _dark_best(ib, ia, f_lat, f_non)
        ka, wa = ka[0], wa[0]
    else:
        ka, wa = np.zeros(al.shape, dtype=np.int64), np.zeros(al.shape)
    if bid_on > 0:
        f_lat, f_non = _dark_tables(z[3], q, -1.0, db_vals, P)
        kb, wb = _dark_best(ia, ib, f_lat, f_non)
        kb, wb = kb[0], wb[0]
    else:
        kb, wb = np.zeros(al.shape, dtype=np.int64), np.zeros(al.shape)
    val = (la + lb) + (ask_on * lam_ad * wa + bid_on * lam_bd * wb)
    tot = al + bl + vol_d[ka] + vol_d[kb]
    order = _short_order(*val.shape) if _z_flipped(q, z) else None
    p = _pick(val.ravel(), tot.ravel(), order)
    i, j = np.unravel_index(p, val.shape)
    out = np.array([i, j, ka[i, j], kb[i, j]], dtype=np.int64)
    return out, float(val[i, j])


def _exchange_one_q(q, zvals, vol_l, vol_d, v_row, use_cap, P):
    qb = P[Q_BAR]
    nq = v_row.shape[0]
    qi = int(round(q + qb))
    cap_ask, cap_bid = _caps(q, use_cap, P)
    ask_on = 1.0 if q > -qb else 0.0
    bid_on = 1.0 if q < qb else 0.0
    la_vals = vol_l[vol_l <= cap_ask]
    lb_vals = vol_l[vol_l <= cap_bid]
    da_vals = vol_d[vol_d <= cap_ask]
    db_vals = vol_d[vol_d <= cap_bid]
    h, gl, gam, eta = P[HALF_TICK], P[G_L], P[GAMMA], P[ETA]
    sig2 = P[SIGMA] ** 2
    zs = -gam / (gam + eta) * q
    vq = v_row[qi]
    diff = vq * (0.5 * eta * sig2 * gam * (zs + q) ** 2 + 0.5 * eta * eta * sig2 * zs * zs)

    al, bl, ia, ib, lam_al, lam_bl, lam_ad, lam_bd = _pair_state(la_vals, lb_vals, P)
    shape = al.shape
    al, bl, ia, ib = al.ravel(), bl.ravel(), ia.ravel(), ib.ravel()
    lam_al, lam_bl, lam_ad, lam_bd = (x.ravel() for x in (lam_al, lam_bl, lam_ad, lam_bd))
    zc = zvals[:, None]

    def vshift(vol, sgn):
        idx = np.clip(qi - sgn * np.rint(vol).astype(np.int64), 0, nq - 1)
        return v_row[idx]

    e_al = _f(zc + al * (h + gl * q) - gl * al * al, gam)
    e_bl = _f(zc + bl * (h + (-gl) * q) - gl * bl * bl, gam)
    HA = ask_on * lam_al * e_al
    HB = bid_on * lam_bl * e_bl
    UA = ask_on * lam_al * (np.exp(eta * (zc - P[C_L] * al)) * vshift(al, 1) - vq * (1.0 + eta * e_al))
    UB = bid_on * lam_bl * (np.exp(eta * (zc - P[C_L] * bl)) * vshift(bl, -1) - vq * (1.0 + eta * e_bl))
    nz, npair = zvals.shape[0], al.shape[0]
    if ask_on > 0:
        f_lat, f_non = _dark_tables(zvals, q, 1.0, da_vals, P)
        KA, WA = _dark_best(ib.reshape(shape), ia.reshape(shape), f_lat, f_non)
        KA, WA = KA.reshape(nz, npair), WA.reshape(nz, npair)
    else:
        KA, WA = np.zeros((nz, npair), dtype=np.int64), np.zeros((nz, npair))
    if bid_on > 0:
        f_lat, f_non = _dark_tables(zvals, q, -1.0, db_vals, P)
        KB, WB = _dark_best(ia.reshape(shape), ib.reshape(shape), f_lat, f_non)
        KB, WB = KB.reshape(nz, npair), WB.reshape(nz, npair)
    else:
        KB, WB = np.zeros((nz, npair), dtype=np.int64), np.zeros((nz, npair))
    ad, bd = vol_d[KA], vol_d[KB]
    DA = ask_on * lam_ad * WA
    DB = bid_on * lam_bd * WB
    UDA = ask_on * lam_ad * (np.exp(eta * (zc - P[C_D] * ad)) * vshift(ad, 1) - vq * (1.0 + eta * WA))
    UDB = bid_on * lam_bd * (np.exp(eta * (zc - P[C_D] * bd)) * vshift(bd, -1) - vq * (1.0 + eta * WB))
    PL = al + bl

    dark_val = DA[:, None, :] + DB[None, :, :]
    dark_tot = PL + ad[:, None, :] + bd[None, :, :]
    dark_u = UDA[:, None, :] + UDB[None, :, :]
    short = _short_order(*shape)
    m3g, m4g = np.meshgrid(np.arange(nz), np.arange(nz), indexing="ij")
    outer_flip = _row_flipped(q, v_row)
    best_u = -np.inf
    best = None
    best_key = None
    for m1 in range(nz):
        for m2 in range(nz):
            val = (HA[m1] + HB[m2]) + dark_val
            p = _pick(val, dark_tot)
            if q < 0:
                p = _pick(val, dark_tot, short)
            elif q == 0:
                fl = (m1, m2) > (m2, m1)
                fl = np.where(m1 == m2, m3g > m4g, fl)
                p = np.where(fl, _pick(val, dark_tot, short), p)
            u = diff + (UA[m1][p] + UB[m2][p]) + np.take_along_axis(dark_u, p[..., None], axis=-1)[..., 0]
            umax = float(np.max(u))
            if umax < best_u:
                continue
            if outer_flip:
                m4, m3 = np.unravel_index(int(np.argmax(u.T == umax)), u.shape)
                key = (m2, m1, int(m4), int(m3))
            else:
                m3, m4 = np.unravel_index(int(np.argmax(u == umax)), u.shape)
                key = (m1, m2, int(m3), int(m4))
            if umax > best_u or key < best_key:
                best_u = umax
                best_key = key
                best = (m1, m2, int(m3), int(m4), int(p[m3, m4]))
    m1, m2, m3, m4, pb = best
    quotes = np.array([al[pb], bl[pb], vol_d[KA[m3, pb]], vol_d[KB[m4, pb]]])
    h_val = (HA[m1, pb] + HB[m2, pb]) + (DA[m3, pb] + DB[m4, pb])
    return np.array([m1, m2, m3, m4], dtype=np.int64), quotes, best_u, float(h_val), zs


def exchange_search(q_values, zvals, vol_l, vol_d, v_row, use_cap, P):
    n = q_values.shape[0]
    zi = np.zeros((n, 4), dtype=np.int64)
    quotes = np.zeros((n, 4))
    u = np.zeros(n)
    hv = np.zeros(n)
    zs = np.zeros(n)
    for k in range(n):
        zi[k], quotes[k], u[k], hv[k], zs[k] = _exchange_one_q(
            q_values[k], zvals, vol_l, vol_d, v_row, use_cap, P)
    return zi, quotes, u, hv, zs


def mm_step(v_next, vol_l, vol_d, use_cap, dt, P):
    nq = v_next.shape[0]
    qb = P[Q_BAR]
    h, gl, gd, gam = P[HALF_TICK], P[G_L], P[G_D], P[GAMMA]
    sig2 = P[SIGMA] ** 2
    v_new = np.empty(nq)
    quotes = np.zeros((nq, 4))
    for qi in range(nq):
        q = qi - qb
        cap_ask, cap_bid = _caps(q, use_cap, P)
        ask_on = 1.0 if q > -qb else 0.0
        bid_on = 1.0 if q < qb else 0.0
        la_vals = vol_l[vol_l <= cap_ask]
        lb_vals = vol_l[vol_l <= cap_bid]
        da_vals = vol_d[vol_d <= cap_ask]
        db_vals = vol_d[vol_d <= cap_bid]
        vq = v_next[qi]

        def vshift(vol, sgn):
            idx = np.clip(qi - sgn * np.rint(vol).astype(np.int64), 0, nq - 1)
            return v_next[idx]

        al, bl, ia, ib, lam_al, lam_bl, lam_ad, lam_bd = _pair_state(la_vals, lb_vals, P)
        ta = ask_on * lam_al * (np.exp(-gam * (al * (h + gl * q) - gl * al * al)) * vshift(al, 1) - vq)
        tb = bid_on * lam_bl * (np.exp(-gam * (bl * (h + (-gl) * q) - gl * bl * bl)) * vshift(bl, -1) - vq)

        def dark(vals, sgn, w_lat, w_non):
            vs = vshift(vals, sgn)
            g_lat = vals * (h + (sgn * gd) * q) - gd * vals * vals
            g_non = vals * ((sgn * gd) * q) - gd * vals * vals
            a_lat = np.exp(-gam * g_lat) * vs - vq
            a_non = np.exp(-gam * g_non) * vs - vq
            W = w_lat[..., None] * a_lat + w_non[..., None] * a_non
            k = np.argmax(W, axis=-1)
            return k, np.take_along_axis(W, k[..., None], axis=-1)[..., 0]

        if ask_on > 0:
            ka, wa = dark(da_vals, 1, ib, ia)
        else:
            ka, wa = np.zeros(al.shape, dtype=np.int64), np.zeros(al.shape)
        if bid_on > 0:
            kb, wb = dark(db_vals, -1, ia, ib)
        else:
            kb, wb = np.zeros(al.shape, dtype=np.int64), np.zeros(al.shape)
        val = (ta + tb) + (ask_on * lam_ad * wa + bid_on * lam_bd * wb)
        tot = al + bl + vol_d[ka] + vol_d[kb]
        order = _short_order(*val.shape) if _row_flipped(q, v_next) else None
        p = _pick(val.ravel(), tot.ravel(), order)
        i, j = np.unravel_index(p, val.shape)
        quotes[qi] = [al[i, j], bl[i, j], vol_d[ka[i, j]], vol_d[kb[i, j]]]
        v_new[qi] = vq + dt * (vq * 0.5 * sig2 * gam * gam * q * q + val[i, j])
    return v_new, quotes
