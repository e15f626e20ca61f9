"""Packing of model constants into the flat float vector the kernels take."""
import numpy as np

SIGMA, HALF_TICK, A_L, A_D, K_L, K_D, G_L, G_D, EPS, Q_BAR, GAMMA, ETA, C_L, C_D = range(14)
N_PARAMS = 14


def pack(mp, ap, ep=None) -> np.ndarray:
    P = np.zeros(N_PARAMS)
    P[SIGMA] = mp.sigma
    P[HALF_TICK] = mp.half_tick
    P[A_L] = mp.a_lit
    P[A_D] = mp.a_dark
    P[K_L] = mp.theta_lit / mp.sigma
    P[K_D] = mp.theta_dark / mp.sigma
    P[G_L] = mp.gamma_lit
    P[G_D] = mp.gamma_dark
    P[EPS] = mp.eps
    P[Q_BAR] = mp.q_bar
    P[GAMMA] = ap.gamma
    if ep is not None:
        P[ETA] = ep.eta
        P[C_L] = ep.c_lit
        P[C_D] = ep.c_dark
    return P
