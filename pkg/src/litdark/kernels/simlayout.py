"""Column layout of the per-path statistics and event-log arrays."""

STAT_NAMES = (
    "s0", "pl_change", "y_T", "fee_total", "q_T", "q_min", "q_max",
    "n_al", "n_bl", "n_ad", "n_bd",
    "n_ad_lat", "n_bd_lat", "n_ad_nonlat", "n_bd_nonlat",
    "signed_lit_volume", "signed_dark_volume",
    "s_T", "s_tilde_T", "cash_T", "cov_qs",
    "comp_al", "comp_bl", "comp_ad", "comp_bd",
    "n_clamped", "n_candidates", "n_events",
)
N_STAT = len(STAT_NAMES)
(ST_S0, ST_PL, ST_Y, ST_FEE, ST_QT, ST_QMIN, ST_QMAX,
 ST_COUNT, _c1, _c2, _c3,
 ST_LAT_A, ST_LAT_B, ST_NONLAT_A, ST_NONLAT_B,
 ST_SIGNED_LIT, ST_SIGNED_DARK,
 ST_ST, ST_STILDE, ST_CASH, ST_COV,
 ST_COMP, _p1, _p2, _p3,
 ST_CLAMPED, ST_CAND, ST_NEV) = range(N_STAT)

EVENT_NAMES = ("t", "stream", "latency", "volume", "price", "q", "cash", "y")
EV_COLS = len(EVENT_NAMES)
STREAMS = (("ask", "lit"), ("bid", "lit"), ("ask", "dark"), ("bid", "dark"))
