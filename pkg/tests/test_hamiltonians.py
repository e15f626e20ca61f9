import math

import numpy as np
import pytest

from litdark.hamiltonians import (MIRROR_INDEX, AgentParams, ExchangeParams, Incentives,
                                  agent_hamiltonian, agent_hamiltonian_grad, e_term,
                                  exchange_integrand, exchange_integrand_arrays,
                                  hamiltonian_arrays, hamiltonian_grad_arrays, interp_value,
                                  mirror_vec, zs_star)
from litdark.market import MarketParams, Pool, Quotes, Side, imbalance, intensity

AP = AgentParams()
EP = ExchangeParams()
MP = MarketParams()


def random_points(n, seed, mp=MP):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.5, mp.q_bar, (n, 4))
    z = rng.uniform(-1, 1, (n, 4))
    q = rng.uniform(-mp.q_bar + 1, mp.q_bar - 1, n)
    return L, z, q


def slow_hamiltonian(quotes, inc, q, ap, mp):
    """Term-by-term transcription of the continuous Hamiltonian."""
    g = ap.gamma
    ia, ib = imbalance(quotes)
    h = mp.half_tick

    def f(x):
        return (1.0 - math.exp(-g * x)) / g

    total = 0.0
    for side, zz, vol_l, vol_d in ((Side.ASK, inc.z_al, quotes.al, quotes.ad),
                                   (Side.BID, inc.z_bl, quotes.bl, quotes.bd)):
        phi = side.sign
        active = phi * q > -mp.q_bar
        if not active:
            continue
        lit = f(zz + vol_l * (h + phi * mp.gamma_lit * q) - mp.gamma_lit * vol_l ** 2)
        total += intensity(side, Pool.LIT, quotes, mp) * lit
    for side, zz, vol_d in ((Side.ASK, inc.z_ad, quotes.ad), (Side.BID, inc.z_bd, quotes.bd)):
        phi = side.sign
        if not phi * q > -mp.q_bar:
            continue
        w_lat, w_non = (ib, ia) if side is Side.ASK else (ia, ib)
        lat = f(zz + vol_d * (h + phi * mp.gamma_dark * q) - mp.gamma_dark * vol_d ** 2)
        non = f(zz + vol_d * (phi * mp.gamma_dark * q) - mp.gamma_dark * vol_d ** 2)
        total += intensity(side, Pool.DARK, quotes, mp) * (w_lat * lat + w_non * non)
    return total


# ---------------------------------------------------------------- e_term

def test_e_term_examples():
    assert e_term(Side.ASK, Pool.LIT, 0.0, Quotes(0, 5, 3, 3), 10.0, AP, MP) == 0.0
    for z in (-0.7, 0.0, 0.4):
        assert e_term(Side.ASK, Pool.DARK, z, Quotes(0, 0, 4, 4), 1.0, AP, MP) == 0.0
        assert e_term(Side.BID, Pool.DARK, z, Quotes(0, 0, 4, 4), 1.0, AP, MP) == 0.0


def test_e_term_small_gamma_limit():
    ap = AgentParams(gamma=1e-8)
    z, ell, q = 0.3, 20.0, 15.0
    expect = z + ell * (MP.half_tick + MP.gamma_lit * q) - MP.gamma_lit * ell ** 2
    got = e_term(Side.ASK, Pool.LIT, z, Quotes(ell, 3.0), q, ap, MP)
    assert got == pytest.approx(expect, rel=1e-6)


def test_e_term_rejects_overflow():
    with pytest.raises(ValueError):
        e_term(Side.ASK, Pool.LIT, -1e6, Quotes(1, 1), 0.0, AP, MP)


# ---------------------------------------------------------------- h^c

def test_hamiltonian_zero_point():
    assert agent_hamiltonian(Quotes(), Incentives(), 0.0, AP, MP) == 0.0


def test_hamiltonian_zero_volumes_closed_form():
    z = 0.37
    got = agent_hamiltonian(Quotes(), Incentives(z, z, 0.8, -0.2), 3.0, AP, MP)
    assert got == pytest.approx(MP.eps * 2 * (1 - math.exp(-AP.gamma * z)) / AP.gamma, rel=1e-12)


def test_hamiltonian_matches_transcription():
    L, z, q = random_points(40, 0)
    vec = hamiltonian_arrays(L, z, q, AP, MP)
    for k in range(40):
        ref = slow_hamiltonian(Quotes.from_array(L[k]), Incentives.from_array(z[k]), q[k], AP, MP)
        assert vec[k] == pytest.approx(ref, rel=1e-12)


def test_hamiltonian_inactive_side_at_limit():
    q = float(MP.q_bar)
    inc = Incentives(0.1, 0.9, 0.1, 0.9)
    a = agent_hamiltonian(Quotes(10, 10, 10, 10), inc, q, AP, MP)
    b = agent_hamiltonian(Quotes(10, 10, 10, 10), Incentives(0.1, -0.9, 0.1, -0.9), q, AP, MP)
    assert a == b


def test_hamiltonian_mirror_exact():
    L, z, q = random_points(500, 1)
    a = hamiltonian_arrays(L, z, q, AP, MP)
    b = hamiltonian_arrays(mirror_vec(L), z[:, MIRROR_INDEX], -q, AP, MP)
    assert np.array_equal(a, b)


def test_hamiltonian_increasing_in_incentives():
    L, z, q = random_points(200, 2)
    base = hamiltonian_arrays(L, z, q, AP, MP)
    for c in range(4):
        z2 = z.copy()
        z2[:, c] += 0.1
        assert np.all(hamiltonian_arrays(L, z2, q, AP, MP) > base)


# ---------------------------------------------------------------- gradient

def test_gradient_matches_finite_differences():
    L, z, q = random_points(300, 3)
    g = hamiltonian_grad_arrays(L, z, q, AP, MP)
    step = 1e-4
    for c in range(4):
        e = np.zeros(4)
        e[c] = step
        fd = (hamiltonian_arrays(L + e, z, q, AP, MP) - hamiltonian_arrays(L - e, z, q, AP, MP)) / (2 * step)
        assert np.max(np.abs(fd - g[:, c]) / np.maximum(np.abs(fd), 1e-8)) <= 1e-5


def test_gradient_symmetric_point():
    g = agent_hamiltonian_grad(Quotes(40, 40, 25, 25), Incentives(0.2, 0.2, 0.1, 0.1), 0.0, AP, MP)
    assert g[0] == pytest.approx(g[1], rel=1e-12)
    assert g[2] == pytest.approx(g[3], rel=1e-12)


def test_gradient_at_zero_lit_volume_uses_floor_branch():
    g = agent_hamiltonian_grad(Quotes(0, 0, 5, 5), Incentives(0.2, 0.3, 0.1, 0.1), 1.0, AP, MP)
    assert np.all(np.isfinite(g))
    assert g[2] == 0.0 and g[3] == 0.0


def test_gradient_negative_for_bad_incentives():
    L = np.full((1, 4), 280.0)
    g = hamiltonian_grad_arrays(L, np.full((1, 4), -1.0), np.zeros(1), AP, MP)
    assert np.all(g < 0)


# ---------------------------------------------------------------- z_s and U

def test_zs_star_examples():
    assert zs_star(0.0, AP, EP) == 0.0
    assert zs_star(100.0, AP, EP) == pytest.approx(-100.0 / 3.0, rel=1e-15)
    assert zs_star(-100.0, AP, EP) == -zs_star(100.0, AP, EP)


def test_interp_value_clamps_and_interpolates():
    row = -np.arange(1.0, 12.0)
    assert interp_value(row, 0.5, 5) == pytest.approx(-6.5)
    assert interp_value(row, 10.0, 5) == -11.0
    assert interp_value(row, -9.0, 5) == -1.0
    assert interp_value(row, 5.0, 5) == -11.0


def test_integrand_zero_volumes():
    mp = MarketParams(q_bar=5)
    v = -np.linspace(1, 2, 11)
    q = 2.0
    zs = zs_star(q, AP, EP)
    got = exchange_integrand(Incentives(0, 0, 0, 0, zs), q, Quotes(), v, AP, EP, mp)
    vq = v[7]
    diff = vq * (0.5 * EP.eta * mp.sigma ** 2 * AP.gamma * (zs + q) ** 2
                 + 0.5 * EP.eta ** 2 * mp.sigma ** 2 * zs ** 2)
    # lit streams fire at rate eps with zero volume; dark e-terms vanish
    jumps = 4 * mp.eps * (vq - vq)
    assert got == pytest.approx(diff + jumps, rel=1e-12)


def test_integrand_no_diffusion_penalty_at_flat_position():
    mp = MarketParams(q_bar=5)
    got = exchange_integrand(Incentives(), 0.0, Quotes(), -np.ones(11), AP, EP, mp)
    assert got == 0.0


def test_integrand_mirror():
    mp = MarketParams(q_bar=5)
    rng = np.random.default_rng(4)
    v = -rng.uniform(0.5, 2.0, 6)
    v = np.concatenate([v[::-1], v[1:]])
    L = rng.uniform(0, 5, (50, 4))
    z = rng.uniform(-1, 1, (50, 4))
    q = rng.uniform(-5, 5, 50)
    zs = rng.uniform(-2, 2, 50)
    a = exchange_integrand_arrays(z, zs, q, L, v, AP, EP, mp)
    b = exchange_integrand_arrays(z[:, MIRROR_INDEX], -zs, -q, mirror_vec(L), v, AP, EP, mp)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_integrand_maximised_at_zs_star():
    mp = MarketParams(q_bar=5)
    v = -np.linspace(1, 1.5, 11)
    for q in (-4.0, -1.0, 3.0, 5.0):
        scan = np.linspace(-5, 5, 2001)
        vals = exchange_integrand_arrays(np.zeros((scan.size, 4)), scan, np.full(scan.size, q),
                                         np.full((scan.size, 4), 2.0), v, AP, EP, mp)
        assert scan[np.argmax(vals)] == pytest.approx(zs_star(q, AP, EP), abs=6e-3)


def test_integrand_rejects_non_negative_values():
    mp = MarketParams(q_bar=2)
    with pytest.raises(ValueError):
        exchange_integrand(Incentives(), 0.0, Quotes(), np.array([-1, -1, 0.0, -1, -1]), AP, EP, mp)


def test_param_validation():
    with pytest.raises(ValueError):
        AgentParams(gamma=0)
    with pytest.raises(ValueError):
        ExchangeParams(reservation=0.5)
    with pytest.raises(ValueError):
        ExchangeParams(z_bar=0)
    assert Incentives(1, 2, 3, 4, 5).mirror() == Incentives(2, 1, 4, 3, -5)
