import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litdark.market import (MarketParams, Pool, Quotes, Side, imbalance, imbalance_arrays,
                            impact_increment, intensities_arrays, intensity, latency_prob,
                            max_intensity, psi)

MP = MarketParams()
vol = st.floats(min_value=0.0, max_value=600.0, allow_nan=False)


def test_imbalance_examples():
    assert imbalance(Quotes(100, 300)) == (0.25, 0.75)
    assert imbalance(Quotes(0, 0)) == (0.0, 0.0)
    assert imbalance(Quotes(7, 7, 3, 1)) == (0.5, 0.5)


def test_psi_examples():
    q = Quotes(100, 300)
    assert psi(Side.ASK, Pool.LIT, q) == 0.25
    assert psi(Side.BID, Pool.DARK, q) == 0.25
    assert psi(Side.ASK, Pool.DARK, q) == 0.75
    assert psi(Side.BID, Pool.LIT, q) == 0.75


def test_intensity_examples():
    assert intensity(Side.ASK, Pool.LIT, Quotes(0, 0, 5, 5), MP) == MP.eps
    assert intensity(Side.ASK, Pool.LIT, Quotes(10, 10), MP) == pytest.approx(5000 * math.exp(-0.75))
    assert intensity(Side.ASK, Pool.LIT, Quotes(10, 10), MP) == pytest.approx(2361.8328, abs=1e-4)
    flat = MP.replace(theta_lit=0.0)
    assert intensity(Side.BID, Pool.LIT, Quotes(3, 9), flat) == MP.a_lit


def test_impact_examples():
    assert impact_increment(Side.ASK, Pool.LIT, 100, MP) == pytest.approx(0.01)
    assert impact_increment(Side.BID, Pool.DARK, 100, MP) == pytest.approx(-0.005)
    assert impact_increment(Side.BID, Pool.LIT, 0, MP) == 0


def test_latency_examples():
    assert latency_prob(Side.ASK, Quotes(300, 100)) == 0.75
    assert latency_prob(Side.BID, Quotes(300, 100)) == 0.25
    assert latency_prob(Side.ASK, Quotes(0, 0)) == 0.0
    assert latency_prob(Side.BID, Quotes(0, 0)) == 0.0


def test_param_invariants():
    with pytest.raises(ValueError):
        MarketParams(gamma_lit=1e-5, gamma_dark=1e-4)
    with pytest.raises(ValueError):
        MarketParams(eps=10000.0)
    with pytest.raises(ValueError):
        MarketParams(q_bar=0)
    with pytest.raises(ValueError):
        MarketParams(sigma=-1)
    with pytest.raises(ValueError):
        MarketParams.from_mapping({"sigma": 0.1, "bogus": 1})
    assert MarketParams.from_mapping({"sigma": 0.2}).sigma == 0.2


def test_quotes_admissibility_and_mirror():
    assert Quotes(300, 0, 300, 0).is_admissible(300)
    assert not Quotes(301, 0, 300, 0).is_admissible(300)
    assert not Quotes(-1, 0, 0, 0).is_admissible(300)
    assert Quotes(1, 2, 3, 4).mirror() == Quotes(2, 1, 4, 3)


@settings(max_examples=200, deadline=None)
@given(vol, vol)
def test_imbalance_is_a_split(al, bl):
    ia, ib = imbalance(Quotes(al, bl))
    if al + bl > 0:
        assert ia + ib == pytest.approx(1.0)
        assert 0 <= ia <= 1 and 0 <= ib <= 1
    else:
        assert (ia, ib) == (0.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(vol, vol, vol, vol)
def test_mirror_and_bound(al, bl, ad, bd):
    q, m = Quotes(al, bl, ad, bd), Quotes(bl, al, bd, ad)
    for pool in Pool:
        assert intensity(Side.ASK, pool, q, MP) == pytest.approx(intensity(Side.BID, pool, m, MP))
        for side in Side:
            assert 0 < intensity(side, pool, q, MP) <= max_intensity(pool, MP)


def test_monotonicity_sampled():
    rng = np.random.default_rng(0)
    for _ in range(200):
        al, bl = rng.uniform(0.1, 300, 2)
        d = rng.uniform(0.1, 50)
        base = intensity(Side.ASK, Pool.LIT, Quotes(al, bl), MP)
        assert intensity(Side.ASK, Pool.LIT, Quotes(al + d, bl), MP) < base
        assert intensity(Side.ASK, Pool.LIT, Quotes(al, bl + d), MP) > base


def test_array_versions_agree_with_scalars():
    rng = np.random.default_rng(1)
    al = rng.uniform(0, 10, 50)
    bl = rng.uniform(0, 10, 50)
    al[:3] = 0
    bl[:3] = 0
    ia, ib = imbalance_arrays(al, bl)
    lam = intensities_arrays(al, bl, MP)
    streams = [(Side.ASK, Pool.LIT), (Side.BID, Pool.LIT), (Side.ASK, Pool.DARK), (Side.BID, Pool.DARK)]
    for k in range(50):
        q = Quotes(al[k], bl[k])
        assert (ia[k], ib[k]) == pytest.approx(imbalance(q))
        for j, (side, pool) in enumerate(streams):
            assert lam[j][k] == pytest.approx(intensity(side, pool, q, MP), rel=1e-14)
