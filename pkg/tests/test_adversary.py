import math
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualauction.adversary import alias_identities, double_spend_rate, double_spend_trial, sybil_inflate
from dualauction.errors import RelayExhaustedError
from dualauction.protocol import Bid, TxMsg, append_relay, verify_relay_list


def make_tx(ttl=6):
    return TxMsg.create(1, 0, 12.0, Bid(12.0, 10.0, 0.0, ttl))


def exact_success(q: float, n_c: int, give_up: int) -> float:
    """Exact success probability of the race modelled by double_spend_trial."""
    if q >= 1.0:
        return 1.0
    if q <= 0.0:
        return 0.0
    r = (1 - q) / q

    def ruin(d: int) -> float:
        # walk on the lead d = private - public; absorb at +1 (win) or -give_up (quit)
        if d >= 1:
            return 1.0
        if d <= -give_up:
            return 0.0
        if abs(r - 1.0) < 1e-12:
            return (d + give_up) / (1 + give_up)
        return (1 - r ** (d + give_up)) / (1 - r ** (1 + give_up))

    @lru_cache(maxsize=None)
    def f(pub: int, priv: int) -> float:
        if pub >= n_c:
            return ruin(priv - pub)
        if priv >= n_c + 1:
            return 1.0
        return q * f(pub, priv + 1) + (1 - q) * f(pub + 1, priv)

    return f(0, 0)


def test_sybil_examples():
    tx = make_tx()
    assert sybil_inflate(tx, 0, 3) == append_relay(tx, 3)
    out = sybil_inflate(tx, 2, 3, [50, 51])
    assert len(out.relay_list) == 3 and out.bid.ttl == 3
    assert verify_relay_list(out)
    full = sybil_inflate(tx, 6, 3, range(50, 56))
    assert full.bid.ttl == 0 and len(full.relay_list) == 6
    with pytest.raises(RelayExhaustedError):
        sybil_inflate(full, 1, 4)


def test_aliases_disjoint_from_nodes():
    ids = alias_identities(7, 5, 100, 5)
    assert len(set(ids)) == 5 and min(ids) >= 100
    assert not set(ids) & set(alias_identities(8, 5, 100, 5))


def test_exact_oracle_sanity():
    assert exact_success(1.0, 6, 24) == 1.0
    assert exact_success(0.0, 6, 24) == 0.0
    qs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    ps = [exact_success(q, 6, 24) for q in qs]
    assert ps == sorted(ps)


def test_double_spend_examples():
    assert double_spend_trial(0.0, 1.0, rng=1)
    assert double_spend_rate(1.0, 20, 1) == 1.0
    assert 0.35 <= double_spend_rate(0.4, 500, 1) <= 0.65
    assert double_spend_rate(0.2, 500, 1) <= 0.1
    with pytest.raises(ValueError):
        double_spend_trial(0.5, 0.6)


@pytest.mark.parametrize("q", [0.1, 0.25, 0.4, 0.5])
def test_monte_carlo_matches_exact(q):
    trials = 4000
    p = exact_success(q, 6, 24)
    est = double_spend_rate(q, trials, seed=17)
    sigma = math.sqrt(max(p * (1 - p), 1e-4) / trials)
    assert abs(est - p) <= 4 * sigma


@settings(max_examples=50, deadline=None)
@given(u=st.integers(0, 8), ttl=st.integers(1, 6))
def test_inflate_respects_ttl(u, ttl):
    tx = make_tx(ttl)
    out = sybil_inflate(tx, u, 3, range(50, 50 + u))
    added = len(out.relay_list)
    assert added == min(u + 1, ttl)
    assert out.bid.ttl == ttl - added
    assert verify_relay_list(out)
