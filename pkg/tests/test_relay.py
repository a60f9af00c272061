import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualauction.allocation import settle_block
from dualauction.allocation import AllocationParams
from dualauction.errors import ConfigError
from dualauction.protocol import Bid, BlockMsg, TxMsg, append_relay
from dualauction.relay import (Action, ActionWeights, PendingOutcome, RelayPool, admit_to_pool,
                               check_learning_rate, decide_receive, expire_outcomes, flush_top_n,
                               forward, hedge_update, no_regret_update, resolve_outcomes)


def make_tx(tx_id=1, fee=12.0, ts=0.0, ttl=6, producer=0):
    return TxMsg.create(tx_id, producer, fee, Bid(fee, 10.0, ts, ttl))


def test_decide_receive_examples():
    w = ActionWeights()
    assert decide_receive(make_tx(), w, 0.49) is Action.RELAY
    assert decide_receive(make_tx(ttl=0), w, 0.0) is Action.DROP
    w.weights[0] = [0.2, 0.8]
    assert decide_receive(make_tx(), w, 0.75) is Action.DROP


def test_admit_to_pool_examples():
    pool = RelayPool()
    assert admit_to_pool(pool, make_tx(1), 3.0, 1.0)
    assert not admit_to_pool(pool, make_tx(2), 0.5, 1.0)
    assert admit_to_pool(pool, make_tx(3), 2.0, 1.0)
    assert admit_to_pool(pool, make_tx(3), 4.0, 1.0)
    assert not admit_to_pool(pool, make_tx(3), 2.0, 1.0)
    assert len(pool) == 2 and pool.entries[3].estimate == 4.0


def test_flush_examples():
    pool = RelayPool(10)
    for i in range(11):
        admit_to_pool(pool, make_tx(i + 1), float(i + 1), 0.0)
    out = flush_top_n(pool)
    assert [t.tx_id for t in out] == list(range(11, 1, -1))
    assert list(pool.entries) == [1]

    pool = RelayPool(10)
    for i in range(10):
        admit_to_pool(pool, make_tx(i + 1), float(i + 1), 0.0)
    assert flush_top_n(pool) == [] and len(pool) == 10


def test_flush_tie_prefers_earlier_timestamp():
    pool = RelayPool(2)
    admit_to_pool(pool, make_tx(1, ts=3.0), 5.0, 0.0)
    admit_to_pool(pool, make_tx(2, ts=1.0), 5.0, 0.0)
    admit_to_pool(pool, make_tx(3, ts=0.0), 1.0, 0.0)
    assert [t.tx_id for t in flush_top_n(pool)] == [2, 1]


def test_forward_examples():
    rng = random.Random(4)
    out = forward(make_tx(), 7, 3, {1, 2, 3, 4, 5}, rng, sender=1)
    targets = [v for v, _ in out]
    assert len(set(targets)) == 3 and 1 not in targets
    assert all(t.relay_list[-1].identity == 7 and t.bid.ttl == 5 for _, t in out)
    assert sorted(v for v, _ in forward(make_tx(), 7, 3, {1, 2}, rng)) == [1, 2]


def test_last_hop_leaves_ttl_zero():
    tx = make_tx(ttl=1)
    [(_, sent)] = forward(tx, 7, 1, {1}, random.Random(0))
    assert sent.bid.ttl == 0
    assert decide_receive(sent, ActionWeights(), 0.0) is Action.DROP


def test_no_regret_update_examples():
    w = ActionWeights()
    p = no_regret_update(w, 0, Action.RELAY, 1.0, 0.001)
    assert w.weights[0] == pytest.approx([0.999, 1.0])
    assert p == pytest.approx(0.999 / 1.999)
    no_regret_update(w, 0, Action.DROP, 0.0, 0.001)
    assert w.weights[0] == pytest.approx([0.999, 1.0])
    w2 = ActionWeights()
    assert no_regret_update(w2, 5, Action.RELAY, -0.3, 0.01) > 0.5


def test_update_rejects_large_step():
    with pytest.raises(ConfigError):
        no_regret_update(ActionWeights(), 0, Action.RELAY, 1.0, 0.6)
    with pytest.raises(ConfigError):
        check_learning_rate(0.6)
    check_learning_rate(0.001)


def test_weights_are_per_source():
    w = ActionWeights()
    no_regret_update(w, 1, Action.RELAY, 1.0, 0.1)
    assert w.p_relay(2) == 0.5 and w.p_relay(1) < 0.5


def test_resolve_outcomes_examples():
    # ν=4 paid to node 9 as the sole relayer: F chosen so alpha*rho = 4
    params = AllocationParams(0.5, 6)
    tx = append_relay(make_tx(1, fee=18.0), 9)
    s = settle_block(BlockMsg(1, 1, 20, 0, (tx,), block_time=0.0, payment=0.0), params)
    assert s.txs[0].relay_payments == ((9, pytest.approx(6.0)),)
    pending = {1: PendingOutcome(1, 0, Action.RELAY, 1.0, 30.0)}
    [(src, action, cost)] = resolve_outcomes(pending, s, 9, 10.0)
    assert (src, action) == (0, Action.RELAY) and cost == pytest.approx(-0.5)

    tx = append_relay(make_tx(2, fee=12.0), 9)
    s = settle_block(BlockMsg(2, 1, 20, 0, (tx,), payment=0.0), params)
    pending = {2: PendingOutcome(2, 0, Action.RELAY, 1.0, 30.0)}
    assert resolve_outcomes(pending, s, 9, 10.0)[0][2] == pytest.approx((1 - 4) / 10)

    pending = {3: PendingOutcome(3, 0, Action.RELAY, 1.0, 5.0),
               4: PendingOutcome(4, 0, Action.DROP, 1.0, 5.0),
               5: PendingOutcome(5, 0, Action.RELAY, 1.0, 50.0)}
    events = expire_outcomes(pending, 10.0, 10.0)
    assert sorted(c for _, _, c in events) == [0.0, pytest.approx(0.1)]
    assert list(pending) == [5]


@settings(max_examples=200)
@given(costs=st.lists(st.floats(-1, 1), min_size=1, max_size=200),
       gamma=st.sampled_from([0.001, 0.01, 0.1, 0.5]))
def test_p_relay_stays_a_probability(costs, gamma):
    w = ActionWeights(record=False)
    for i, c in enumerate(costs):
        p = no_regret_update(w, 0, Action.RELAY if i % 3 else Action.DROP, c, gamma)
        assert 0.0 <= p <= 1.0
        p = hedge_update(w, 0, c, -c, gamma)
        assert 0.0 <= p <= 1.0


@settings(max_examples=100)
@given(ests=st.lists(st.floats(0, 50), min_size=0, max_size=30), window=st.integers(1, 12))
def test_flush_returns_best_and_keeps_rest(ests, window):
    pool = RelayPool(window)
    for i, e in enumerate(ests):
        admit_to_pool(pool, make_tx(i + 1), e, 0.0)
    before = {k: v.estimate for k, v in pool.entries.items()}
    out = flush_top_n(pool)
    if len(before) <= window:
        assert out == []
        return
    assert len(out) == window
    sent = [before[t.tx_id] for t in out]
    assert sent == sorted(sent, reverse=True)
    assert min(sent) >= max((e.estimate for e in pool.entries.values()), default=-1)
