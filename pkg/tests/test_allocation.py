import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualauction.allocation import (AllocationParams, allocation_share, estimate_relay_reward,
                                    estimate_validation_reward, settle_block, settle_block_first_price,
                                    time_weight)
from dualauction.errors import InvalidArgumentError
from dualauction.protocol import Bid, BlockMsg, TxMsg, append_relay

P = AllocationParams(alpha=0.5, max_path=6)


def share_oracle(r, g, alpha, fee):
    """Exact rational evaluation of the allocation rule."""
    alpha, fee = Fraction(alpha), Fraction(fee)
    base = (1 / (1 + alpha)) ** (r - 1) * fee
    return base if g == r else base * alpha**g


def tx_with(relays, fee=12.0, ts=0.0, tx_id=1):
    tx = TxMsg.create(tx_id, 0, fee, Bid(fee, 10.0, ts, 6))
    for node in relays:
        tx = append_relay(tx, node)
    return tx


def test_share_examples():
    assert allocation_share(1, 1, 0.5, 10) == 10
    assert allocation_share(3, 3, 0.5, 12) == pytest.approx(16 / 3, rel=1e-12)
    assert allocation_share(3, 1, 0.5, 12) == pytest.approx(8 / 3, rel=1e-12)
    assert allocation_share(3, 2, 0.5, 12) == pytest.approx(4 / 3, rel=1e-12)
    assert sum(allocation_share(3, g, 0.5, 12) for g in (1, 2, 3)) == pytest.approx(28 / 3, rel=1e-12)
    assert [allocation_share(5, g, 0.0, 7) for g in range(1, 6)] == [0, 0, 0, 0, 7]


@pytest.mark.parametrize("r,g", [(3, 0), (3, 4), (0, 1)])
def test_share_rejects_bad_position(r, g):
    with pytest.raises(InvalidArgumentError):
        allocation_share(r, g, 0.5, 1.0)


@settings(max_examples=300)
@given(r=st.integers(1, 12), alpha=st.sampled_from([k / 20 for k in range(21)]),
       fee=st.floats(0.01, 1000))
def test_share_matches_rational_oracle(r, alpha, fee):
    for g in range(1, r + 1):
        assert math.isclose(allocation_share(r, g, alpha, fee), float(share_oracle(r, g, alpha, fee)),
                            rel_tol=1e-12, abs_tol=1e-300)


@settings(max_examples=300)
@given(r=st.integers(1, 12), alpha=st.floats(0, 1), fee=st.floats(0.001, 1e4))
def test_budget(r, alpha, fee):
    total = math.fsum(allocation_share(r, g, alpha, fee) for g in range(1, r + 1))
    assert total <= fee * (1 + 1e-9)


def test_time_weight():
    assert time_weight(5, 0, 10) == 1
    assert time_weight(20, 0, 10) == 0.5
    assert time_weight(10, 0, 10) == 1
    assert time_weight(3, 3, 10) == 1


@settings(max_examples=200)
@given(t1=st.floats(0, 100), t2=st.floats(0, 100), tc=st.floats(0.1, 50))
def test_time_weight_non_increasing(t1, t2, tc):
    lo, hi = sorted((t1, t2))
    assert time_weight(hi, 0.0, tc) <= time_weight(lo, 0.0, tc)


def test_relay_estimate_examples():
    assert estimate_relay_reward(tx_with([]), 0.0, P) == pytest.approx(4.0, rel=1e-12)
    deep = tx_with([1, 2, 3, 4, 5])
    assert estimate_relay_reward(deep, 0.0, P) == pytest.approx((2 / 3) ** 6 * 0.5**6 * 12, rel=1e-12)
    assert estimate_relay_reward(tx_with([1]), 0.0, AllocationParams(0.0, 6)) == 0


def test_validation_estimate_examples():
    assert estimate_validation_reward(tx_with([]), 0.0, P) == 12
    assert estimate_validation_reward(tx_with([1, 2]), 0.0, P) == pytest.approx(16 / 3, rel=1e-12)
    tx = TxMsg.create(1, 0, 10.0, Bid(10.0, 10.0, 0.0, 6))
    assert estimate_validation_reward(tx, 20.0, P) == 5


def test_validation_estimate_decreases_with_hops():
    prev = None
    for hops in range(7):
        est = estimate_validation_reward(tx_with(range(hops)), 0.0, P)
        if prev is not None:
            assert est < prev
        prev = est


def test_settle_direct_tx():
    tx = TxMsg.create(1, 0, 10.0, Bid(10.0, 10.0, 0.0, 6))
    s = settle_block(BlockMsg(1, 1, 9, 0, (tx,), block_time=1.0, payment=4.0), P)
    t = s.txs[0]
    assert t.relay_payments == ()
    assert t.validation_share == 4.0 and t.charge == 4.0


def test_settle_clamps_validation_share():
    tx = tx_with([7, 8])
    s = settle_block(BlockMsg(1, 1, 9, 0, (tx,), block_time=1.0, payment=100.0), P)
    t = s.txs[0]
    assert [p for _, p in t.relay_payments] == pytest.approx([8 / 3, 4 / 3], rel=1e-12)
    assert [n for n, _ in t.relay_payments] == [7, 8]
    assert t.validation_share == pytest.approx(16 / 3, rel=1e-12)
    assert t.charge == pytest.approx(28 / 3, rel=1e-12)
    assert t.charge <= 12


def test_settle_empty_block():
    s = settle_block(BlockMsg(1, 1, 9, 0, ()), P)
    assert s.txs == () and s.validator_receipt == 0


def test_settle_skips_tampered_tx():
    import dataclasses
    tx = tx_with([7, 8])
    bad = dataclasses.replace(tx, relay_list=tx.relay_list[:1])
    s = settle_block(BlockMsg(1, 1, 9, 0, (bad, tx_with([], tx_id=2))), P)
    assert s.skipped == (1,)
    assert [t.tx_id for t in s.txs] == [2]
    assert any("skipped" in line for line in s.audit_lines())


def test_alias_payments_go_to_attacker():
    tx = tx_with([3, 1000, 1001])
    s = settle_block(BlockMsg(1, 1, 9, 0, (tx,), payment=1.0), P, payee_of={1000: 3, 1001: 3})
    assert {n for n, _ in s.txs[0].relay_payments} == {3}


def test_first_price_settlement():
    tx = tx_with([1, 2])
    s = settle_block_first_price(BlockMsg(1, 1, 9, 0, (tx,)))
    assert s.txs[0].relay_payments == () and s.txs[0].charge == 12.0


@settings(max_examples=200)
@given(paths=st.lists(st.integers(0, 6), min_size=0, max_size=8), payment=st.floats(0, 200),
       block_time=st.floats(0, 60), alpha=st.floats(0, 1))
def test_settlement_balance_and_ir(paths, payment, block_time, alpha):
    params = AllocationParams(alpha, 6)
    txs = tuple(tx_with(range(100, 100 + k), fee=10.0 + i, tx_id=i + 1) for i, k in enumerate(paths))
    s = settle_block(BlockMsg(1, 1, 9, 0, txs, block_time=block_time, payment=payment), params)
    assert math.isclose(s.charge_total, s.relay_total + s.validator_receipt, rel_tol=1e-12, abs_tol=1e-12)
    for t in s.txs:
        assert t.charge <= t.fee * (1 + 1e-12)
        assert all(a >= 0 for _, a in t.relay_payments) and t.validation_share >= 0
