"""Validation sub-auction: miner pools, VCG selection, block building and mining clocks."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Container

from .allocation import AllocationParams, estimate_validation_reward
from .errors import InvalidArgumentError
from .protocol import BlockMsg, TxMsg
from .relay import PoolEntry, rank_key


@dataclass
class MinerPool:
    capacity: int = 40
    entries: dict[int, PoolEntry] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tx_id: int) -> bool:
        return tx_id in self.entries


def admit_to_miner_pool(pool: MinerPool, tx: TxMsg, now: float, validation_cost: float,
                        params: AllocationParams, confirmed: Container[int] = (),
                        estimate: Callable[[TxMsg, float], float] | None = None) -> bool:
    """Admit a tx whose validation estimate covers the cost; keep the best copy per tx."""
    if tx.tx_id in confirmed:
        return False
    est = estimate(tx, now) if estimate else estimate_validation_reward(tx, now, params)
    if est < validation_cost:
        return False
    current = pool.entries.get(tx.tx_id)
    if current is not None and current.estimate >= est:
        return False
    pool.entries[tx.tx_id] = PoolEntry(tx, est)
    return True


def vcg_select(pool: MinerPool, capacity: int | None = None,
               confirmed: Container[int] = ()) -> tuple[list[TxMsg], float]:
    """Top-M winners by estimate and the uniform (M+1)-th price.

    With M or fewer bidders the price is 0. Winners leave the pool; entries
    already confirmed on the miner's chain are discarded first.
    """
    m = pool.capacity if capacity is None else capacity
    for tx_id in [t for t in pool.entries if t in confirmed]:
        del pool.entries[tx_id]
    ranked = sorted(pool.entries.values(), key=rank_key)
    winners = ranked[:m]
    price = ranked[m].estimate if len(ranked) > m else 0.0
    for e in winners:
        del pool.entries[e.tx.tx_id]
    return [e.tx for e in winners], price


def build_block(parent: BlockMsg, winners: list[TxMsg], payment: float, proposer: int,
                block_time: float, block_id: int, capacity: int | None = None,
                confirmed: Container[int] = ()) -> BlockMsg:
    if capacity is not None and len(winners) > capacity:
        raise InvalidArgumentError(f"{len(winners)} winners exceed block capacity {capacity}")
    txs = tuple(tx for tx in winners if tx.tx_id not in confirmed)
    return BlockMsg(block_id, parent.height + 1, proposer, parent.block_id, txs, block_time, payment)


@dataclass
class MiningProcess:
    miner: int
    hash_power: float
    next_completion: float = float("inf")


def schedule_mining(miners: list[MiningProcess], block_interval: float, rng: random.Random,
                    now: float = 0.0) -> tuple[int, float]:
    """Arm one exponential clock per miner and return the earliest completion.

    Each clock has rate ``hash_power / block_interval``, so the network as a
    whole produces one block per ``block_interval`` on average.
    """
    best = None
    for m in miners:
        if m.hash_power <= 0.0:
            m.next_completion = float("inf")
            continue
        m.next_completion = now + rng.expovariate(m.hash_power / block_interval)
        if best is None or m.next_completion < best.next_completion:
            best = m
    if best is None:
        raise InvalidArgumentError("no miner has positive hash power")
    return best.miner, best.next_completion
