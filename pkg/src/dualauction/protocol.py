"""Message types, relay lists and per-node longest-chain state."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .errors import RelayExhaustedError

GENESIS_ID = 0


@dataclass(frozen=True, slots=True)
class Bid:
    fee: float
    confirm_delay: float
    timestamp: float
    ttl: int


@dataclass(frozen=True, slots=True)
class RelayEntry:
    identity: int
    order: int


def compute_seal(tx_id: int, bid: Bid, relay_list: tuple[RelayEntry, ...]) -> int:
    """Deterministic 64-bit digest standing in for the relayers' signatures."""
    parts = [repr(tx_id), repr(bid.fee), repr(bid.confirm_delay), repr(bid.timestamp), repr(bid.ttl)]
    parts += [f"{e.identity}:{e.order}" for e in relay_list]
    return int.from_bytes(hashlib.blake2b("|".join(parts).encode(), digest_size=8).digest(), "big")


@dataclass(frozen=True, slots=True)
class TxMsg:
    tx_id: int
    producer: int
    value: float
    bid: Bid
    relay_list: tuple[RelayEntry, ...] = ()
    seal: int = 0

    @classmethod
    def create(cls, tx_id: int, producer: int, value: float, bid: Bid) -> "TxMsg":
        return cls(tx_id, producer, value, bid, (), compute_seal(tx_id, bid, ()))

    @property
    def path_length(self) -> int:
        """Relays plus the validating full node."""
        return len(self.relay_list) + 1


def same_transaction(a: TxMsg, b: TxMsg) -> bool:
    return a.tx_id == b.tx_id


def append_relay(tx: TxMsg, node: int) -> TxMsg:
    """Sign ``<node, g>`` onto the relay list and spend one hop of TTL."""
    if tx.bid.ttl < 1:
        raise RelayExhaustedError(f"tx {tx.tx_id} has no relay hops left")
    relay_list = tx.relay_list + (RelayEntry(node, len(tx.relay_list) + 1),)
    bid = replace(tx.bid, ttl=tx.bid.ttl - 1)
    return TxMsg(tx.tx_id, tx.producer, tx.value, bid, relay_list,
                 compute_seal(tx.tx_id, bid, relay_list))


def verify_relay_list(tx: TxMsg) -> bool:
    if any(e.order != i for i, e in enumerate(tx.relay_list, start=1)):
        return False
    return tx.seal == compute_seal(tx.tx_id, tx.bid, tx.relay_list)


@dataclass(frozen=True, slots=True)
class BlockMsg:
    block_id: int
    height: int
    proposer: int
    parent: int
    tx_list: tuple[TxMsg, ...] = ()
    block_time: float = 0.0
    payment: float = 0.0
    nonce: int = 0


@dataclass(frozen=True, slots=True)
class SynMsg:
    sender: int
    height: int


GENESIS = BlockMsg(GENESIS_ID, 0, -1, -1)


def sync_check(local_height: int, remote_height: int, n_c: int) -> bool:
    """Whether a peer is far enough ahead to request a full chain transfer."""
    return remote_height - local_height >= n_c


@dataclass
class ChainState:
    """One node's block tree with first-received longest-chain selection.

    ``main`` lists block ids on the tip's chain indexed by height, and
    ``confirmed`` maps each tx id on that chain to the height that holds it.
    After a tip change, ``last_added`` and ``last_abandoned`` describe the
    blocks that joined and left the main chain.
    """

    blocks: dict[int, BlockMsg] = field(default_factory=lambda: {GENESIS_ID: GENESIS})
    main: list[int] = field(default_factory=lambda: [GENESIS_ID])
    confirmed: dict[int, int] = field(default_factory=dict)
    orphans: dict[int, list[BlockMsg]] = field(default_factory=dict)
    last_added: list[BlockMsg] = field(default_factory=list)
    last_abandoned: list[BlockMsg] = field(default_factory=list)

    @property
    def tip(self) -> int:
        return self.main[-1]

    @property
    def height(self) -> int:
        return len(self.main) - 1

    def __contains__(self, block_id: int) -> bool:
        return block_id in self.blocks

    def on_main_chain(self, block: BlockMsg) -> bool:
        return block.height < len(self.main) and self.main[block.height] == block.block_id

    def depth(self, block: BlockMsg) -> int:
        """Confirmations of a main-chain block; the tip has depth 1, off-chain blocks 0."""
        return self.height - block.height + 1 if self.on_main_chain(block) else 0

    def main_blocks(self) -> list[BlockMsg]:
        return [self.blocks[b] for b in self.main]

    def insert(self, block: BlockMsg) -> bool:
        """Add ``block`` (and any orphans it unlocks); return True if the tip moved."""
        self.last_added, self.last_abandoned = [], []
        if block.block_id in self.blocks:
            return False
        if block.parent not in self.blocks:
            bucket = self.orphans.setdefault(block.parent, [])
            if all(o.block_id != block.block_id for o in bucket):
                bucket.append(block)
            return False
        old_tip = self.tip
        pending = [block]
        best = self.blocks[old_tip]
        while pending:
            b = pending.pop(0)
            if b.block_id in self.blocks:
                continue
            self.blocks[b.block_id] = b
            if b.height > best.height:
                best = b
            pending.extend(self.orphans.pop(b.block_id, []))
        if best.block_id == old_tip:
            return False
        self._switch_to(best)
        return True

    def _switch_to(self, new_tip: BlockMsg) -> None:
        branch = []
        b = new_tip
        while b.height >= len(self.main) or self.main[b.height] != b.block_id:
            branch.append(b)
            b = self.blocks[b.parent]
        fork_height = b.height
        abandoned = [self.blocks[i] for i in self.main[fork_height + 1:]]
        for old in abandoned:
            for tx in old.tx_list:
                if self.confirmed.get(tx.tx_id) == old.height:
                    del self.confirmed[tx.tx_id]
        del self.main[fork_height + 1:]
        branch.reverse()
        for nb in branch:
            self.main.append(nb.block_id)
            for tx in nb.tx_list:
                self.confirmed.setdefault(tx.tx_id, nb.height)
        self.last_added = branch
        self.last_abandoned = abandoned

    def dump(self) -> str:
        """Main chain as ``height,block_id,proposer,tx_count,payment`` records."""
        lines = ["height,block_id,proposer,tx_count,payment"]
        for b in self.main_blocks():
            lines.append(f"{b.height},{b.block_id},{b.proposer},{len(b.tx_list)},{b.payment!r}")
        return "\n".join(lines) + "\n"
