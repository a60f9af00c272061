"""Sybil-proof fee allocation, time weighting, reward estimates and settlement."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidArgumentError
from .protocol import BlockMsg, TxMsg, verify_relay_list


@dataclass(frozen=True)
class AllocationParams:
    alpha: float = 0.5
    max_path: int = 6

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.max_path < 1:
            raise InvalidArgumentError(f"max_path must be >= 1, got {self.max_path}")


def allocation_share(r: int, g: int, alpha: float, fee: float) -> float:
    """Fee share of the g-th node on a path of length r (g == r is the validator).

    Relayer g < r receives ``(1/(1+alpha))**(r-1) * alpha**g * fee``; the
    validator receives ``(1/(1+alpha))**(r-1) * fee``.
    """
    if r < 1 or not 1 <= g <= r:
        raise InvalidArgumentError(f"position g={g} outside 1..r for r={r}")
    base = fee / (1.0 + alpha) ** (r - 1)
    return base if g == r else base * alpha**g


def time_weight(now: float, timestamp: float, confirm_delay: float) -> float:
    elapsed = now - timestamp
    if elapsed <= 0.0:
        return 1.0
    return min(1.0, confirm_delay / elapsed)


def estimate_relay_reward(tx: TxMsg, now: float, params: AllocationParams) -> float:
    """Reward a relayer expects before knowing the final path.

    The relayer assumes it is the last hop before a full node, i.e. a path of
    ``L + 2 - l_t`` with itself at position ``L + 1 - l_t``.
    """
    w = time_weight(now, tx.bid.timestamp, tx.bid.confirm_delay)
    k = params.max_path + 1 - tx.bid.ttl
    return w * (1.0 / (1.0 + params.alpha)) ** k * params.alpha**k * tx.bid.fee


def estimate_validation_reward(tx: TxMsg, now: float, params: AllocationParams) -> float:
    w = time_weight(now, tx.bid.timestamp, tx.bid.confirm_delay)
    return w * tx.bid.fee / (1.0 + params.alpha) ** len(tx.relay_list)


@dataclass(frozen=True)
class TxSettlement:
    tx_id: int
    producer: int
    fee: float
    relay_payments: tuple[tuple[int, float], ...]
    validation_share: float

    @property
    def charge(self) -> float:
        return sum(a for _, a in self.relay_payments) + self.validation_share


@dataclass(frozen=True)
class Settlement:
    block_id: int
    validator: int
    validation_payment: float
    txs: tuple[TxSettlement, ...] = ()
    skipped: tuple[int, ...] = ()

    @property
    def validator_receipt(self) -> float:
        return sum(t.validation_share for t in self.txs)

    @property
    def relay_total(self) -> float:
        return sum(a for t in self.txs for _, a in t.relay_payments)

    @property
    def charge_total(self) -> float:
        return sum(t.charge for t in self.txs)

    def audit_lines(self) -> list[str]:
        """``block_id,tx_id,payee,role,amount`` rows; role is relay<g>, validator or producer-charge."""
        rows = []
        for t in self.txs:
            for g, (payee, amount) in enumerate(t.relay_payments, start=1):
                rows.append(f"{self.block_id},{t.tx_id},{payee},relay{g},{amount!r}")
            rows.append(f"{self.block_id},{t.tx_id},{self.validator},validator,{t.validation_share!r}")
            rows.append(f"{self.block_id},{t.tx_id},{t.producer},producer-charge,{t.charge!r}")
        for tx_id in self.skipped:
            rows.append(f"{self.block_id},{tx_id},-1,skipped-unverifiable,0.0")
        return rows


def settle_block(block: BlockMsg, params: AllocationParams,
                 payee_of: dict[int, int] | None = None) -> Settlement:
    """Winners and payments for a confirmed block under the dual auction.

    Each tx i pays ``alpha**g * rho_i`` to its g-th relayer, where
    ``rho_i = w_t * (1/(1+alpha))**(r_i-1) * F_i`` is evaluated at block time,
    plus ``min(nu, rho_i)`` to the proposer. ``payee_of`` maps relay
    identities (e.g. Sybil aliases) to the account that is actually paid.
    """
    payee_of = payee_of or {}
    alpha = params.alpha
    txs, skipped = [], []
    for tx in block.tx_list:
        if not verify_relay_list(tx):
            skipped.append(tx.tx_id)
            continue
        w = time_weight(block.block_time, tx.bid.timestamp, tx.bid.confirm_delay)
        rho = w * tx.bid.fee / (1.0 + alpha) ** len(tx.relay_list)
        relay = tuple((payee_of.get(e.identity, e.identity), alpha**e.order * rho)
                      for e in tx.relay_list)
        txs.append(TxSettlement(tx.tx_id, tx.producer, tx.bid.fee, relay, min(block.payment, rho)))
    return Settlement(block.block_id, block.proposer, block.payment, tuple(txs), tuple(skipped))


def settle_block_first_price(block: BlockMsg) -> Settlement:
    """Classical settlement: the proposer collects every included fee, relayers get nothing."""
    txs = tuple(TxSettlement(tx.tx_id, tx.producer, tx.bid.fee, (), tx.bid.fee)
                for tx in block.tx_list)
    return Settlement(block.block_id, block.proposer, block.payment, txs)


@dataclass
class SettlementLedger:
    """Accumulates settlements into per-account receipts and per-producer charges."""

    settlements: list[Settlement] = field(default_factory=list)
    relay_receipts: dict[int, float] = field(default_factory=dict)
    validation_receipts: dict[int, float] = field(default_factory=dict)
    charges: dict[int, float] = field(default_factory=dict)

    def add(self, s: Settlement) -> None:
        self.settlements.append(s)
        for t in s.txs:
            for payee, amount in t.relay_payments:
                self.relay_receipts[payee] = self.relay_receipts.get(payee, 0.0) + amount
            self.charges[t.producer] = self.charges.get(t.producer, 0.0) + t.charge
        if s.txs:
            self.validation_receipts[s.validator] = (
                self.validation_receipts.get(s.validator, 0.0) + s.validator_receipt)
