"""Run metrics: throughput, confirmation, bandwidth, utilities, welfare and learner regret."""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .allocation import Settlement
from .errors import AccountingError, InvalidArgumentError
from .protocol import ChainState
from .relay import LearnerRound

WELFARE_RTOL = 1e-6
ACCOUNTING_RTOL = 1e-9


def compute_tps(chain: ChainState, duration: float, n_c: int) -> float:
    """Distinct txs in main-chain blocks at depth >= ``n_c``, per second."""
    if duration <= 0:
        raise InvalidArgumentError("duration must be positive")
    seen = set()
    for block in chain.main_blocks()[1:]:
        if chain.depth(block) >= n_c:
            seen.update(tx.tx_id for tx in block.tx_list)
    return len(seen) / duration


def compute_confirm_prob(produced: int, confirmed: int) -> float:
    if not 0 <= confirmed <= produced:
        raise InvalidArgumentError(f"need produced >= confirmed >= 0, got ({produced}, {confirmed})")
    return confirmed / produced if produced else 0.0


@dataclass
class Utilities:
    """Per-node utilities assembled from settlements and incurred costs."""

    relay_reward: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    validation_reward: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    relay_cost: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    validation_cost: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    # producer surplus V - charge, and the literal delta*(V - F) form
    producer_surplus: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    producer_surplus_literal: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    charges: dict[int, float] = field(default_factory=lambda: defaultdict(float))

    def total(self, node: int) -> float:
        return (self.relay_reward[node] + self.validation_reward[node] + self.producer_surplus[node]
                - self.relay_cost[node] - self.validation_cost[node])


def node_utilities(settlements: Iterable[Settlement], values: dict[int, float],
                   relay_costs: dict[int, float], blocks_proposed: dict[int, int],
                   validation_costs: dict[int, float]) -> Utilities:
    """Light-node and full-node utilities with the actual confirmation indicators.

    ``values`` maps tx id to the producer's private value. Every proposed
    block costs its miner ``c_v``, whether or not it ended up on the main chain.
    """
    u = Utilities()
    for s in settlements:
        for t in s.txs:
            for payee, amount in t.relay_payments:
                u.relay_reward[payee] += amount
            u.validation_reward[s.validator] += t.validation_share
            u.charges[t.producer] += t.charge
            v = values[t.tx_id]
            u.producer_surplus[t.producer] += v - t.charge
            u.producer_surplus_literal[t.producer] += v - t.fee
    for node, c in relay_costs.items():
        u.relay_cost[node] += c
    for node, k in blocks_proposed.items():
        u.validation_cost[node] += k * validation_costs[node]
    return u


def compute_social_welfare(settlements: Sequence[Settlement], values: dict[int, float],
                           relay_costs: dict[int, float], blocks_proposed: dict[int, int],
                           validation_costs: dict[int, float]) -> float:
    """Sum of node utilities, cross-checked against the transfer-cancelled form.

    Raises ``AccountingError`` if the two disagree beyond a relative 1e-6.
    """
    u = node_utilities(settlements, values, relay_costs, blocks_proposed, validation_costs)
    nodes = set(u.relay_reward) | set(u.validation_reward) | set(u.producer_surplus) \
        | set(u.relay_cost) | set(u.validation_cost)
    direct = math.fsum(u.total(n) for n in nodes)
    cancelled = (math.fsum(values[t.tx_id] for s in settlements for t in s.txs)
                 - math.fsum(u.relay_cost.values()) - math.fsum(u.validation_cost.values()))
    scale = max(1.0, abs(direct), abs(cancelled))
    if abs(direct - cancelled) > WELFARE_RTOL * scale:
        raise AccountingError(f"welfare mismatch: direct {direct!r} vs transfer-cancelled {cancelled!r}")
    return direct


def check_accounting(settlements: Sequence[Settlement]) -> tuple[float, float]:
    """Return (receipts, charges) after asserting they balance to 1e-9 relative."""
    receipts = math.fsum(s.relay_total + s.validator_receipt for s in settlements)
    charges = math.fsum(s.charge_total for s in settlements)
    if abs(receipts - charges) > ACCOUNTING_RTOL * max(1.0, abs(charges)):
        raise AccountingError(f"receipts {receipts!r} != charges {charges!r}")
    return receipts, charges


@dataclass(frozen=True)
class RegretGap:
    achieved: float
    best_fixed: float
    bound: float
    rounds: int

    @property
    def gap(self) -> float:
        return self.best_fixed - self.achieved


def regret_bound(gamma: float, rounds: int, mu: float = 1.0) -> float:
    return math.log(2) / gamma + mu * mu * gamma * rounds


def learner_regret(rounds: Sequence[LearnerRound], gamma: float, mu: float = 1.0) -> RegretGap:
    """Expected utility of one learner against the better constant policy.

    Utilities are negated costs. The best fixed action is found by replaying
    both constant policies over the recorded cost sequence.
    """
    achieved = -math.fsum(r.p_relay * r.cost_relay + (1.0 - r.p_relay) * r.cost_drop for r in rounds)
    always_relay = -math.fsum(r.cost_relay for r in rounds)
    always_drop = -math.fsum(r.cost_drop for r in rounds)
    return RegretGap(achieved, max(always_relay, always_drop), regret_bound(gamma, len(rounds), mu),
                     len(rounds))


def compute_regret_gap(history: Sequence[LearnerRound], gamma: float, mu: float = 1.0,
                       max_rounds: int | None = None) -> RegretGap:
    """Per-node regret: one learner per source, gaps and bounds summed.

    ``max_rounds`` keeps only the node's first rounds, as in the per-node
    regret figure.
    """
    if max_rounds is not None:
        history = history[:max_rounds]
    by_source: dict[int, list[LearnerRound]] = defaultdict(list)
    for r in history:
        by_source[r.source].append(r)
    parts = [learner_regret(by_source[s], gamma, mu) for s in sorted(by_source)]
    return RegretGap(math.fsum(p.achieved for p in parts), math.fsum(p.best_fixed for p in parts),
                     math.fsum(p.bound for p in parts), sum(p.rounds for p in parts))


@dataclass
class RunMetrics:
    tps: float
    confirm_prob: float
    produced: int
    confirmed: int
    bandwidth_total: float
    tx_transmissions: int
    block_transmissions: int
    social_welfare: float
    relay_reward_total: float
    validation_reward_total: float
    relay_cost_total: float
    validation_cost_total: float
    charge_total: float
    producer_surplus_total: float
    producer_surplus_literal_total: float
    attacker_utility: float
    blocks_main: int
    blocks_proposed: int
    utilities: dict[int, float] = field(default_factory=dict)
    regret: dict[int, RegretGap] = field(default_factory=dict)

    # scalar columns written to metrics.csv, in this order
    COLUMNS = ("tps", "confirm_prob", "produced", "confirmed", "bandwidth_total", "tx_transmissions",
               "block_transmissions", "social_welfare", "relay_reward_total", "validation_reward_total",
               "relay_cost_total", "validation_cost_total", "charge_total", "producer_surplus_total",
               "producer_surplus_literal_total", "attacker_utility", "blocks_main", "blocks_proposed")

    def row(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in self.COLUMNS}


def compute_metrics(result) -> RunMetrics:
    """Derive every metric of one run from its ``RunResult``."""
    cfg = result.config
    settlements = result.settlements
    _, charges = check_accounting(settlements)
    values = {tx_id: v for tx_id, (_, v, _, _) in result.produced.items()}
    vcosts = {u: r.validation_cost for u, r in result.roles.items()}
    u = node_utilities(settlements, values, result.relay_costs, result.blocks_proposed, vcosts)
    welfare = compute_social_welfare(settlements, values, result.relay_costs,
                                     result.blocks_proposed, vcosts)
    confirmed = len({t.tx_id for s in settlements for t in s.txs})
    produced = len(result.produced)
    chain = result.chain
    attacker = result.sybil_attacker
    regret = {node: compute_regret_gap(h, cfg.gamma, 1.0, cfg.regret_rounds)
              for node, h in result.learner_history.items() if h}
    return RunMetrics(
        tps=compute_tps(chain, cfg.duration, cfg.n_c),
        confirm_prob=compute_confirm_prob(produced, confirmed),
        produced=produced,
        confirmed=confirmed,
        bandwidth_total=result.bandwidth,
        tx_transmissions=result.tx_transmissions,
        block_transmissions=result.block_transmissions,
        social_welfare=welfare,
        relay_reward_total=math.fsum(u.relay_reward.values()),
        validation_reward_total=math.fsum(u.validation_reward.values()),
        relay_cost_total=math.fsum(u.relay_cost.values()),
        validation_cost_total=math.fsum(u.validation_cost.values()),
        charge_total=charges,
        producer_surplus_total=math.fsum(u.producer_surplus.values()),
        producer_surplus_literal_total=math.fsum(u.producer_surplus_literal.values()),
        attacker_utility=u.relay_reward[attacker] - u.relay_cost[attacker],
        blocks_main=sum(1 for b in chain.main_blocks()[1:] if chain.depth(b) >= cfg.n_c),
        blocks_proposed=sum(result.blocks_proposed.values()),
        utilities={n: u.total(n) for n in range(cfg.n_nodes)},
        regret=regret,
    )
