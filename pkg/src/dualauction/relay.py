"""Relay sub-auction and the multiplicative-weights relaying-probability learner."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .allocation import Settlement
from .errors import ConfigError
from .protocol import TxMsg, append_relay


class Action(enum.Enum):
    DROP = 0
    RELAY = 1


@dataclass
class LearnerRound:
    source: int
    p_relay: float
    action: Action
    cost_relay: float
    cost_drop: float = 0.0


@dataclass
class ActionWeights:
    """Relay/drop weights kept separately for every transaction source.

    Sources never seen before start at weights (1, 1), i.e. p_relay = 1/2.
    When ``record`` is set every update is appended to ``history`` so that
    regret can be recomputed afterwards.
    """

    weights: dict[int, list[float]] = field(default_factory=dict)
    record: bool = True
    history: list[LearnerRound] = field(default_factory=list)

    def get(self, source: int) -> list[float]:
        w = self.weights.get(source)
        if w is None:
            w = self.weights[source] = [1.0, 1.0]  # [relay, drop]
        return w

    def p_relay(self, source: int) -> float:
        w = self.get(source)
        return w[0] / (w[0] + w[1])


def decide_receive(tx: TxMsg, weights: ActionWeights, rnd: float) -> Action:
    if tx.bid.ttl >= 1 and rnd <= weights.p_relay(tx.producer):
        return Action.RELAY
    return Action.DROP


def check_learning_rate(gamma: float, mu_norm: float = 1.0) -> None:
    """Reject learning rates outside the validity range of the multiplicative update."""
    if not 0.0 < gamma or gamma * mu_norm > 0.5:
        raise ConfigError(f"learning rate {gamma} with cost bound {mu_norm} violates gamma*mu <= 1/2")


def no_regret_update(weights: ActionWeights, source: int, action: Action, cost: float,
                     gamma: float) -> float:
    """Multiply the taken action's weight by ``1 - gamma * cost``; return the new p_relay.

    ``cost`` is already normalised into [-1, 1]; the action not taken sees cost 0.
    """
    if gamma * abs(cost) > 0.5:
        raise ConfigError(f"gamma * |cost| = {gamma * abs(cost)} exceeds 1/2")
    w = weights.get(source)
    if weights.record:
        weights.history.append(LearnerRound(source, w[0] / (w[0] + w[1]), action,
                                            cost if action is Action.RELAY else 0.0,
                                            cost if action is Action.DROP else 0.0))
    w[0 if action is Action.RELAY else 1] *= 1.0 - gamma * cost
    total = w[0] + w[1]
    if total < 1e-150:
        w[0] /= total
        w[1] /= total
    return w[0] / (w[0] + w[1])


def hedge_update(weights: ActionWeights, source: int, cost_relay: float, cost_drop: float,
                 gamma: float) -> float:
    """Full-information round: both actions see their cost in the same step."""
    if gamma * max(abs(cost_relay), abs(cost_drop)) > 0.5:
        raise ConfigError("gamma * |cost| exceeds 1/2")
    w = weights.get(source)
    if weights.record:
        weights.history.append(LearnerRound(source, w[0] / (w[0] + w[1]), Action.RELAY,
                                            cost_relay, cost_drop))
    w[0] *= 1.0 - gamma * cost_relay
    w[1] *= 1.0 - gamma * cost_drop
    total = w[0] + w[1]
    if total < 1e-150:
        w[0] /= total
        w[1] /= total
    return w[0] / (w[0] + w[1])


@dataclass
class PoolEntry:
    tx: TxMsg
    estimate: float
    sender: int | None = None


def rank_key(entry: PoolEntry) -> tuple[float, float, int]:
    return (-entry.estimate, entry.tx.bid.timestamp, entry.tx.tx_id)


@dataclass
class RelayPool:
    """Pending relay candidates, at most one per transaction."""

    window: int = 10
    entries: dict[int, PoolEntry] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tx_id: int) -> bool:
        return tx_id in self.entries

    def take_top(self, k: int) -> list[PoolEntry]:
        """Remove and return the ``k`` best entries in descending estimate order."""
        ranked = sorted(self.entries.values(), key=rank_key)[:k]
        for e in ranked:
            del self.entries[e.tx.tx_id]
        return ranked


def admit_to_pool(pool: RelayPool, tx: TxMsg, estimate: float, relay_cost: float,
                  sender: int | None = None) -> bool:
    """Keep a profitable tx, replacing a pooled copy of the same tx only if better."""
    if estimate < relay_cost:
        return False
    current = pool.entries.get(tx.tx_id)
    if current is not None and current.estimate >= estimate:
        return False
    pool.entries[tx.tx_id] = PoolEntry(tx, estimate, sender)
    return True


def flush_top_n(pool: RelayPool) -> list[TxMsg]:
    """Forward the top ``window`` entries once the pool exceeds its window."""
    if len(pool) <= pool.window:
        return []
    return [e.tx for e in pool.take_top(pool.window)]


def choose_targets(neighbors, n_f: int, rng: random.Random, exclude: int | None = None) -> list[int]:
    candidates = sorted(v for v in neighbors if v != exclude)
    if len(candidates) <= n_f:
        return candidates
    return rng.sample(candidates, n_f)


def forward(tx: TxMsg, node: int, n_f: int, neighbors, rng: random.Random,
            sender: int | None = None) -> list[tuple[int, TxMsg]]:
    signed = append_relay(tx, node)
    return [(v, signed) for v in choose_targets(neighbors, n_f, rng, sender)]


@dataclass
class PendingOutcome:
    tx_id: int
    source: int
    action: Action
    relay_cost: float
    deadline: float


def resolve_outcomes(pending: dict[int, PendingOutcome], settlement: Settlement, node: int,
                     mu: float) -> list[tuple[int, Action, float]]:
    """Cost events for pending relays whose tx was settled in this block.

    A relay that was paid costs ``(c_f - paid) / mu``; one whose tx confirmed
    through another path earned nothing and costs ``c_f / mu``.
    """
    events = []
    for t in settlement.txs:
        p = pending.pop(t.tx_id, None)
        if p is None:
            continue
        if p.action is not Action.RELAY:
            events.append((p.source, p.action, 0.0))
            continue
        paid = sum(a for payee, a in t.relay_payments if payee == node)
        events.append((p.source, p.action, _clip((p.relay_cost - paid) / mu)))
    return events


def expire_outcomes(pending: dict[int, PendingOutcome], now: float,
                    mu: float) -> list[tuple[int, Action, float]]:
    """Failure costs for relays still unconfirmed at their deadline."""
    events = []
    for tx_id in [k for k, p in pending.items() if p.deadline <= now]:
        p = pending.pop(tx_id)
        cost = _clip(p.relay_cost / mu) if p.action is Action.RELAY else 0.0
        events.append((p.source, p.action, cost))
    return events


def _clip(c: float) -> float:
    return max(-1.0, min(1.0, c))
