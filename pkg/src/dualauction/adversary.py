"""Adversary models: Sybil relay-list inflation and the double-spend mining race."""

from __future__ import annotations

import random
from collections.abc import Sequence

from .errors import RelayExhaustedError
from .protocol import TxMsg, append_relay


def alias_identities(attacker: int, u: int, n_nodes: int, cap: int) -> list[int]:
    """Fake relay identities for ``attacker``, disjoint from real node indices."""
    base = n_nodes + attacker * cap
    return [base + k for k in range(u)]


def sybil_inflate(tx: TxMsg, u: int, attacker: int, aliases: Sequence[int] | None = None) -> TxMsg:
    """Sign the attacker's identity followed by up to ``u`` aliases onto ``tx``.

    Only as many aliases as the remaining TTL allows are appended; ``u == 0``
    is an honest relay.
    """
    if tx.bid.ttl < 1:
        raise RelayExhaustedError(f"tx {tx.tx_id} has no relay hops left")
    if aliases is None:
        aliases = [-(attacker + 1) * 1000 - k for k in range(1, u + 1)]
    out = append_relay(tx, attacker)
    for alias in list(aliases)[:u]:
        if out.bid.ttl < 1:
            break
        out = append_relay(out, alias)
    return out


def double_spend_trial(honest_power: float, attacker_power: float, n_c: int = 6,
                       rng: random.Random | int = 0, give_up_lead: int | None = None,
                       max_blocks: int = 10_000) -> bool:
    """One private-fork race between an attacker and the honest network.

    Both chains grow by competing exponential clocks from a common tip. The
    victim accepts the payment once the public branch holds ``n_c`` blocks;
    the attack succeeds if the private branch is strictly longer than the
    public one at any point after that. The attacker abandons the race when
    the public branch leads by ``give_up_lead`` blocks (default ``4 * n_c``)
    or after ``max_blocks`` blocks in total.
    """
    if abs(honest_power + attacker_power - 1.0) > 1e-9:
        raise ValueError("honest and attacker hash power must sum to 1")
    if honest_power <= 0.0:
        return True
    if attacker_power <= 0.0:
        return False
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    give_up = 4 * n_c if give_up_lead is None else give_up_lead
    public = private = 0
    for _ in range(max_blocks):
        if rng.expovariate(attacker_power) < rng.expovariate(honest_power):
            private += 1
        else:
            public += 1
        if public >= n_c and private > public:
            return True
        if public - private >= give_up:
            return False
    return False


def double_spend_rate(attacker_power: float, trials: int, seed: int, n_c: int = 6,
                      give_up_lead: int | None = None) -> float:
    rng = random.Random(seed)
    wins = sum(double_spend_trial(1.0 - attacker_power, attacker_power, n_c, rng, give_up_lead)
               for _ in range(trials))
    return wins / trials
