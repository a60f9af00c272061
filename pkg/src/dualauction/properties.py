"""Property suites checked by ``dualauction verify`` and the acceptance tests.

Each suite returns a ``SuiteResult`` listing violations; an empty list is a
pass. Oracles here are brute force and share no code with the selection
routines they check.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass, field

from .allocation import allocation_share
from .metrics import learner_regret
from .protocol import Bid, TxMsg
from .relay import ActionWeights, PoolEntry, RelayPool, flush_top_n, hedge_update
from .validation import MinerPool, vcg_select

REL_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    violations: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def fail(self, msg: str) -> None:
        if len(self.violations) < 20:
            self.violations.append(msg)
        else:
            self.violations[-1] = "... more violations truncated"


def _leq(a: float, b: float) -> bool:
    return a <= b + REL_TOL * max(1.0, abs(a), abs(b))


def _eq(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


def alpha_grid() -> list[float]:
    return [round(0.05 * k, 2) for k in range(21)]


def allocation_suite(fee: float = 1.0) -> SuiteResult:
    """Budget, the one-step Sybil condition, both Sybil equations and the u-step condition."""
    res = SuiteResult("allocation")
    t0 = time.perf_counter()
    for a in alpha_grid():
        beta = 1.0 / (1.0 + a)
        for r in range(1, 13):
            shares = [allocation_share(r, g, a, fee) for g in range(1, r + 1)]
            res.checks += 1
            if not _leq(math.fsum(shares), fee):
                res.fail(f"budget: alpha={a} r={r} sum={math.fsum(shares)}")
            for g in range(1, r + 1):
                res.checks += 1
                lhs = allocation_share(r, g, a, fee)
                rhs = allocation_share(r + 1, g, a, fee) + allocation_share(r + 1, g + 1, a, fee)
                if not _leq(rhs, lhs):
                    res.fail(f"one-step: alpha={a} r={r} g={g} {lhs} < {rhs}")
                for u in range(1, 6):
                    res.checks += 1
                    split = math.fsum(allocation_share(r + u, g + k, a, fee) for k in range(u + 1))
                    if not _leq(split, lhs):
                        res.fail(f"u-step: alpha={a} r={r} g={g} u={u} {lhs} < {split}")
            # full node appends one fake identity
            res.checks += 1
            honest = beta ** (r - 1) * fee
            attacked = beta**r * fee + beta**r * a**r * fee
            if not _leq(attacked, honest):
                res.fail(f"full-node sybil: alpha={a} r={r}")
            # light node at position g < r appends one fake identity
            for g in range(1, r):
                res.checks += 1
                honest = beta ** (r - 1) * a**g * fee
                attacked = beta**r * a**g * fee + beta**r * a ** (g + 1) * fee
                if not _eq(honest, attacked):
                    res.fail(f"light-node sybil: alpha={a} r={r} g={g} {honest} != {attacked}")
    res.seconds = time.perf_counter() - t0
    return res


# --------------------------------------------------------------- VCG oracles
def _tx(tx_id: int, fee: float, ts: float) -> TxMsg:
    return TxMsg.create(tx_id, 0, fee, Bid(fee, 10.0, ts, 6))


def _entries(bids: list[float], times: list[float]) -> list[PoolEntry]:
    return [PoolEntry(_tx(i + 1, b, t), b) for i, (b, t) in enumerate(zip(bids, times))]


def vcg_outcome(bids: list[float], m: int, times: list[float] | None = None) -> tuple[set[int], float]:
    """Winner ids and uniform price using the production selector."""
    times = times or [0.0] * len(bids)
    pool = MinerPool(m)
    for e in _entries(bids, times):
        pool.entries[e.tx.tx_id] = e
    winners, price = vcg_select(pool)
    return {tx.tx_id for tx in winners}, price


def brute_vcg(bids: list[float], m: int) -> tuple[float, list[float]]:
    """Optimal welfare over all feasible sets and each winner's externality payment.

    Returns the optimal total and the sorted list of VCG payments charged
    to one optimal winner set.
    """
    n = len(bids)
    k = min(m, n)
    best, best_set = -math.inf, ()
    for s in itertools.combinations(range(n), k):
        v = math.fsum(bids[i] for i in s)
        if v > best:
            best, best_set = v, s
    payments = []
    for i in best_set:
        others = [j for j in range(n) if j != i]
        without_i = max((math.fsum(bids[j] for j in s) for s in itertools.combinations(others, min(m, n - 1))),
                        default=0.0)
        with_i = math.fsum(bids[j] for j in best_set if j != i)
        payments.append(without_i - with_i)
    return best, sorted(payments)


def vcg_oracle_suite(instances: int = 10_000, seed: int = 12) -> SuiteResult:
    res = SuiteResult("vcg-oracle")
    t0 = time.perf_counter()
    rng = random.Random(seed)
    for _ in range(instances):
        n = rng.randint(0, 8)
        m = rng.randint(1, 5)
        # coarse grid makes ties common
        bids = [rng.choice([rng.uniform(0, 100), float(rng.randint(0, 6))]) for _ in range(n)]
        times = [float(rng.randint(0, 3)) for _ in range(n)]
        winners, price = vcg_outcome(bids, m, times)
        best, payments = brute_vcg(bids, m)
        res.checks += 1
        got = math.fsum(bids[i - 1] for i in winners)
        if len(winners) != min(m, n) or not _eq(got, best):
            res.fail(f"winners: bids={bids} m={m} got {sorted(winners)}")
            continue
        if any(not _eq(p, price) for p in payments):
            res.fail(f"price: bids={bids} m={m} price={price} vcg={payments}")
        # tie-break: among equal bids, earlier timestamp then lower id wins
        losers = set(range(1, n + 1)) - winners
        for w in winners:
            for lo in losers:
                kw = (-bids[w - 1], times[w - 1], w)
                kl = (-bids[lo - 1], times[lo - 1], lo)
                if kw > kl:
                    res.fail(f"tie-break: bids={bids} times={times} winner {w} ranks below {lo}")
    res.seconds = time.perf_counter() - t0
    return res


def flush_oracle_suite(instances: int = 10_000, seed: int = 13) -> SuiteResult:
    res = SuiteResult("flush-oracle")
    t0 = time.perf_counter()
    rng = random.Random(seed)
    for _ in range(instances):
        n = rng.randint(0, 16)
        window = rng.randint(1, 10)
        bids = [float(rng.randint(0, 8)) if rng.random() < 0.5 else rng.uniform(0, 20) for _ in range(n)]
        times = [float(rng.randint(0, 4)) for _ in range(n)]
        entries = _entries(bids, times)
        pool = RelayPool(window, {e.tx.tx_id: e for e in entries})
        got = [tx.tx_id for tx in flush_top_n(pool)]
        res.checks += 1
        if n <= window:
            expected: list[int] = []
        else:
            # an entry is flushed iff fewer than `window` entries beat it
            def beats(a: PoolEntry, b: PoolEntry) -> bool:
                if a.estimate != b.estimate:
                    return a.estimate > b.estimate
                if a.tx.bid.timestamp != b.tx.bid.timestamp:
                    return a.tx.bid.timestamp < b.tx.bid.timestamp
                return a.tx.tx_id < b.tx.tx_id

            rank = {e.tx.tx_id: sum(beats(o, e) for o in entries) for e in entries}
            expected = sorted((i for i, r in rank.items() if r < window), key=rank.get)
        if got != expected:
            res.fail(f"flush: bids={bids} times={times} N={window} got {got} want {expected}")
        elif n > window and len(pool) != n - window:
            res.fail(f"flush left {len(pool)} entries, want {n - window}")
    res.seconds = time.perf_counter() - t0
    return res


def dsic_suite(instances: int = 1000, deviations: int = 10, seed: int = 11) -> SuiteResult:
    """Truthful bidding beats every sampled deviation in the validation auction."""
    res = SuiteResult("dsic")
    t0 = time.perf_counter()
    rng = random.Random(seed)
    for _ in range(instances):
        n = rng.randint(1, 10)
        m = rng.randint(1, 6)
        values = [rng.uniform(0, 100) for _ in range(n)]
        times = [float(rng.randint(0, 3)) for _ in range(n)]
        for i in range(n):
            truthful = _utility(values, i, values[i], m, times)
            for _ in range(deviations):
                dev = rng.choice([rng.uniform(0, 120), values[i] * rng.uniform(0.0, 2.0),
                                  rng.choice(values)])
                res.checks += 1
                if truthful < _utility(values, i, dev, m, times):
                    res.fail(f"dsic: values={values} m={m} bidder={i} dev={dev}")
    res.seconds = time.perf_counter() - t0
    return res


def _utility(values: list[float], i: int, bid: float, m: int, times: list[float]) -> float:
    bids = list(values)
    bids[i] = bid
    winners, price = vcg_outcome(bids, m, times)
    return values[i] - price if (i + 1) in winners else 0.0


# ------------------------------------------------------------------ regret
def cost_sequence(family: str, k: int, rng: random.Random) -> list[tuple[float, float]]:
    """(relay, drop) cost pairs in [-1, 1] for one of three families."""
    if family == "constant":
        c = (rng.uniform(-1, 1), rng.uniform(-1, 1))
        return [c] * k
    if family == "iid":
        return [(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(k)]
    if family == "alternating":
        # punishes whichever action the learner currently favours
        return [(1.0, -1.0) if t % 2 == 0 else (-1.0, 1.0) for t in range(k)]
    raise ValueError(f"unknown cost family {family!r}")


def regret_suite(seed: int = 5, repeats: int = 3) -> SuiteResult:
    res = SuiteResult("regret")
    t0 = time.perf_counter()
    rng = random.Random(seed)
    for k in (50, 500, 5000):
        for family in ("constant", "iid", "alternating"):
            for gamma in (0.001, 0.01, 0.1):
                for _ in range(repeats if family != "alternating" else 1):
                    weights = ActionWeights()
                    for cr, cd in cost_sequence(family, k, rng):
                        hedge_update(weights, 0, cr, cd, gamma)
                    g = learner_regret(weights.history, gamma)
                    res.checks += 1
                    if g.gap > g.bound:
                        res.fail(f"regret: K={k} {family} gamma={gamma} gap={g.gap} bound={g.bound}")
    res.seconds = time.perf_counter() - t0
    return res


SUITES = {
    "allocation": allocation_suite,
    "dsic": dsic_suite,
    "regret": regret_suite,
    "vcg-oracle": vcg_oracle_suite,
    "flush-oracle": flush_oracle_suite,
}


def run_all() -> list[SuiteResult]:
    return [fn() for fn in SUITES.values()]
