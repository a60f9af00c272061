"""Deterministic discrete-event simulation of a wireless blockchain network.

A run is single-threaded over a heap of ``(time, seq, kind, ...)`` events.
All randomness comes from named sub-streams of the run seed (see ``rng``),
so equal configs give identical event traces.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field

from . import topology
from .adversary import alias_identities, sybil_inflate
from .allocation import (AllocationParams, Settlement, estimate_relay_reward,
                         estimate_validation_reward, settle_block, settle_block_first_price)
from .config import Mechanism, SimConfig
from .protocol import Bid, BlockMsg, ChainState, TxMsg, append_relay, sync_check, verify_relay_list
from .relay import (Action, ActionWeights, LearnerRound, PendingOutcome, RelayPool, admit_to_pool,
                    choose_targets, decide_receive, no_regret_update, resolve_outcomes)
from .rng import substream, truncated_gauss
from .validation import (MinerPool, MiningProcess, admit_to_miner_pool, build_block, schedule_mining,
                         vcg_select)

# event kinds
TX_GENERATE, DELIVER_TX, DELIVER_BLOCK, MINE_COMPLETE, SYNC_TICK = range(5)
FAULT_START, FAULT_END, OUTCOME_DEADLINE, RELAY_ROUND = range(5, 9)


@dataclass
class LinkModel:
    delay: float = 0.01
    jitter: float = 0.0
    tx_cost: float = 1.0
    block_cost: float = 40.0

    def sample_delay(self, rng: random.Random) -> float:
        return self.delay + (rng.random() * self.jitter if self.jitter else 0.0)


@dataclass
class FaultModel:
    """Disruption schedule: affected nodes and their silent windows."""

    affected: list[int] = field(default_factory=list)
    windows: dict[int, list[tuple[float, float]]] = field(default_factory=dict)

    @classmethod
    def build(cls, cfg: SimConfig, roles: dict[int, topology.NodeRole]) -> "FaultModel":
        eligible = [u for u in sorted(roles)
                    if cfg.fault_role == "any"
                    or (cfg.fault_role == "full") == roles[u].is_full]
        # one fixed permutation per seed, so larger fractions extend smaller ones
        order = substream(cfg.seed, "fault-order", cfg.fault_role)
        order.shuffle(eligible)
        count = round(cfg.fault_fraction * len(eligible))
        affected = sorted(eligible[:count])
        windows = {}
        for u in affected:
            rng = substream(cfg.seed, "fault-times", u)
            t, spans = 0.0, []
            while True:
                t += truncated_gauss(rng, cfg.fault_interval_mean, cfg.fault_interval_std, 1e-3)
                if t >= cfg.duration:
                    break
                d = truncated_gauss(rng, cfg.fault_duration_mean, cfg.fault_duration_std, 1e-3)
                spans.append((t, t + d))
                t += d
            windows[u] = spans
        return cls(affected, windows)


class NodeState:
    __slots__ = ("idx", "role", "full", "neighbors", "relay_cost", "validation_cost", "chain",
                 "known_blocks", "seen", "relayed", "pool", "mpool", "weights", "pending", "rng",
                 "settled_height", "faulty", "round_scheduled")

    def __init__(self, idx: int, role: topology.NodeRole, neighbors: list[int], cfg: SimConfig):
        self.idx = idx
        self.role = role
        self.full = role.is_full
        self.neighbors = neighbors
        self.relay_cost = role.relay_cost
        self.validation_cost = role.validation_cost
        self.chain = ChainState()
        self.known_blocks: set[int] = {0}
        self.seen: set[int] = set()
        self.relayed: set[int] = set()
        self.pool = RelayPool(cfg.relay_window)
        self.mpool = MinerPool(cfg.block_capacity)
        self.weights = ActionWeights()
        self.pending: dict[int, PendingOutcome] = {}
        self.rng = substream(cfg.seed, "node", idx)
        self.settled_height = 0
        self.faulty = False
        self.round_scheduled = False


@dataclass
class RunResult:
    """Raw outcome of one run; metrics are derived from it in ``metrics``."""

    config: SimConfig
    edges: list[tuple[int, int]]
    roles: dict[int, topology.NodeRole]
    chain: ChainState
    produced: dict[int, tuple[int, float, float, float]]
    settlements: list[Settlement]
    relay_costs: dict[int, float]
    relay_actions: dict[int, int]
    blocks_proposed: dict[int, int]
    tx_transmissions: int
    block_transmissions: int
    bandwidth: float
    learner_history: dict[int, list[LearnerRound]]
    block_log: list[tuple[float, int, int, int, float]]
    payee_of: dict[int, int]
    sybil_attacker: int
    faults: FaultModel
    events_processed: int = 0


def generate_tx(tx_id: int, producer: int, now: float, cfg: SimConfig, rng: random.Random) -> TxMsg:
    """New transaction with value ~ N(value_mean, value_std) and an honest (or shaded) fee."""
    value = min(cfg.value_cap, truncated_gauss(rng, cfg.value_mean, cfg.value_std, 1e-3))
    fee = (1.0 - cfg.bid_shade) * value
    return TxMsg.create(tx_id, producer, value, Bid(fee, cfg.confirm_delay, now, cfg.max_path))


def build_network(cfg: SimConfig) -> tuple[topology.Graph, dict[int, topology.NodeRole]]:
    if cfg.topology.upper() == "FILE":
        g = topology.Graph.load(cfg.edge_list_file, cfg.n_nodes)
        if not g.is_connected():
            topology.repair_connectivity(g, substream(cfg.seed, "topology-repair"))
    else:
        g = topology.generate(cfg.topology, cfg.n_nodes, topology_seed(cfg), er_p=cfg.er_p,
                              ba_m=cfg.ba_m, ws_k=cfg.ws_k, ws_beta=cfg.ws_beta)
    costs = topology.CostParams(cfg.relay_cost_mean, cfg.relay_cost_std,
                                cfg.validation_cost_mean, cfg.validation_cost_std)
    roles = topology.assign_roles(g, cfg.full_fraction, costs, substream(cfg.seed, "roles").getrandbits(63),
                                  cfg.hash_overrides)
    return g, roles


def topology_seed(cfg: SimConfig) -> int:
    return substream(cfg.seed, "topology").getrandbits(63)


class Simulation:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg.validate()
        self.params = AllocationParams(cfg.alpha, cfg.max_path)
        self.mechanism = cfg.mechanism
        self.graph, self.roles = build_network(cfg)
        self.nodes = [NodeState(u, self.roles[u], sorted(self.graph.adjacency[u]), cfg)
                      for u in range(cfg.n_nodes)]
        self.light_nodes = [u for u in range(cfg.n_nodes) if not self.roles[u].is_full]
        self.miners = [MiningProcess(u, self.roles[u].hash_power)
                       for u in range(cfg.n_nodes) if self.roles[u].is_full]
        self.link = LinkModel(cfg.link_delay, cfg.link_jitter, cfg.tx_bandwidth, cfg.block_bandwidth)
        self.faults = FaultModel.build(cfg, self.roles)
        self.mu = cfg.cost_bound

        self.sybil_attacker = self._pick_attacker()
        self.sybil_aliases = alias_identities(self.sybil_attacker, cfg.sybil_identities,
                                              cfg.n_nodes, cfg.sybil_cap)
        self.payee_of = {a: self.sybil_attacker for a in self.sybil_aliases}

        self.txgen_rng = substream(cfg.seed, "tx-generation")
        self.value_rng = substream(cfg.seed, "tx-values")
        self.delay_rng = substream(cfg.seed, "link-delays")
        self.mine_rng = substream(cfg.seed, "mining")

        self.queue: list[tuple] = []
        self.seq = itertools.count()
        self.now = 0.0
        self.global_chain = ChainState()
        self.next_tx_id = 1
        self.next_block_id = 1
        self.produced: dict[int, tuple[int, float, float, float]] = {}
        self.relay_costs = {u: 0.0 for u in range(cfg.n_nodes)}
        self.relay_actions = {u: 0 for u in range(cfg.n_nodes)}
        self.blocks_proposed = {m.miner: 0 for m in self.miners}
        self.tx_transmissions = 0
        self.block_transmissions = 0
        self.block_log: list[tuple[float, int, int, int, float]] = []
        self._settlements: dict[int, Settlement] = {}
        self.events_processed = 0

    def _pick_attacker(self) -> int:
        if self.cfg.sybil_node >= 0:
            return self.cfg.sybil_node
        return max(self.light_nodes, key=lambda u: (self.graph.degree(u), -u))

    # ------------------------------------------------------------------ queue
    def push(self, time: float, kind: int, a=None, b=None, c=None) -> None:
        heapq.heappush(self.queue, (time, next(self.seq), kind, a, b, c))

    def run(self) -> RunResult:
        cfg = self.cfg
        self.push(0.0 if cfg.tx_schedule == "fixed" else self.txgen_rng.expovariate(cfg.tx_rate),
                  TX_GENERATE)
        miner, t = schedule_mining(self.miners, cfg.block_interval, self.mine_rng, 0.0)
        self.push(t, MINE_COMPLETE, miner)
        for st in self.nodes:
            self.push(st.rng.uniform(0.0, cfg.sync_interval), SYNC_TICK, st.idx)
        for u, spans in self.faults.windows.items():
            for start, end in spans:
                self.push(start, FAULT_START, u)
                self.push(end, FAULT_END, u)

        handlers = {
            TX_GENERATE: self._on_tx_generate,
            DELIVER_TX: self._on_deliver_tx,
            DELIVER_BLOCK: self._on_deliver_block,
            MINE_COMPLETE: self._on_mine_complete,
            SYNC_TICK: self._on_sync_tick,
            FAULT_START: self._on_fault_start,
            FAULT_END: self._on_fault_end,
            OUTCOME_DEADLINE: self._on_outcome_deadline,
            RELAY_ROUND: self._on_relay_round,
        }
        queue, end = self.queue, cfg.duration
        while queue:
            time, _, kind, a, b, c = heapq.heappop(queue)
            if time >= end:
                break
            self.now = time
            self.events_processed += 1
            handlers[kind](a, b, c)
        return self._result()

    # -------------------------------------------------------------- transport
    def dispatch_tx(self, tx: TxMsg, src: int, dst: int) -> None:
        self.tx_transmissions += 1
        self.push(self.now + self.link.sample_delay(self.delay_rng), DELIVER_TX, dst, tx, src)

    def dispatch_block(self, block: BlockMsg, src: int, dst: int) -> None:
        self.block_transmissions += 1
        self.push(self.now + self.link.sample_delay(self.delay_rng), DELIVER_BLOCK, dst, block, src)

    # ----------------------------------------------------------- transactions
    def _on_tx_generate(self, *_):
        cfg = self.cfg
        producer = self.light_nodes[self.txgen_rng.randrange(len(self.light_nodes))]
        tx = generate_tx(self.next_tx_id, producer, self.now, cfg, self.value_rng)
        self.next_tx_id += 1
        st = self.nodes[producer]
        if not st.faulty:
            self.produced[tx.tx_id] = (producer, tx.value, tx.bid.fee, self.now)
            st.seen.add(tx.tx_id)
            for v in choose_targets(st.neighbors, cfg.fanout, st.rng):
                self.dispatch_tx(tx, producer, v)
        gap = 1.0 / cfg.tx_rate if cfg.tx_schedule == "fixed" else self.txgen_rng.expovariate(cfg.tx_rate)
        self.push(self.now + gap, TX_GENERATE)

    def _on_deliver_tx(self, node: int, tx: TxMsg, sender: int) -> None:
        st = self.nodes[node]
        if st.faulty:
            return
        mech = self.mechanism
        if st.full:
            self._admit_for_mining(st, tx)
        if mech is not Mechanism.DUAL:
            if tx.tx_id not in st.seen:
                st.seen.add(tx.tx_id)
                if mech is Mechanism.CLASSICAL and tx.bid.ttl >= 1:
                    self._relay(st, tx, sender)
            return
        st.seen.add(tx.tx_id)
        if tx.tx_id in st.relayed:
            return
        if tx.tx_id in st.pool.entries:
            admit_to_pool(st.pool, tx, estimate_relay_reward(tx, self.now, self.params),
                          st.relay_cost, sender)
            return
        # every fresh copy gets its own relay decision until the node relays the tx once
        if decide_receive(tx, st.weights, st.rng.random()) is Action.RELAY:
            est = estimate_relay_reward(tx, self.now, self.params)
            if admit_to_pool(st.pool, tx, est, st.relay_cost, sender):
                if len(st.pool) > st.pool.window:
                    for e in st.pool.take_top(st.pool.window):
                        self._relay(st, e.tx, e.sender)
                if len(st.pool) and not st.round_scheduled:
                    st.round_scheduled = True
                    self.push(self.now + self.cfg.relay_round, RELAY_ROUND, node)
                return
        no_regret_update(st.weights, tx.producer, Action.DROP, 0.0, self.cfg.gamma)

    def _admit_for_mining(self, st: NodeState, tx: TxMsg) -> None:
        if self.mechanism is Mechanism.DUAL:
            if verify_relay_list(tx):
                admit_to_miner_pool(st.mpool, tx, self.now, st.validation_cost, self.params,
                                    st.chain.confirmed)
        else:
            admit_to_miner_pool(st.mpool, tx, self.now, 0.0, self.params, st.chain.confirmed,
                                estimate=_fee_estimate)

    def _on_relay_round(self, node: int, *_):
        st = self.nodes[node]
        st.round_scheduled = False
        if not st.faulty:
            for e in st.pool.take_top(st.pool.window):
                self._relay(st, e.tx, e.sender)
        if len(st.pool):
            st.round_scheduled = True
            self.push(self.now + self.cfg.relay_round, RELAY_ROUND, node)

    def _relay(self, st: NodeState, tx: TxMsg, sender: int | None) -> None:
        targets = choose_targets(st.neighbors, self.cfg.fanout, st.rng, sender)
        if not targets:
            return
        if st.idx == self.sybil_attacker and self.sybil_aliases:
            signed = sybil_inflate(tx, len(self.sybil_aliases), st.idx, self.sybil_aliases)
        else:
            signed = append_relay(tx, st.idx)
        st.relayed.add(tx.tx_id)
        for v in targets:
            self.dispatch_tx(signed, st.idx, v)
        self.relay_costs[st.idx] += st.relay_cost
        self.relay_actions[st.idx] += 1
        if self.mechanism is Mechanism.DUAL:
            deadline = tx.bid.timestamp + self.cfg.outcome_deadline_factor * tx.bid.confirm_delay
            st.pending[tx.tx_id] = PendingOutcome(tx.tx_id, tx.producer, Action.RELAY,
                                                  st.relay_cost, deadline)
            self.push(max(deadline, self.now), OUTCOME_DEADLINE, st.idx, tx.tx_id)

    def _on_outcome_deadline(self, node: int, tx_id: int, _):
        st = self.nodes[node]
        p = st.pending.pop(tx_id, None)
        if p is not None:
            cost = min(1.0, p.relay_cost / self.mu)
            no_regret_update(st.weights, p.source, p.action, cost, self.cfg.gamma)

    # ----------------------------------------------------------------- blocks
    def _on_mine_complete(self, miner: int, *_):
        st = self.nodes[miner]
        cfg = self.cfg
        if not st.faulty:
            confirmed = st.chain.confirmed
            winners, price = vcg_select(st.mpool, cfg.block_capacity, confirmed)
            parent = st.chain.blocks[st.chain.tip]
            block = build_block(parent, winners, price, miner, self.now, self.next_block_id,
                                cfg.block_capacity, confirmed)
            self.next_block_id += 1
            self.blocks_proposed[miner] += 1
            self.block_log.append((self.now, miner, block.height, len(block.tx_list), block.payment))
            self.global_chain.insert(block)
            st.known_blocks.add(block.block_id)
            if st.chain.insert(block):
                self._on_tip_change(st)
            self._spread_block(st, block, None)
        nxt, t = schedule_mining(self.miners, cfg.block_interval, self.mine_rng, self.now)
        self.push(t, MINE_COMPLETE, nxt)

    def _on_deliver_block(self, node: int, block: BlockMsg, sender: int) -> None:
        st = self.nodes[node]
        if st.faulty or block.block_id in st.known_blocks:
            return
        st.known_blocks.add(block.block_id)
        if st.chain.insert(block):
            self._on_tip_change(st)
        self._spread_block(st, block, sender)

    def _spread_block(self, st: NodeState, block: BlockMsg, sender: int | None) -> None:
        # blocks flood to every neighbour in all mechanisms; only tx relay differs
        for v in st.neighbors:
            if v == sender:
                continue
            self.dispatch_block(block, st.idx, v)

    def _on_tip_change(self, st: NodeState) -> None:
        chain = st.chain
        if st.full and chain.last_abandoned:
            for old in chain.last_abandoned:
                for tx in old.tx_list:
                    if tx.tx_id not in chain.confirmed:
                        self._admit_for_mining(st, tx)
        threshold = chain.height - self.cfg.n_c + 1
        if threshold <= st.settled_height:
            return
        if st.pending:
            for h in range(st.settled_height + 1, threshold + 1):
                s = self.settlement(chain.blocks[chain.main[h]])
                for source, action, cost in resolve_outcomes(st.pending, s, st.idx, self.mu):
                    no_regret_update(st.weights, source, action, cost, self.cfg.gamma)
                if not st.pending:
                    break
        st.settled_height = threshold

    def settlement(self, block: BlockMsg) -> Settlement:
        s = self._settlements.get(block.block_id)
        if s is None:
            if self.mechanism is Mechanism.DUAL:
                s = settle_block(block, self.params, self.payee_of)
            else:
                s = settle_block_first_price(block)
            self._settlements[block.block_id] = s
        return s

    # ------------------------------------------------------ sync and faults
    def _on_sync_tick(self, node: int, *_):
        st = self.nodes[node]
        if not st.faulty:
            live = [self.nodes[v] for v in st.neighbors if not self.nodes[v].faulty]
            if live:
                best = max(live, key=lambda p: (p.chain.height, -p.idx))
                if sync_check(st.chain.height, best.chain.height, self.cfg.n_c):
                    self._transfer_chain(best, st)
        self.push(self.now + self.cfg.sync_interval, SYNC_TICK, node)

    def _transfer_chain(self, src: NodeState, dst: NodeState) -> None:
        for bid in src.chain.main[1:]:
            if bid in dst.known_blocks:
                continue
            self.block_transmissions += 1
            dst.known_blocks.add(bid)
            if dst.chain.insert(src.chain.blocks[bid]):
                self._on_tip_change(dst)

    def _on_fault_start(self, node: int, *_):
        self.nodes[node].faulty = True

    def _on_fault_end(self, node: int, *_):
        self.nodes[node].faulty = False

    # ----------------------------------------------------------------- result
    def _result(self) -> RunResult:
        chain = self.global_chain
        settled = [b for b in chain.main_blocks()[1:] if chain.depth(b) >= self.cfg.n_c]
        return RunResult(
            config=self.cfg,
            edges=self.graph.edges(),
            roles=self.roles,
            chain=chain,
            produced=self.produced,
            settlements=[self.settlement(b) for b in settled],
            relay_costs=self.relay_costs,
            relay_actions=self.relay_actions,
            blocks_proposed=self.blocks_proposed,
            tx_transmissions=self.tx_transmissions,
            block_transmissions=self.block_transmissions,
            bandwidth=(self.tx_transmissions * self.link.tx_cost
                       + self.block_transmissions * self.link.block_cost),
            learner_history={st.idx: st.weights.history for st in self.nodes},
            block_log=self.block_log,
            payee_of=self.payee_of,
            sybil_attacker=self.sybil_attacker,
            faults=self.faults,
            events_processed=self.events_processed,
        )


def _fee_estimate(tx: TxMsg, now: float) -> float:
    return tx.bid.fee


def run(cfg: SimConfig) -> RunResult:
    return Simulation(cfg).run()
