"""Seeded complex-network generators (ER, BA, WS) and node role assignment."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .rng import truncated_gauss


@dataclass
class Graph:
    """Undirected simple graph over nodes ``0..node_count-1``."""

    node_count: int
    adjacency: list[set[int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.adjacency:
            self.adjacency = [set() for _ in range(self.node_count)]

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError(f"self-loop on node {u}")
        self.adjacency[u].add(v)
        self.adjacency[v].add(u)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in range(self.node_count) for v in self.adjacency[u] if u < v)

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, ordered by smallest member."""
        seen = [False] * self.node_count
        comps = []
        for start in range(self.node_count):
            if seen[start]:
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def to_edge_list(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self.edges())

    @classmethod
    def from_edge_list(cls, text: str, node_count: int | None = None) -> "Graph":
        pairs = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                u, v = line.split()
                pairs.append((int(u), int(v)))
        n = node_count if node_count is not None else 1 + max((max(p) for p in pairs), default=-1)
        g = cls(n)
        for u, v in pairs:
            g.add_edge(u, v)
        return g

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_edge_list())

    @classmethod
    def load(cls, path: str | Path, node_count: int | None = None) -> "Graph":
        return cls.from_edge_list(Path(path).read_text(), node_count)


def repair_connectivity(g: Graph, rng: random.Random) -> Graph:
    """Join every non-giant component to the giant one with a single random edge."""
    comps = g.components()
    if len(comps) <= 1:
        return g
    giant = max(comps, key=len)  # first-largest wins ties
    for comp in comps:
        if comp is giant:
            continue
        g.add_edge(rng.choice(comp), rng.choice(giant))
    return g


def generate_er(n: int, p_edge: float, seed: int) -> Graph:
    if n < 2:
        raise ConfigError(f"ER graph needs n >= 2, got {n}")
    if not 0.0 <= p_edge <= 1.0:
        raise ConfigError(f"p_edge must lie in [0, 1], got {p_edge}")
    rng = random.Random(seed)
    g = Graph(n)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p_edge:
                g.add_edge(u, v)
    return repair_connectivity(g, rng)


def generate_ba(n: int, m_attach: int, seed: int) -> Graph:
    """Preferential attachment grown from a complete graph on ``m_attach + 1`` nodes."""
    # at least one node must attach beyond the complete core
    if m_attach < 1 or n <= m_attach + 1:
        raise ConfigError(f"BA graph needs n > m_attach + 1 and m_attach >= 1, got n={n}, m_attach={m_attach}")
    rng = random.Random(seed)
    g = Graph(n)
    core = m_attach + 1
    # each endpoint appears once per incident edge, so uniform picks are degree-weighted
    endpoints: list[int] = []
    for u in range(core):
        for v in range(u + 1, core):
            g.add_edge(u, v)
            endpoints += [u, v]
    for new in range(core, n):
        targets: set[int] = set()
        while len(targets) < m_attach:
            targets.add(rng.choice(endpoints))
        for t in sorted(targets):
            g.add_edge(new, t)
            endpoints += [new, t]
    return g


def generate_ws(n: int, k_ring: int, beta: float, seed: int) -> Graph:
    if k_ring % 2:
        raise ConfigError(f"WS ring degree must be even, got {k_ring}")
    if n <= k_ring or k_ring < 0:
        raise ConfigError(f"WS graph needs n > k_ring >= 0, got n={n}, k_ring={k_ring}")
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must lie in [0, 1], got {beta}")
    rng = random.Random(seed)
    g = Graph(n)
    half = k_ring // 2
    for j in range(1, half + 1):
        for u in range(n):
            g.add_edge(u, (u + j) % n)
    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= beta or not g.has_edge(u, v):
                continue
            if g.degree(u) >= n - 1:
                continue
            w = rng.randrange(n)
            while w == u or g.has_edge(u, w):
                w = rng.randrange(n)
            g.adjacency[u].discard(v)
            g.adjacency[v].discard(u)
            g.add_edge(u, w)
    return repair_connectivity(g, rng)


def generate(kind: str, n: int, seed: int, *, er_p: float = 0.1, ba_m: int = 2,
             ws_k: int = 4, ws_beta: float = 0.3) -> Graph:
    kind = kind.upper()
    if kind == "ER":
        return generate_er(n, er_p, seed)
    if kind == "BA":
        return generate_ba(n, ba_m, seed)
    if kind == "WS":
        return generate_ws(n, ws_k, ws_beta, seed)
    raise ConfigError(f"unknown topology {kind!r}; expected ER, BA or WS")


class Role(enum.Enum):
    LIGHT = "light"
    FULL = "full"


@dataclass(frozen=True)
class NodeRole:
    role: Role
    hash_power: float
    relay_cost: float
    validation_cost: float = 0.0

    @property
    def is_full(self) -> bool:
        return self.role is Role.FULL


@dataclass(frozen=True)
class CostParams:
    relay_mean: float = 1.0
    relay_std: float = 0.1
    validation_mean: float = 5.0
    validation_std: float = 1.0
    floor: float = 1e-3


def full_node_count(n: int, full_fraction: float) -> int:
    # round first so that e.g. 100 * 0.2 never ceils to 21 through float noise
    return math.ceil(round(n * full_fraction, 9))


def assign_roles(g: Graph, full_fraction: float, cost_params: CostParams, seed: int,
                 hash_overrides: dict[int, float] | None = None) -> dict[int, NodeRole]:
    """Pick ``ceil(n * full_fraction)`` full nodes and draw per-node costs.

    Hash power is uniform over full nodes; ``hash_overrides`` pins chosen full
    nodes to given fractions and spreads the remainder evenly over the rest.
    """
    n = g.node_count
    if not 0.0 < full_fraction < 1.0:
        raise ConfigError(f"full_fraction must lie in (0, 1), got {full_fraction}")
    n_full = full_node_count(n, full_fraction)
    if n_full < 1 or n_full > n:
        raise ConfigError(f"{n_full} full nodes cannot be placed among {n} nodes")
    rng = random.Random(seed)
    full = set(rng.sample(range(n), n_full))
    power = _hash_powers(sorted(full), hash_overrides or {})
    roles = {}
    for u in range(n):
        c_f = truncated_gauss(rng, cost_params.relay_mean, cost_params.relay_std, cost_params.floor)
        if u in full:
            c_v = truncated_gauss(rng, cost_params.validation_mean, cost_params.validation_std,
                                  cost_params.floor)
            roles[u] = NodeRole(Role.FULL, power[u], c_f, c_v)
        else:
            roles[u] = NodeRole(Role.LIGHT, 0.0, c_f)
    return roles


def _hash_powers(full: list[int], overrides: dict[int, float]) -> dict[int, float]:
    for u, frac in overrides.items():
        if u not in full:
            raise ConfigError(f"hash power override for node {u}, which is not a full node")
        if not 0.0 <= frac <= 1.0:
            raise ConfigError(f"hash power override {frac} outside [0, 1]")
    pinned = sum(overrides.values())
    if pinned > 1.0 + 1e-12:
        raise ConfigError(f"hash power overrides sum to {pinned} > 1")
    rest = [u for u in full if u not in overrides]
    if not rest:
        if abs(pinned - 1.0) > 1e-12:
            raise ConfigError("hash power overrides cover every full node but do not sum to 1")
        return dict(overrides)
    share = (1.0 - pinned) / len(rest)
    return {u: overrides.get(u, share) for u in full}
