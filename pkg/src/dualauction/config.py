"""Run configuration with defaults taken from the default parameter table."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Any

import yaml

from .errors import ConfigError


class Mechanism(str, enum.Enum):
    DUAL = "dual"
    CLASSICAL = "classical"
    SELFISH = "selfish"


@dataclass
class SimConfig:
    # network
    n_nodes: int = 20
    topology: str = "ER"
    er_p: float = 0.1
    ba_m: int = 2
    ws_k: int = 4
    ws_beta: float = 0.3
    edge_list_file: str | None = None
    full_fraction: float = 0.2
    hash_overrides: dict[int, float] = field(default_factory=dict)
    # node economics
    relay_cost_mean: float = 1.0
    relay_cost_std: float = 0.1
    validation_cost_mean: float = 5.0
    validation_cost_std: float = 1.0
    value_mean: float = 50.0
    value_std: float = 10.0
    value_cap: float = 100.0
    bid_shade: float = 0.0
    # protocol (defaults from the parameter table)
    mechanism: Mechanism = Mechanism.DUAL
    tx_rate: float = 2.0
    tx_schedule: str = "poisson"
    sync_interval: float = 10.0
    block_interval: float = 1.0
    confirm_delay: float = 10.0
    max_path: int = 6
    fanout: int = 3
    block_capacity: int = 40
    relay_window: int = 10
    alpha: float = 0.5
    gamma: float = 0.001
    n_c: int = 6
    # simulation plumbing
    duration: float = 60.0
    seed: int = 1
    relay_round: float = 0.1
    link_delay: float = 0.01
    link_jitter: float = 0.0
    tx_bandwidth: float = 1.0
    block_bandwidth: float = 40.0
    outcome_deadline_factor: float = 3.0
    learner_cost_bound: float | None = None
    regret_rounds: int = 50
    # faults
    fault_fraction: float = 0.0
    fault_role: str = "any"
    fault_interval_mean: float = 10.0
    fault_interval_std: float = 5.0
    fault_duration_mean: float = 0.5
    fault_duration_std: float = 0.1
    # Sybil adversary; sybil_node < 0 picks the best-connected light node
    sybil_identities: int = 0
    sybil_node: int = -1
    sybil_cap: int = 5

    @property
    def cost_bound(self) -> float:
        """Bound used to normalise learner costs into [-1, 1]."""
        if self.learner_cost_bound is not None:
            return self.learner_cost_bound
        return max(self.value_cap, self.relay_cost_mean + 10 * self.relay_cost_std)

    def validate(self) -> "SimConfig":
        problems = []

        def need(ok: bool, name: str, msg: str) -> None:
            if not ok:
                problems.append(f"{name}: {msg} (got {getattr(self, name)!r})")

        need(self.n_nodes >= 2, "n_nodes", "must be >= 2")
        need(self.topology.upper() in ("ER", "BA", "WS", "FILE"), "topology", "must be ER, BA, WS or FILE")
        need(self.topology.upper() != "FILE" or bool(self.edge_list_file), "edge_list_file",
             "required for FILE topology")
        need(0.0 < self.full_fraction < 1.0, "full_fraction", "must lie in (0, 1)")
        need(self.tx_rate > 0, "tx_rate", "must be positive")
        need(self.tx_schedule in ("poisson", "fixed"), "tx_schedule", "must be poisson or fixed")
        need(self.block_interval > 0, "block_interval", "must be positive")
        need(self.confirm_delay > 0, "confirm_delay", "must be positive")
        need(self.max_path >= 1, "max_path", "must be >= 1")
        need(self.fanout >= 1, "fanout", "must be >= 1")
        need(self.block_capacity >= 1, "block_capacity", "must be >= 1")
        need(self.relay_window >= 1, "relay_window", "must be >= 1")
        need(0.0 <= self.alpha <= 1.0, "alpha", "must lie in [0, 1]")
        need(0.0 < self.gamma <= 0.5, "gamma", "gamma * mu must be <= 1/2 after normalisation")
        need(self.n_c >= 1, "n_c", "must be >= 1")
        need(self.duration > 0, "duration", "must be positive")
        need(self.relay_round > 0, "relay_round", "must be positive")
        need(self.link_delay > 0, "link_delay", "must be positive")
        need(self.link_jitter >= 0, "link_jitter", "must be non-negative")
        need(0.0 <= self.bid_shade < 1.0, "bid_shade", "must lie in [0, 1)")
        need(0.0 <= self.fault_fraction <= 1.0, "fault_fraction", "must lie in [0, 1]")
        need(self.fault_role in ("any", "light", "full"), "fault_role", "must be any, light or full")
        need(0 <= self.sybil_identities <= self.sybil_cap, "sybil_identities", "must lie in [0, sybil_cap]")
        need(self.cost_bound > 0, "learner_cost_bound", "must be positive")
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["mechanism"] = self.mechanism.value
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


FIELD_NAMES = {f.name for f in dataclasses.fields(SimConfig)}


def make_config(values: dict[str, Any] | None = None, **overrides: Any) -> SimConfig:
    """Build and validate a config from plain values, rejecting unknown keys."""
    merged = {**(values or {}), **overrides}
    unknown = sorted(set(merged) - FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    if "mechanism" in merged:
        try:
            mech = merged["mechanism"]
            merged["mechanism"] = mech if isinstance(mech, Mechanism) else Mechanism(str(mech).lower())
        except ValueError:
            raise ConfigError(f"mechanism: unknown variant {merged['mechanism']!r}") from None
    if "hash_overrides" in merged:
        merged["hash_overrides"] = {int(k): float(v) for k, v in (merged["hash_overrides"] or {}).items()}
    try:
        cfg = SimConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()
