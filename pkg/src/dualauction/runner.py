"""Scenario expansion, seeded batch execution, presets and output tables."""

from __future__ import annotations

import csv
import io
import itertools
import math
import statistics
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .adversary import double_spend_rate
from .config import FIELD_NAMES, make_config
from .engine import run
from .errors import ConfigError
from .metrics import RunMetrics, compute_metrics

KINDS = ("sim", "doublespend")


@dataclass
class ScenarioConfig:
    """A named experiment: fixed values, sweep axes and seeds.

    ``kind`` is ``sim`` for network runs or ``doublespend`` for the reduced
    mining-race model, whose axis is ``attacker_power``.
    """

    name: str = "run"
    fixed: dict[str, Any] = field(default_factory=dict)
    axes: dict[str, list] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [1])
    kind: str = "sim"
    trials: int = 500
    give_up_lead: int | None = None

    def with_seed_base(self, base: int) -> "ScenarioConfig":
        """Same scenario with seeds renumbered to start at ``base``."""
        return ScenarioConfig(self.name, dict(self.fixed), dict(self.axes),
                              [base + i for i in range(len(self.seeds))], self.kind, self.trials,
                              self.give_up_lead)


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    point: tuple[tuple[str, Any], ...]
    seed: int
    values: dict[str, Any]
    kind: str = "sim"
    trials: int = 0
    give_up_lead: int | None = None


@dataclass
class RunRecord:
    spec: RunSpec
    row: dict[str, Any] | None = None
    files: dict[str, str] = field(default_factory=dict)
    extra: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    error: str | None = None


@dataclass
class BatchResult:
    scenario: ScenarioConfig
    records: list[RunRecord]
    tables: dict[str, str] = field(default_factory=dict)

    @property
    def failures(self) -> list[RunRecord]:
        return [r for r in self.records if r.error is not None]


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return str(v).lower()
    return str(v)


def run_id_for(point: tuple[tuple[str, Any], ...], seed: int) -> str:
    parts = [f"{k}={_fmt(v)}" for k, v in point] + [f"seed={seed}"]
    return "_".join(p.replace("/", "-") for p in parts)


def expand_sweep(scenario: ScenarioConfig) -> list[RunSpec]:
    """Cross product of axes (sorted by name, values in listed order), then seeds."""
    if scenario.kind not in KINDS:
        raise ConfigError(f"kind: must be one of {', '.join(KINDS)} (got {scenario.kind!r})")
    clash = sorted(set(scenario.axes) & set(scenario.fixed))
    if clash:
        raise ConfigError(f"parameter given both as fixed value and sweep axis: {', '.join(clash)}")
    for name, values in scenario.axes.items():
        if not values:
            raise ConfigError(f"axis {name!r} is empty")
    if not scenario.seeds:
        raise ConfigError("seeds: at least one seed is required")
    allowed = FIELD_NAMES | ({"attacker_power"} if scenario.kind == "doublespend" else set())
    unknown = sorted((set(scenario.axes) | set(scenario.fixed)) - allowed)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    names = sorted(scenario.axes)
    specs = []
    for combo in itertools.product(*(scenario.axes[n] for n in names)):
        point = tuple(zip(names, combo))
        for seed in scenario.seeds:
            values = {**scenario.fixed, **dict(point), "seed": seed}
            specs.append(RunSpec(run_id_for(point, seed), point, seed, values, scenario.kind,
                                 scenario.trials, scenario.give_up_lead))
    return specs


# ------------------------------------------------------------------ one run
def _csv(rows: list[dict[str, Any]], columns: list[str] | tuple[str, ...]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def execute(spec: RunSpec) -> RunRecord:
    """Run one spec in isolation; any exception becomes a failure record."""
    try:
        if spec.kind == "doublespend":
            return _execute_doublespend(spec)
        return _execute_sim(spec)
    except Exception as exc:  # noqa: BLE001 - isolation is the point
        msg = f"{type(exc).__name__}: {exc}"
        if not isinstance(exc, ConfigError):
            msg += "\n" + traceback.format_exc()
        return RunRecord(spec, error=msg)


def _execute_sim(spec: RunSpec) -> RunRecord:
    cfg = make_config(spec.values)
    result = run(cfg)
    m = compute_metrics(result)
    row = m.row()
    blocks = result.chain.dump()
    settlement = "block_id,tx_id,payee,role,amount\n" + "".join(
        line + "\n" for s in result.settlements for line in s.audit_lines())
    files = {
        "metrics.csv": _csv([row], RunMetrics.COLUMNS),
        "blocks.log": blocks,
        "settlement.log": settlement,
        "config.resolved": cfg.dump(),
    }
    return RunRecord(spec, row, files, {"regret": _regret_rows(m, result)})


def _regret_rows(m: RunMetrics, result) -> list[dict[str, Any]]:
    rows = []
    for node in sorted(m.regret):
        if result.roles[node].is_full:
            continue
        g = m.regret[node]
        rows.append({"node": node, "rounds": g.rounds, "achieved": g.achieved,
                     "best_fixed": g.best_fixed, "gap": g.gap, "bound": g.bound,
                     "within_bound": g.achieved + g.bound >= g.best_fixed})
    return rows


def _execute_doublespend(spec: RunSpec) -> RunRecord:
    v = spec.values
    q = float(v["attacker_power"])
    n_c = int(v.get("n_c", 6))
    rate = double_spend_rate(q, spec.trials, spec.seed, n_c, spec.give_up_lead)
    row = {"attacker_power": q, "trials": spec.trials, "n_c": n_c,
           "successes": round(rate * spec.trials), "success_rate": rate}
    cols = ("attacker_power", "trials", "n_c", "successes", "success_rate")
    return RunRecord(spec, row, {"metrics.csv": _csv([row], cols),
                                 "config.resolved": yaml.safe_dump(
                                     {**v, "trials": spec.trials, "give_up_lead": spec.give_up_lead},
                                     sort_keys=True)})


# ---------------------------------------------------------------- batches
def run_batch(scenario: ScenarioConfig, parallelism: int = 1, out_dir: str | Path | None = None,
              specs: list[RunSpec] | None = None) -> BatchResult:
    """Execute every run of the scenario and aggregate per sweep point.

    Runs are independent; results are merged in spec order, so the output
    does not depend on ``parallelism``. A failing run is recorded and the
    batch continues.
    """
    specs = expand_sweep(scenario) if specs is None else specs
    if parallelism > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(execute, specs, chunksize=max(1, len(specs) // (4 * parallelism))))
    else:
        records = [execute(s) for s in specs]
    batch = BatchResult(scenario, records)
    batch.tables = build_tables(batch)
    if out_dir is not None:
        write_batch(batch, Path(out_dir))
    return batch


def aggregate(records: list[RunRecord], columns: list[str] | tuple[str, ...]) -> list[dict[str, Any]]:
    """Mean and sample std of each column per sweep point (failed runs excluded)."""
    groups: dict[tuple, list[dict[str, Any]]] = {}
    for r in records:
        groups.setdefault(r.spec.point, [])
        if r.row is not None:
            groups[r.spec.point].append(r.row)
    out = []
    for point, rows in groups.items():
        entry: dict[str, Any] = dict(point)
        entry["n"] = len(rows)
        for c in columns:
            xs = [float(row[c]) for row in rows]
            entry[f"{c}_mean"] = statistics.fmean(xs) if xs else math.nan
            entry[f"{c}_std"] = statistics.stdev(xs) if len(xs) > 1 else 0.0
        out.append(entry)
    return out


# figure table -> metric columns it reports
FIGURE_COLUMNS = {
    "fig6_tps": ("tps",),
    "fig6_confirm": ("confirm_prob",),
    "fig6_bandwidth": ("bandwidth_total",),
    "fig7_alloc": ("relay_reward_total", "validation_reward_total", "relay_cost_total",
                   "validation_cost_total"),
    "fig8_welfare": ("social_welfare",),
    "fig10_sybil": ("attacker_utility",),
    "fig11_doublespend": ("success_rate",),
    "fig12_blocksize": ("tps",),
    "fig13_faults": ("tps",),
    "fig14_topology": ("tps",),
}
PRESET_TABLES = {
    "fig6": ("fig6_tps", "fig6_confirm", "fig6_bandwidth"),
    "fig7": ("fig7_alloc",),
    "fig8": ("fig8_welfare",),
    "fig9": ("fig9_regret",),
    "fig10": ("fig10_sybil",),
    "fig11": ("fig11_doublespend",),
    "fig12": ("fig12_blocksize",),
    "fig13": ("fig13_faults",),
    "fig14": ("fig14_topology",),
}
REGRET_COLUMNS = ("seed", "node", "rounds", "achieved", "best_fixed", "gap", "bound", "within_bound")

SCHEMA = """\
# Output tables

Every run directory holds metrics.csv (one row, columns below), blocks.log
(height,block_id,proposer,tx_count,payment per main-chain block),
settlement.log (block_id,tx_id,payee,role,amount) and config.resolved (YAML).
Double-spend runs hold only metrics.csv and config.resolved.

## metrics.csv
tps                      distinct txs in main-chain blocks at depth >= n_c, per second
confirm_prob             confirmed / produced
produced, confirmed      tx counts
bandwidth_total          1 per tx transmission + 40 per block transmission
tx_transmissions, block_transmissions
social_welfare           sum of node utilities (checked against the transfer-cancelled form)
relay_reward_total       relay payments settled
validation_reward_total  proposer receipts settled
relay_cost_total         c_f summed over every relay action
validation_cost_total    c_v summed over every proposed block, orphans included
charge_total             producer charges (equals the two reward totals)
producer_surplus_total   sum of V - charge over confirmed txs
producer_surplus_literal_total  sum of V - F over confirmed txs (0 under honest bidding)
attacker_utility         relay rewards minus relay costs of the Sybil node
blocks_main              main-chain blocks at depth >= n_c
blocks_proposed          all proposed blocks

## summary.csv and figure tables
One row per sweep point: the axis values, n (successful runs), then
<metric>_mean and <metric>_std (sample std, 0 for a single run) for each
reported metric.
fig6_tps, fig6_confirm, fig6_bandwidth  axes mechanism, n_nodes
fig7_alloc        axes mechanism, n_nodes
fig8_welfare      axes mechanism, n_nodes
fig10_sybil       axis sybil_identities
fig11_doublespend axis attacker_power; success_rate over `trials` races
fig12_blocksize   axis block_capacity
fig13_faults      axes fault_fraction, fault_role
fig14_topology    axis topology

## fig9_regret
seed,node,rounds,achieved,best_fixed,gap,bound,within_bound
One row per light node: expected learner utility over its first rounds,
the better constant policy, their difference and ln2/gamma + gamma*K
summed over per-source learners (costs normalised to [-1, 1]).

## failures.csv
run_id,error for every run that raised.
"""


def build_tables(batch: BatchResult) -> dict[str, str]:
    sc = batch.scenario
    ok = [r for r in batch.records if r.row is not None]
    if not ok:
        return {}
    columns = list(ok[0].row)
    axis_names = sorted(sc.axes)
    numeric = [c for c in columns if c not in axis_names and isinstance(ok[0].row[c], (int, float))]
    tables = {"summary.csv": _csv(aggregate(batch.records, numeric),
                                  axis_names + ["n"] + [f"{c}_{s}" for c in numeric for s in ("mean", "std")])}
    for table in PRESET_TABLES.get(sc.name, ()):
        if table == "fig9_regret":
            rows = [{"seed": r.spec.seed, **row} for r in ok for row in r.extra.get("regret", [])]
            tables[f"{table}.csv"] = _csv(rows, REGRET_COLUMNS)
            continue
        cols = FIGURE_COLUMNS[table]
        tables[f"{table}.csv"] = _csv(aggregate(batch.records, cols),
                                      axis_names + ["n"] + [f"{c}_{s}" for c in cols for s in ("mean", "std")])
    if batch.failures:
        tables["failures.csv"] = _csv([{"run_id": r.spec.run_id, "error": r.error.splitlines()[0]}
                                       for r in batch.failures], ("run_id", "error"))
    return tables


def write_batch(batch: BatchResult, out_dir: Path) -> Path:
    root = out_dir / batch.scenario.name
    root.mkdir(parents=True, exist_ok=True)
    for rec in batch.records:
        if rec.error is not None:
            continue
        d = root / rec.spec.run_id
        d.mkdir(exist_ok=True)
        for fname, text in rec.files.items():
            (d / fname).write_text(text)
    for fname, text in batch.tables.items():
        (root / fname).write_text(text)
    stale = root / "failures.csv"
    if "failures.csv" not in batch.tables and stale.exists():
        stale.unlink()
    (root / "schema.md").write_text(SCHEMA)
    return root


# ----------------------------------------------------------------- presets
SEEDS5 = [1, 2, 3, 4, 5]
MECHANISMS = ["classical", "dual", "selfish"]


def preset(name: str) -> ScenarioConfig:
    """Desk-scale scenario reproducing one figure family."""
    builders = {
        "fig6": lambda: ScenarioConfig("fig6", {}, {"mechanism": MECHANISMS, "n_nodes": [20, 60, 100]}, SEEDS5),
        "fig7": lambda: ScenarioConfig("fig7", {}, {"mechanism": MECHANISMS, "n_nodes": [20, 60, 100]}, SEEDS5),
        "fig8": lambda: ScenarioConfig("fig8", {}, {"mechanism": MECHANISMS,
                                                    "n_nodes": [20, 40, 60, 80, 100]}, SEEDS5),
        "fig9": lambda: ScenarioConfig("fig9", {"mechanism": "dual", "n_nodes": 20, "regret_rounds": 50},
                                       {}, [1]),
        "fig10": lambda: ScenarioConfig("fig10", {"mechanism": "dual", "n_nodes": 20},
                                        {"sybil_identities": [0, 1, 2, 3, 4]}, list(range(1, 201))),
        "fig11": lambda: ScenarioConfig("fig11", {"n_c": 6},
                                        {"attacker_power": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]}, [1],
                                        kind="doublespend", trials=500),
        "fig12": lambda: ScenarioConfig("fig12", {"mechanism": "dual", "n_nodes": 100},
                                        {"block_capacity": [5, 10, 20, 40, 80]}, SEEDS5),
        "fig13": lambda: ScenarioConfig("fig13", {"mechanism": "dual", "n_nodes": 100},
                                        {"fault_fraction": [0.0, 0.1, 0.2, 0.4],
                                         "fault_role": ["any", "light", "full"]}, SEEDS5),
        "fig14": lambda: ScenarioConfig("fig14", {"mechanism": "dual", "n_nodes": 100},
                                        {"topology": ["ER", "BA", "WS"]}, SEEDS5),
    }
    if name not in builders:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return builders[name]()


PRESETS = ("fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14", "properties")


# ------------------------------------------------------------- config files
SCENARIO_KEYS = {"name", "axes", "seeds", "kind", "trials", "give_up_lead"}


def flatten_sections(data: dict[str, Any]) -> dict[str, Any]:
    """Merge nested sections (e.g. ``network: {n_nodes: 20}``) into flat keys."""
    flat: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict) and key not in FIELD_NAMES and key not in SCENARIO_KEYS:
            for k, v in flatten_sections(value).items():
                if k in flat:
                    raise ConfigError(f"key {k!r} given twice")
                flat[k] = v
        else:
            if key in flat:
                raise ConfigError(f"key {key!r} given twice")
            flat[key] = value
    return flat


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return flatten_sections(data)


def scenario_from_dict(data: dict[str, Any], base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Overlay file values onto ``base`` (or defaults); unknown keys are rejected."""
    sc = base or ScenarioConfig()
    fixed = dict(sc.fixed)
    axes = {k: list(v) for k, v in sc.axes.items()}
    for k, v in data.get("axes", {}).items():
        if not isinstance(v, list):
            raise ConfigError(f"axis {k!r} must be a list")
        axes[k] = v
    for k, v in data.items():
        if k in SCENARIO_KEYS:
            continue
        if k in axes and k not in data.get("axes", {}):
            # a fixed value in the file replaces the preset's axis
            del axes[k]
        fixed[k] = v
    seeds = data.get("seeds", sc.seeds)
    if isinstance(seeds, int):
        seeds = [seeds]
    return ScenarioConfig(str(data.get("name", sc.name)), fixed, axes, list(seeds),
                          str(data.get("kind", sc.kind)), int(data.get("trials", sc.trials)),
                          data.get("give_up_lead", sc.give_up_lead))
