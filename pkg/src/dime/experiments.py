"""Experiment harness: spec-driven runs, CSV outputs, bootstrap summaries.

Synthetic small-world networks stand in for the field networks, so every
experiment family is reproduced as a trend, not as absolute numbers.
Rows are deterministic given the master seed; wall-clock columns are the
only non-reproducible output.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import STRATEGY_IDS, make_strategy, simulate_episode
from .network import (
    Edge,
    UncertainNetwork,
    decorate_uniform,
    generate_watts_strogatz,
    load_network,
    sample_instantiation,
)
from .seeding import (
    NS_BOOTSTRAP,
    NS_EPISODE,
    NS_GROUND_TRUTH,
    NS_NETWORK_GEN,
    NS_STRATEGY,
    child_rng,
)
from .tasp import TaspConfig

EXPERIMENT_KINDS = ("quality", "runtime_nodes", "scale_k", "scale_t", "deviation", "sensitivity")


def indirect_influence(total_influenced: int, k: int, t: int) -> int:
    """Influenced count beyond the K*T certainly-influenced participants.

    May go negative when deviations repeated nodes; reported raw.
    """
    if total_influenced < 0:
        raise ValueError("total_influenced must be >= 0")
    return total_influenced - k * t


# -- bootstrap-t confidence intervals --------------------------------------


def bootstrap_t_interval(
    values: Sequence[float],
    alpha: float = 0.05,
    n_boot: int = 2000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, float]:
    """(mean, lo, hi): studentized bootstrap CI for the mean."""
    x = np.asarray(values, dtype=float)
    n = x.size
    mean = float(x.mean()) if n else math.nan
    if n < 2 or float(x.std(ddof=1)) == 0.0:
        return mean, mean, mean
    rng = rng or np.random.default_rng(0)
    se = float(x.std(ddof=1)) / math.sqrt(n)
    t_stats = _bootstrap_t_stats(x, mean, n_boot, rng)
    lo = mean - float(np.quantile(t_stats, 1 - alpha / 2)) * se
    hi = mean - float(np.quantile(t_stats, alpha / 2)) * se
    return mean, lo, hi


def bootstrap_t_greater(
    paired_diffs: Sequence[float],
    alpha: float = 0.05,
    n_boot: int = 2000,
    rng: np.random.Generator | None = None,
) -> tuple[bool, float, float]:
    """One-sided test that the mean paired difference is > 0.

    Returns (significant, mean, one-sided lower bound).
    """
    x = np.asarray(paired_diffs, dtype=float)
    n = x.size
    mean = float(x.mean()) if n else math.nan
    if n < 2 or float(x.std(ddof=1)) == 0.0:
        return (mean > 0, mean, mean)
    rng = rng or np.random.default_rng(0)
    se = float(x.std(ddof=1)) / math.sqrt(n)
    t_stats = _bootstrap_t_stats(x, mean, n_boot, rng)
    lower = mean - float(np.quantile(t_stats, 1 - alpha)) * se
    return (lower > 0, mean, lower)


def _bootstrap_t_stats(
    x: np.ndarray, mean: float, n_boot: int, rng: np.random.Generator
) -> np.ndarray:
    n = x.size
    idx = rng.integers(0, n, size=(n_boot, n))
    samples = x[idx]
    bmeans = samples.mean(axis=1)
    bse = samples.std(axis=1, ddof=1) / math.sqrt(n)
    t_stats = np.zeros(n_boot)
    ok = bse > 0
    t_stats[ok] = (bmeans[ok] - mean) / bse[ok]
    return t_stats


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    def ranks(v):
        v = np.asarray(v, dtype=float)
        order = np.argsort(v, kind="stable")
        r = np.empty(v.size)
        r[order] = np.arange(1, v.size + 1, dtype=float)
        # average tied ranks
        for val in np.unique(v):
            mask = v == val
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r

    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx**2).sum() * (ry**2).sum()))
    return float((rx * ry).sum() / denom) if denom else 0.0


# -- experiment specification ----------------------------------------------


@dataclass(frozen=True)
class SensitivityCell:
    planned_u: float
    planned_p: float
    true_u: float
    true_p: float
    loss_percent: float


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    k: int = 2
    t: int = 5
    length: int = 2
    strategies: tuple[str, ...] = ("heal", "greedy", "random")
    runs: int = 100
    seed: int = 0
    network_file: str | None = None
    generator: dict | None = None          # {"n":..,"k":..,"beta":..}
    decorate: dict | None = None           # {"p":..,"u":..,"uncertain_fraction":..}
    network_per_run: bool = False          # fresh topology per run (generator only)
    tasp: TaspConfig = TaspConfig()
    greedy_budget: int = 300
    sizes: tuple[int, ...] = ()            # runtime_nodes
    k_values: tuple[int, ...] = ()         # scale_k
    t_values: tuple[int, ...] = ()         # scale_t
    deviation_counts: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    planned: tuple[float, float] = (0.1, 0.6)   # (u, p) the planner believes
    true_u_values: tuple[float, ...] = (0.1, 0.2, 0.3)
    true_p_values: tuple[float, ...] = (0.5, 0.6, 0.7)
    runtime_budget_s: float = 300.0

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind: {self.kind}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        for s in self.strategies:
            if s not in STRATEGY_IDS:
                raise ValueError(f"unknown strategy id: {s}")
        if self.kind == "runtime_nodes" and not self.sizes:
            raise ValueError("runtime_nodes needs non-empty sizes")
        if self.kind == "scale_k" and not self.k_values:
            raise ValueError("scale_k needs non-empty k_values")
        if self.kind == "scale_t" and not self.t_values:
            raise ValueError("scale_t needs non-empty t_values")
        if self.kind == "deviation" and not self.deviation_counts:
            raise ValueError("deviation needs non-empty deviation_counts")
        if self.network_file is None and self.generator is None:
            raise ValueError("spec needs a network file or generator parameters")
        if self.kind in ("runtime_nodes", "sensitivity") and self.generator is None:
            raise ValueError(f"{self.kind} needs generator parameters")
        if self.network_per_run and self.generator is None:
            raise ValueError("network_per_run needs generator parameters")


def spec_from_json(doc: dict | str | bytes) -> ExperimentSpec:
    """Parse the CLI's experiment-spec JSON."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    network = doc.get("network", {})
    tasp_doc = doc.get("tasp", {})
    tasp_config = TaspConfig(
        delta=int(tasp_doc.get("delta", 20)),
        nsim=int(tasp_doc.get("nsim", 1024)),
        ucb_c=float(tasp_doc.get("ucb_c", 1.414)),
        aggregation=str(tasp_doc.get("aggregation", "sample_mean")),
    )
    planned = doc.get("planned", {"u": 0.1, "p": 0.6})
    return ExperimentSpec(
        kind=doc["kind"],
        k=int(doc.get("K", 2)),
        t=int(doc.get("T", 5)),
        length=int(doc.get("L", 2)),
        strategies=tuple(doc.get("strategies", ["heal", "greedy", "random"])),
        runs=int(doc.get("runs", 100)),
        seed=int(doc.get("seed", 0)),
        network_file=network.get("file"),
        generator=network.get("generator"),
        decorate=network.get("decorate"),
        network_per_run=bool(network.get("per_run", False)),
        tasp=tasp_config,
        greedy_budget=int(doc.get("greedy_budget", 300)),
        sizes=tuple(doc.get("sizes", [])),
        k_values=tuple(doc.get("k_values", [])),
        t_values=tuple(doc.get("t_values", [])),
        deviation_counts=tuple(doc.get("deviations", [0, 1, 2, 3, 4, 5])),
        planned=(float(planned["u"]), float(planned["p"])),
        true_u_values=tuple(doc.get("true_u", [0.1, 0.2, 0.3])),
        true_p_values=tuple(doc.get("true_p", [0.5, 0.6, 0.7])),
        runtime_budget_s=float(doc.get("runtime_budget_s", 300.0)),
    )


def build_network(
    spec: ExperimentSpec, n_override: int | None = None, run: int | None = None
) -> UncertainNetwork:
    """Materialize the spec's network (file or seeded generator + decoration)."""
    if spec.network_file is not None:
        return load_network(Path(spec.network_file).read_bytes())
    gen = dict(spec.generator or {})
    if n_override is not None:
        gen["n"] = n_override
    key = [spec.seed, NS_NETWORK_GEN, int(gen.get("n", 0))]
    if run is not None:
        key.append(run)
    rng = child_rng(*key)
    net = generate_watts_strogatz(
        n=int(gen["n"]), k=int(gen.get("k", 6)), beta=float(gen.get("beta", 0.1)), rng=rng
    )
    dec = spec.decorate or {}
    return decorate_uniform(
        net,
        p=float(dec.get("p", 0.1)),
        u=float(dec.get("u", 0.6)),
        uncertain_fraction=float(dec.get("uncertain_fraction", 0.3)),
        rng=rng,
    )


# -- runner -----------------------------------------------------------------


@dataclass
class ExperimentOutput:
    rows: list[dict]
    summaries: list[dict]
    figure_data: dict[str, list[dict]] = field(default_factory=dict)


def run_experiment(spec: ExperimentSpec) -> ExperimentOutput:
    """Dispatch an experiment kind; all rows deterministic except wall times."""
    runner = {
        "quality": _run_quality,
        "scale_k": _run_scale_k,
        "scale_t": _run_scale_t,
        "deviation": _run_deviation,
        "runtime_nodes": _run_runtime,
        "sensitivity": _run_sensitivity,
    }[spec.kind]
    return runner(spec)


def _strategy_seed(spec: ExperimentSpec, strategy_id: str, run: int) -> int:
    """Planner seeds stay fixed on a shared network so the recommendation
    cache can pool runs; with per-run networks each run re-seeds."""
    idx = STRATEGY_IDS.index(strategy_id)
    if strategy_id in ("heal", "heal_t") and not spec.network_per_run:
        return int(np.random.SeedSequence([spec.seed, NS_STRATEGY, idx]).generate_state(1)[0])
    return int(
        np.random.SeedSequence([spec.seed, NS_STRATEGY, idx, run]).generate_state(1)[0]
    )


def _episode(
    spec: ExperimentSpec,
    net: UncertainNetwork,
    strategy_id: str,
    run: int,
    k: int,
    t: int,
    ground_truth,
    caches: dict,
    deviations: int = 0,
    cache_key: tuple = (),
    episode_key: tuple = (),
) -> tuple[dict, float]:
    cache = caches.setdefault((strategy_id, k, t) + cache_key, {})
    strategy = make_strategy(
        strategy_id, net, k, t, spec.length,
        seed=_strategy_seed(spec, strategy_id, run),
        tasp_config=spec.tasp,
        greedy_budget=spec.greedy_budget,
        recommendation_cache=cache if strategy_id in ("heal", "heal_t") else None,
    )
    # episode stream keyed by run only: strategies compared on one run see
    # the same ground-truth coins wherever their trajectories coincide
    rng = child_rng(spec.seed, NS_EPISODE, run, *episode_key)
    started = time.perf_counter()
    result = simulate_episode(
        strategy, net, ground_truth, k, t, spec.length, rng, deviations=deviations
    )
    elapsed = time.perf_counter() - started
    row = {
        "run": run,
        "strategy": strategy_id,
        "n_nodes": net.n_nodes,
        "K": k,
        "T": t,
        "L": spec.length,
        "total_influenced": result.final_influenced,
        "indirect_influence": result.indirect_influence,
    }
    return row, elapsed


def _summarize(rows: list[dict], group_fields: tuple[str, ...], spec: ExperimentSpec) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = tuple(row[f] for f in group_fields)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    summaries = []
    for i, key in enumerate(order):
        vals = [r["indirect_influence"] for r in groups[key]]
        mean, lo, hi = bootstrap_t_interval(
            vals, rng=child_rng(spec.seed, NS_BOOTSTRAP, i)
        )
        summary = dict(zip(group_fields, key))
        summary.update(
            runs=len(vals),
            mean_indirect_influence=mean,
            ci_lo=lo,
            ci_hi=hi,
        )
        summaries.append(summary)
    return summaries


def _run_quality(spec: ExperimentSpec) -> ExperimentOutput:
    shared_net = None if spec.network_per_run else build_network(spec)
    caches: dict = {}
    rows: list[dict] = []
    per_strategy: dict[str, list[float]] = {s: [] for s in spec.strategies}
    for run in range(spec.runs):
        net = shared_net if shared_net is not None else build_network(spec, run=run)
        gt = sample_instantiation(net, child_rng(spec.seed, NS_GROUND_TRUTH, run))
        for strategy_id in spec.strategies:
            row, elapsed = _episode(
                spec, net, strategy_id, run, spec.k, spec.t, gt, caches
            )
            row["wall_time_s"] = elapsed
            rows.append(row)
            per_strategy[strategy_id].append(row["indirect_influence"])
    summaries = _summarize(rows, ("strategy",), spec)
    # paired one-sided comparisons against the first strategy
    lead = spec.strategies[0]
    for j, other in enumerate(spec.strategies[1:], start=1):
        diffs = np.array(per_strategy[lead]) - np.array(per_strategy[other])
        significant, mean, lower = bootstrap_t_greater(
            diffs, rng=child_rng(spec.seed, NS_BOOTSTRAP, 100 + j)
        )
        summaries.append(
            {
                "strategy": f"{lead}>{other}",
                "runs": spec.runs,
                "mean_indirect_influence": mean,
                "ci_lo": lower,
                "ci_hi": math.nan,
                "significant": bool(significant),
            }
        )
    fig = {
        "quality": [
            {k: v for k, v in s.items()}
            for s in summaries
            if ">" not in str(s["strategy"])
        ]
    }
    return ExperimentOutput(rows=rows, summaries=summaries, figure_data=fig)


def _run_scale(spec: ExperimentSpec, param_name: str, values: tuple[int, ...]) -> ExperimentOutput:
    net = build_network(spec)
    caches: dict = {}
    rows: list[dict] = []
    for value in values:
        k = value if param_name == "K" else spec.k
        t = value if param_name == "T" else spec.t
        for run in range(spec.runs):
            gt = sample_instantiation(net, child_rng(spec.seed, NS_GROUND_TRUTH, run))
            for strategy_id in spec.strategies:
                row, elapsed = _episode(
                    spec, net, strategy_id, run, k, t, gt, caches,
                    episode_key=(value,),
                )
                row["wall_time_s"] = elapsed
                rows.append(row)
    summaries = _summarize(rows, (param_name, "strategy"), spec)
    return ExperimentOutput(
        rows=rows, summaries=summaries,
        figure_data={f"scale_{param_name.lower()}": summaries},
    )


def _run_scale_k(spec: ExperimentSpec) -> ExperimentOutput:
    return _run_scale(spec, "K", spec.k_values)


def _run_scale_t(spec: ExperimentSpec) -> ExperimentOutput:
    return _run_scale(spec, "T", spec.t_values)


def _run_deviation(spec: ExperimentSpec) -> ExperimentOutput:
    shared_net = None if spec.network_per_run else build_network(spec)
    caches: dict = {}
    rows: list[dict] = []
    strategy_id = spec.strategies[0] if spec.strategies else "heal"
    for d in spec.deviation_counts:
        for run in range(spec.runs):
            net = shared_net if shared_net is not None else build_network(spec, run=run)
            gt = sample_instantiation(net, child_rng(spec.seed, NS_GROUND_TRUTH, run))
            row, elapsed = _episode(
                spec, net, strategy_id, run, spec.k, spec.t, gt, caches,
                deviations=d, episode_key=(1000 + d,),
            )
            row["deviations"] = d
            row["wall_time_s"] = elapsed
            rows.append(row)
    summaries = _summarize(rows, ("deviations",), spec)
    means = [s["mean_indirect_influence"] for s in summaries]
    rho = spearman_rho(list(spec.deviation_counts), means)
    summaries.append(
        {
            "deviations": "spearman_rho",
            "runs": spec.runs,
            "mean_indirect_influence": rho,
            "ci_lo": math.nan,
            "ci_hi": math.nan,
        }
    )
    return ExperimentOutput(
        rows=rows, summaries=summaries, figure_data={"deviation": summaries[:-1]}
    )


def _run_runtime(spec: ExperimentSpec) -> ExperimentOutput:
    rows: list[dict] = []
    strategy_id = spec.strategies[0] if spec.strategies else "heal"
    for n in spec.sizes:
        net = build_network(spec, n_override=n)
        caches: dict = {}
        for run in range(spec.runs):
            gt = sample_instantiation(net, child_rng(spec.seed, NS_GROUND_TRUTH, run))
            row, elapsed = _episode(
                spec, net, strategy_id, run, spec.k, spec.t, gt, caches,
                episode_key=(n,),
            )
            row["wall_time_s"] = elapsed
            row["within_budget"] = elapsed <= spec.runtime_budget_s
            rows.append(row)
    summaries = []
    for n in spec.sizes:
        times = [r["wall_time_s"] for r in rows if r["n_nodes"] == n]
        summaries.append(
            {
                "n_nodes": n,
                "runs": len(times),
                "mean_wall_time_s": float(np.mean(times)),
                "max_wall_time_s": float(np.max(times)),
                "budget_s": spec.runtime_budget_s,
                "within_budget": bool(np.max(times) <= spec.runtime_budget_s),
            }
        )
    return ExperimentOutput(rows=rows, summaries=summaries, figure_data={"runtime": summaries})


def _decorate_fixed(
    base: UncertainNetwork, uncertain_positions: set[int], p: float, u: float
) -> UncertainNetwork:
    edges = [
        Edge(src=e.src, dst=e.dst, p=p, u=u if i in uncertain_positions else None)
        for i, e in enumerate(base.edges)
    ]
    return UncertainNetwork(n_nodes=base.n_nodes, edges=edges, labels=base.labels)


def _run_sensitivity(spec: ExperimentSpec) -> ExperimentOutput:
    """Planner beliefs vs. reality grid: % loss of planning on wrong (u, p)."""
    gen = dict(spec.generator or {})
    rng = child_rng(spec.seed, NS_NETWORK_GEN, int(gen.get("n", 0)))
    topology = generate_watts_strogatz(
        n=int(gen["n"]), k=int(gen.get("k", 6)), beta=float(gen.get("beta", 0.1)), rng=rng
    )
    frac = float((spec.decorate or {}).get("uncertain_fraction", 0.3))
    m = topology.n_edges
    n_uncertain = int(round(frac * m))
    uncertain_positions = (
        set(rng.choice(m, size=n_uncertain, replace=False).tolist()) if n_uncertain else set()
    )
    planned_u, planned_p = spec.planned
    planned_net = _decorate_fixed(topology, uncertain_positions, planned_p, planned_u)

    rows: list[dict] = []
    summaries: list[dict] = []
    cells: list[SensitivityCell] = []
    strategy_id = spec.strategies[0] if spec.strategies else "heal"
    for true_u in spec.true_u_values:
        for true_p in spec.true_p_values:
            true_net = _decorate_fixed(topology, uncertain_positions, true_p, true_u)
            true_vals: list[float] = []
            est_vals: list[float] = []
            caches: dict = {}
            for run in range(spec.runs):
                gt = sample_instantiation(
                    true_net, child_rng(spec.seed, NS_GROUND_TRUTH, run)
                )
                for variant, planning_net in (("true", true_net), ("estimated", planned_net)):
                    row, elapsed = _episode(
                        spec, planning_net, strategy_id, run, spec.k, spec.t, gt,
                        caches, cache_key=(variant, true_u, true_p),
                    )
                    row["variant"] = variant
                    row["true_u"] = true_u
                    row["true_p"] = true_p
                    row["wall_time_s"] = elapsed
                    rows.append(row)
                    (true_vals if variant == "true" else est_vals).append(
                        row["indirect_influence"]
                    )
            true_mean = float(np.mean(true_vals))
            est_mean = float(np.mean(est_vals))
            loss = 0.0 if true_mean == 0 else 100.0 * (true_mean - est_mean) / true_mean
            cells.append(
                SensitivityCell(
                    planned_u=planned_u, planned_p=planned_p,
                    true_u=true_u, true_p=true_p, loss_percent=loss,
                )
            )
            summaries.append(
                {
                    "true_u": true_u,
                    "true_p": true_p,
                    "runs": spec.runs,
                    "true_mean": true_mean,
                    "estimated_mean": est_mean,
                    "loss_percent": loss,
                }
            )
    return ExperimentOutput(
        rows=rows, summaries=summaries, figure_data={"sensitivity": summaries}
    )
