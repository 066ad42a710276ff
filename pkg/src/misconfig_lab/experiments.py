"""Benchmark harnesses shared by the command line and the acceptance suite."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .faults import FaultClass, build_sample, generate_sample, inject_config_fault, make_dataset, sample_true_config
from .graph import PRESETS, TopologyParams, generate_synthetic, zoo_documents
from .neuro.model import collate, forward
from .neuro.params import VARIANTS, Hyperparams, ModelParams, init_params
from .neuro.train import InjectionStream, TrainReport, evaluate, train
from .protocol import compute_forwarding
from .rules import default_weight_table, rb_classify, rb_complexity_estimate
from .specs import diff_specs, evaluate_all, generate_queries

log = logging.getLogger(__name__)

DATASETS = ("baseline", "larger-scale", "real-world")


def clean_pool(preset: str = "baseline", n: int = 1024, seed: int = 0, zoo=None) -> list:
    """Misconfiguration-free samples over ``n`` fresh topologies."""
    params = PRESETS[preset]
    if preset == "real-world" and zoo is None:
        zoo = zoo_documents()
    return [generate_sample(params, i, FaultClass.F0, seed, zoo=zoo) for i in range(n)]


def test_sets(n: int = 100, seed: int = 1000, zoo_dir=None) -> dict[str, list]:
    """Balanced held-out sets for the three dataset presets."""
    zoo = zoo_documents(zoo_dir)
    out = {}
    for offset, name in enumerate(DATASETS):
        ds = make_dataset(PRESETS[name], n, seed=seed + offset,
                          zoo=zoo if name == "real-world" else None)
        out[name] = ds.samples
    return out


@dataclass
class RunResult:
    variant: str
    seed: int
    params: ModelParams
    report: TrainReport
    samples_to_target: int | None


@dataclass
class Comparison:
    runs: list[RunResult] = field(default_factory=list)
    budget: int = 0
    window: int = 1000
    threshold: float = 0.8

    def by_variant(self, variant: str) -> list[RunResult]:
        return [r for r in self.runs if r.variant == variant]

    def median_samples_to_target(self, variant: str, censor: bool = True) -> float | None:
        """Median over seeds; runs that never reach the target count as the budget
        when ``censor`` is set, otherwise they make the result ``None``."""
        vals = []
        for r in self.by_variant(variant):
            if r.samples_to_target is None:
                if not censor:
                    return None
                vals.append(float(self.budget))
            else:
                vals.append(float(r.samples_to_target))
        return float(np.median(vals)) if vals else None

    def reached(self, variant: str) -> bool:
        runs = self.by_variant(variant)
        hit = sum(r.samples_to_target is not None for r in runs)
        return hit * 2 > len(runs)


def compare_variants(
    variants=VARIANTS,
    seeds=(0, 1, 2),
    budget: int = 20000,
    pool_size: int = 1024,
    window: int = 1000,
    threshold: float = 0.8,
    hp: Hyperparams | None = None,
    data_seed: int = 7,
    preset: str = "baseline",
) -> Comparison:
    """Train every variant under identical seeds, data pool and sample budget."""
    hp = hp or Hyperparams()
    pool = clean_pool(preset, pool_size, data_seed)
    result = Comparison(budget=budget, window=window, threshold=threshold)
    for seed in seeds:
        for v in variants:
            run_hp = hp.replace(variant=v, seed=seed)
            params, report = train(InjectionStream(pool), run_hp, max_samples=budget)
            s = report.samples_to_threshold(threshold, min(window, max(budget, 1)))
            log.info("variant=%s seed=%d samples_to_target=%s time=%.1fs", v, seed, s, report.wall_time)
            result.runs.append(RunResult(v, seed, params, report, s))
    return result


def _fit_exponent(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ScalingResult:
    rows: list[dict]
    exponents: dict[str, float]


def scaled_params(base: TopologyParams, factor: int) -> TopologyParams:
    def mul(r):
        lo, hi = (r, r) if isinstance(r, int) else r
        return (lo * factor, hi * factor)

    return TopologyParams(mul(base.router_range), mul(base.dst_range), mul(base.gateway_count),
                          base.query_counts, base.seed, base.avg_degree)


def bench_scaling(factors=(1, 2, 4), reps: int = 3, seed: int = 0,
                  hp: Hyperparams | None = None, min_time: float = 0.2) -> ScalingResult:
    """Time EtaGATv2 inference and rule-based diagnosis on growing topologies.

    Network scale is the message-passing size ``|E| + |V|`` of the augmented
    graph. Each timing is the best over ``reps`` repetitions of a loop that
    runs for at least ``min_time`` seconds.
    """
    hp = hp or Hyperparams(variant="etagatv2")
    params = init_params(hp)
    base = PRESETS["baseline"]
    rows = []
    weights = default_weight_table()
    for factor in factors:
        tp = scaled_params(base, factor)
        rng = np.random.default_rng([seed, factor])
        graph = generate_synthetic(tp, rng)
        config = sample_true_config(graph, rng)
        sample = build_sample(graph, config)
        batch = collate([sample])
        scale = batch.index.n_edges + batch.index.n_nodes
        counts = tuple(c * factor for c in (10, 5, 20))
        queries = generate_queries(graph, config, counts, rng)
        faulty = inject_config_fault(config, FaultClass.F1, delta=4)
        delta = diff_specs(queries, evaluate_all(queries, compute_forwarding(graph, faulty)))
        for algo, fn, ops in (
            ("etagatv2", lambda: forward(params, batch), scale),
            ("rb", lambda: rb_classify(delta, weights) if len(delta) else None,
             rb_complexity_estimate(7, len(delta))),
        ):
            for rep in range(reps):
                rows.append(dict(algorithm=algo, scale_factor=factor, repetition=rep,
                                 n_nodes=batch.index.n_nodes, n_edges=batch.index.n_edges,
                                 network_scale=scale, n_violations=len(delta), ops=ops,
                                 seconds=_time(fn, min_time)))
    exps = {}
    for algo in ("etagatv2", "rb"):
        sel = [r for r in rows if r["algorithm"] == algo]
        best = {}
        for r in sel:
            key = r["scale_factor"]
            best[key] = min(best.get(key, np.inf), r["seconds"])
        fs = sorted(best)
        xs = [next(r["network_scale"] for r in sel if r["scale_factor"] == f) for f in fs]
        exps[f"{algo}_vs_network_scale"] = _fit_exponent(xs, [best[f] for f in fs])
        exps[f"{algo}_vs_factor"] = _fit_exponent(fs, [best[f] for f in fs])
    return ScalingResult(rows, exps)


def _time(fn, min_time: float) -> float:
    fn()  # warm up
    n, t0 = 0, time.perf_counter()
    while True:
        fn()
        n += 1
        el = time.perf_counter() - t0
        if el >= min_time:
            return el / n


def rb_timing(sizes=(100, 1000, 10000), reps: int = 5, seed: int = 0) -> dict[int, float]:
    """Best-of-``reps`` wall time of :func:`rb_classify` on synthetic violation sets."""
    from .specs import DeltaS

    rng = np.random.default_rng(seed)
    weights = default_weight_table()
    out = {}
    for n in sizes:
        kinds = rng.integers(0, 3, size=n)
        by_kind = tuple(frozenset(np.flatnonzero(kinds == k).tolist()) for k in range(3))
        delta = DeltaS(frozenset(range(n)), by_kind)
        out[n] = min(_time(lambda: rb_classify(delta, weights), 0.05) for _ in range(reps))
    return out


def evaluate_on(params: ModelParams, sets: dict[str, list]) -> dict[str, float]:
    return {name: evaluate(params, samples).accuracy for name, samples in sets.items()}
