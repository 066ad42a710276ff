"""Diagnosis scenarios: a network, its intended configuration, the intended
specifications, and an optional template fault to apply before checking."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .faults import FaultClass, draw_delta, inject_config_fault, sample_true_config
from .graph import PRESETS, NetworkGraph, generate_synthetic, load_graphml
from .protocol import Configuration, prot
from .rules import WeightTable, rb_classify
from .specs import KIND_NAMES, SpecificationSet, diff_specs, f_check, generate_queries

SCENARIO_FORMAT = "misconfig-lab/scenario"


@dataclass
class Scenario:
    graph: NetworkGraph
    config: Configuration  # intended configuration
    specs: SpecificationSet  # hold under ``config``
    fault: FaultClass = FaultClass.F0
    delta: int = 0

    def running_config(self) -> Configuration:
        if self.fault == FaultClass.F0:
            return self.config
        return inject_config_fault(self.config, self.fault, delta=self.delta)

    def to_dict(self) -> dict:
        return {
            "format": SCENARIO_FORMAT,
            "version": 1,
            "graph": self.graph.to_dict(),
            "config": self.config.to_dict(),
            "specs": self.specs.to_dict(),
            "fault": f"f{int(self.fault)}",
            "delta": int(self.delta),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if data.get("format") != SCENARIO_FORMAT:
            raise ValueError("not a scenario document")
        fault = str(data.get("fault", "f0")).lower()
        if fault in ("none", ""):
            fault = "f0"
        return cls(
            NetworkGraph.from_dict(data["graph"]),
            Configuration.from_dict(data["config"]),
            SpecificationSet.from_dict(data["specs"]),
            FaultClass(int(fault.lstrip("f"))),
            int(data.get("delta", 0)),
        )

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), sort_keys=True))
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def make_scenario(preset: str = "baseline", seed: int = 0, fault=FaultClass.F0,
                  delta: int | None = None, zoo: list[str] | None = None) -> Scenario:
    params = PRESETS[preset]
    rng = np.random.default_rng([seed, 0x5C])
    if zoo:
        graph = load_graphml(zoo[int(rng.integers(len(zoo)))], params, rng)
    else:
        graph = generate_synthetic(params, rng)
    config = sample_true_config(graph, rng)
    specs = generate_queries(graph, config, params.query_counts, rng)
    fault = FaultClass(fault)
    if fault != FaultClass.F0 and delta is None:
        delta = draw_delta(rng)
    return Scenario(graph, config, specs, fault, int(delta or 0))


def diagnose(scenario: Scenario, weights: WeightTable | None = None) -> dict:
    """Check the specifications under the running configuration and, when
    any is violated, run rule-based diagnosis on the violations."""
    observed = prot(scenario.graph, scenario.running_config(), scenario.specs)
    flag = f_check(scenario.specs, observed)
    out = {"f_check": flag, "n_specs": len(scenario.specs),
           "spec_counts": dict(zip(KIND_NAMES, scenario.specs.counts))}
    if not flag:
        out["message"] = "no misconfiguration"
        return out
    delta = diff_specs(scenario.specs, observed)
    out["violations"] = dict(zip(KIND_NAMES, delta.kind_counts), total=len(delta))
    out["verdict"] = rb_classify(delta, weights).to_dict()
    return out
