"""Template-wide misconfiguration injection and labeled dataset construction."""

from __future__ import annotations

import enum
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import BadDelta, InfeasibleParams
from .graph import (
    AugmentedGraph,
    EdgeType,
    NetworkGraph,
    Role,
    TopologyParams,
    augment,
    generate_synthetic,
    load_graphml,
)
from .protocol import EXAS_INDEX, Configuration, prot
from .specs import f_check, generate_queries


class FaultClass(enum.IntEnum):
    F0 = 0  # misconfiguration-free
    F1 = 1  # OSPF link weight template
    F2 = 2  # local_pref
    F3 = 3  # med
    F4 = 4  # origin
    F5 = 5  # as_path_len
    F6 = 6  # cisco_weight
    F7 = 7  # exas_index

    @property
    def column(self) -> int:
        """Feature column touched by this fault."""
        if self == FaultClass.F0:
            raise ValueError("f0 touches no column")
        return 2 + int(self)


FAULTS = tuple(FaultClass(i) for i in range(1, 8))
N_CLASSES = len(FAULTS)
N_FEATURES = 10
DELTA_RANGE = (1, 4)

# inclusive integer ranges for the first five BGP attributes; exas_index is
# not drawn (see exas_ranks)
BGP_RANGES = ((50, 150), (0, 20), (0, 2), (1, 6), (0, 10))


def class_index(f) -> int:
    """0-based classifier output index of a fault (f1 -> 0)."""
    return int(f) - 1


def exas_ranks(graph: NetworkGraph) -> dict[tuple[int, int], int]:
    """Index of each external AS among those advertising a destination.

    Keyed by ``(m, k)``. Numbering per destination keeps the values in
    ``0..|attach(k)|-1`` whatever the size of the network, and still gives
    every candidate set for ``k`` a strict order.
    """
    return {(m, k): i for k, ms in graph.dst_attachment.items() for i, m in enumerate(sorted(ms))}


def sample_true_config(graph: NetworkGraph, seed=0, phi_max: int = 32) -> Configuration:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights = {}
    for u, v in graph.edges_of(EdgeType.OSPF):
        w = int(rng.integers(1, phi_max + 1))
        weights[(u, v)] = w
        weights[(v, u)] = w
    rank = exas_ranks(graph)
    attrs = {}
    for k in graph.dsts:
        for m in graph.dst_attachment[k]:
            vals = [int(rng.integers(lo, hi + 1)) for lo, hi in BGP_RANGES]
            attrs[(m, k)] = tuple(vals) + (rank[(m, k)],)
    return Configuration(weights, attrs, phi_max)


def draw_delta(rng: np.random.Generator) -> int:
    return int(rng.integers(DELTA_RANGE[0], DELTA_RANGE[1] + 1))


def inject_config_fault(config: Configuration, fault, seed=0, delta: int | None = None) -> Configuration:
    """Shift every instantiation of one template by the same offset.

    OSPF weights are clamped to ``[1, phi_max]``. ``delta`` defaults to a
    uniform draw from [1, 4].
    """
    fault = FaultClass(fault)
    if fault == FaultClass.F0:
        raise ValueError("f0 is not an injectable fault")
    if delta is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        delta = draw_delta(rng)
    if fault == FaultClass.F1:
        weights = {
            e: min(max(w + delta, 1), config.phi_max) for e, w in config.ospf_weights.items()
        }
        return replace(config, ospf_weights=weights)
    n = int(fault) - 2
    attrs = {}
    for key, a in config.bgp_attrs.items():
        a = list(a)
        a[n] += delta
        attrs[key] = tuple(a)
    return replace(config, bgp_attrs=attrs)


@dataclass
class GraphSample:
    features: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    etype: np.ndarray
    label: FaultClass
    meta: dict = field(default_factory=dict)
    graph: NetworkGraph | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    def to_dict(self) -> dict:
        return {
            "label": int(self.label),
            "meta": self.meta,
            "features": self.features.tolist(),
            "edges": np.stack([self.src, self.dst, self.etype], axis=1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GraphSample":
        edges = np.asarray(data["edges"], dtype=np.int64).reshape(-1, 3)
        return cls(
            np.asarray(data["features"], dtype=np.float64),
            edges[:, 0].copy(),
            edges[:, 1].copy(),
            edges[:, 2].copy(),
            FaultClass(data["label"]),
            dict(data.get("meta", {})),
        )


def node_features(graph: NetworkGraph, config: Configuration) -> np.ndarray:
    n = graph.n_nodes
    x = np.zeros((n, N_FEATURES))
    for i, r in enumerate(graph.nodes):
        x[i, int(r.role)] = 1.0

    incident: dict[int, list[int]] = {}
    for (u, _), w in config.ospf_weights.items():
        incident.setdefault(u, []).append(w)
    for r in graph.routers:
        if r in incident:
            x[r, 3] = float(np.mean(incident[r]))

    if config.bgp_attrs:
        all_attrs = np.array(list(config.bgp_attrs.values()), dtype=np.float64)
        global_mean = all_attrs.mean(axis=0)
        x[:, 4:] = global_mean
        per_exas: dict[int, list] = {}
        for (m, _), a in config.bgp_attrs.items():
            per_exas.setdefault(m, []).append(a)
        for m, rows in per_exas.items():
            x[m, 4:] = np.mean(np.array(rows, dtype=np.float64), axis=0)
    return x


def build_sample(
    graph: NetworkGraph,
    config: Configuration,
    label=FaultClass.F0,
    meta: dict | None = None,
    aug: AugmentedGraph | None = None,
) -> GraphSample:
    """Feature matrix plus augmented edge list for one (graph, config).

    Columns: 0-2 one-hot role (router, dst, exas); 3 mean incident OSPF
    weight (routers only); 4-9 BGP attributes, per-exas means on external
    AS nodes and the template-wide mean everywhere else.
    """
    if aug is None:
        aug = augment(graph)
    return GraphSample(
        node_features(graph, config),
        aug.src,
        aug.dst,
        aug.etype,
        FaultClass(label),
        dict(meta or {}),
        graph,
    )


def perturb_features(sample: GraphSample, fault, delta: int) -> GraphSample:
    """Feature-level injection: add ``delta`` to the fault's column on every node."""
    fault = FaultClass(fault)
    if fault == FaultClass.F0:
        raise ValueError("f0 is not an injectable fault")
    if not (DELTA_RANGE[0] <= int(delta) <= DELTA_RANGE[1]) or int(delta) != delta:
        raise BadDelta(f"delta must be an integer in {DELTA_RANGE}, got {delta}")
    x = sample.features.copy()
    x[:, fault.column] += delta
    meta = dict(sample.meta, delta=int(delta))
    return replace(sample, features=x, label=fault, meta=meta)


def stratified_labels(n: int, rng: np.random.Generator) -> list[FaultClass]:
    perm = rng.permutation(N_CLASSES)
    return [FAULTS[int(perm[i % N_CLASSES])] for i in range(n)]


@dataclass
class Dataset:
    samples: list[GraphSample]
    header: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def class_histogram(self) -> dict[int, int]:
        hist = {int(f): 0 for f in FAULTS}
        for s in self.samples:
            hist[int(s.label)] = hist.get(int(s.label), 0) + 1
        return hist

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(s.label) for s in self.samples])

    def to_jsonl(self) -> str:
        head = dict(self.header, n_samples=len(self.samples),
                    class_histogram={str(k): v for k, v in self.class_histogram.items()})
        buf = io.StringIO()
        buf.write(json.dumps({"index": head}, sort_keys=True) + "\n")
        for s in self.samples:
            buf.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")
        return buf.getvalue()

    def save(self, path) -> str:
        """Atomically write the dataset as JSON Lines; returns its sha256."""
        text = self.to_jsonl()
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        tmp.replace(path)
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path) as fh:
            header = json.loads(fh.readline())["index"]
            samples = [GraphSample.from_dict(json.loads(line)) for line in fh if line.strip()]
        return cls(samples, header)


def _topology(params: TopologyParams, rng, zoo: Sequence[str] | None):
    if zoo:
        pick = int(rng.integers(0, len(zoo)))
        return load_graphml(zoo[pick], params, rng), pick
    return generate_synthetic(params, rng), None


def generate_sample(
    topo_params: TopologyParams,
    index: int,
    label,
    seed: int,
    level: str = "feature",
    zoo: Sequence[str] | None = None,
) -> GraphSample:
    """One labeled sample; randomness derives from ``(seed, index)`` only."""
    rng = np.random.default_rng([seed, index])
    graph, zoo_pick = _topology(topo_params, rng, zoo)
    config = sample_true_config(graph, rng)
    label = FaultClass(label)
    meta = {"graph_id": index, "seed": seed}
    if zoo_pick is not None:
        meta["zoo_index"] = zoo_pick
    if label == FaultClass.F0:
        return build_sample(graph, config, label, dict(meta, delta=0))
    delta = draw_delta(rng)
    if level == "feature":
        clean = build_sample(graph, config, FaultClass.F0, meta)
        return perturb_features(clean, label, delta)
    if level != "config":
        raise ValueError(f"unknown injection level {level!r}")
    queries = generate_queries(graph, config, topo_params.query_counts, rng)
    faulty = inject_config_fault(config, label, delta=delta)
    observed = prot(graph, faulty, queries)
    meta.update(delta=delta, f_check=f_check(queries, observed), n_specs=len(queries))
    return build_sample(graph, faulty, label, meta)


def make_dataset(
    topo_params: TopologyParams,
    n_samples: int,
    mode: str = "pregenerated",
    seed: int = 0,
    level: str = "feature",
    zoo: Sequence[str] | None = None,
) -> Dataset | Iterator[GraphSample]:
    """Balanced 7-class dataset over fresh topologies.

    ``mode="on_the_fly"`` returns a lazy iterator instead of a materialized
    :class:`Dataset`. ``level`` selects feature-column injection (fast) or
    configuration injection followed by the specification check.
    """
    if n_samples < 1:
        raise InfeasibleParams("n_samples must be positive")
    if mode not in ("pregenerated", "on_the_fly"):
        raise ValueError(f"unknown mode {mode!r}")
    labels = stratified_labels(n_samples, np.random.default_rng([seed, 2**31]))

    def stream():
        for i, f in enumerate(labels):
            yield generate_sample(topo_params, i, f, seed, level, zoo)

    if mode == "on_the_fly":
        return stream()
    header = {
        "format": "misconfig-lab/dataset",
        "version": 1,
        "seed": seed,
        "level": level,
        "topo_params": {
            "router_range": list(topo_params.router_range),
            "dst_range": list(topo_params.dst_range),
            "gateway_count": topo_params.gateway_count
            if isinstance(topo_params.gateway_count, int)
            else list(topo_params.gateway_count),
            "query_counts": [list(q) for q in topo_params.query_counts],
        },
    }
    return Dataset(list(stream()), header)
