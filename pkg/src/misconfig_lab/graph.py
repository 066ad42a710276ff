"""Typed ISP network graphs: construction, synthetic generation, GraphML
ingestion and message-passing augmentation.

Node ids are dense integers. The generators in this module lay nodes out as
routers first, then external ASes (one per gateway), then destinations.
"""

from __future__ import annotations

import enum
import json
import os
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import (
    DanglingDst,
    DisconnectedRouters,
    EmptyGraph,
    GraphError,
    InfeasibleParams,
    ParseError,
    RoleViolation,
)


class Role(enum.IntEnum):
    ROUTER = 0
    DST = 1
    EXAS = 2


class EdgeType(enum.IntEnum):
    OSPF = 0
    EBGP = 1
    IBGP = 2
    SELF_LOOP = 3


N_EDGE_TYPES = len(EdgeType)


@dataclass(frozen=True)
class NodeRole:
    role: Role
    gateway: bool = False

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.gateway and self.role != Role.ROUTER:
            raise RoleViolation("only routers can be gateways")


ROUTER = NodeRole(Role.ROUTER)
GATEWAY = NodeRole(Role.ROUTER, gateway=True)
DST = NodeRole(Role.DST)
EXAS = NodeRole(Role.EXAS)


@dataclass(frozen=True)
class NetworkGraph:
    """Validated network graph. Build through :func:`build_graph`."""

    nodes: tuple[NodeRole, ...]
    edges: tuple[tuple[int, int, EdgeType], ...]
    dst_attachment: Mapping[int, tuple[int, ...]]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def ids_with(self, role: Role) -> list[int]:
        return [i for i, r in enumerate(self.nodes) if r.role == role]

    @property
    def routers(self) -> list[int]:
        return self.ids_with(Role.ROUTER)

    @property
    def gateways(self) -> list[int]:
        return [i for i, r in enumerate(self.nodes) if r.gateway]

    @property
    def exas(self) -> list[int]:
        return self.ids_with(Role.EXAS)

    @property
    def dsts(self) -> list[int]:
        return self.ids_with(Role.DST)

    def edges_of(self, etype: EdgeType) -> list[tuple[int, int]]:
        return [(u, v) for u, v, t in self.edges if t == etype]

    def ospf_adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {r: [] for r in self.routers}
        for u, v in self.edges_of(EdgeType.OSPF):
            adj[u].append(v)
            adj[v].append(u)
        for nbrs in adj.values():
            nbrs.sort()
        return adj

    def exas_gateways(self) -> dict[int, list[int]]:
        """External AS id -> sorted gateway routers peering with it."""
        out: dict[int, list[int]] = {m: [] for m in self.exas}
        for u, v in self.edges_of(EdgeType.EBGP):
            g, m = (u, v) if self.nodes[u].role == Role.ROUTER else (v, u)
            out[m].append(g)
        for gws in out.values():
            gws.sort()
        return out

    def exas_index(self) -> dict[int, int]:
        """Ordinal position of each external AS among the external ASes."""
        return {m: i for i, m in enumerate(self.exas)}

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": i, "role": r.role.name.lower(), "gateway": r.gateway}
                for i, r in enumerate(self.nodes)
            ],
            "edges": [
                {"src": u, "dst": v, "type": t.name.lower()} for u, v, t in self.edges
            ],
            "dst_attachment": {
                str(k): list(v) for k, v in sorted(self.dst_attachment.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "NetworkGraph":
        nodes = [
            (n["id"], NodeRole(Role[n["role"].upper()], n["gateway"]))
            for n in data["nodes"]
        ]
        edges = [(e["src"], e["dst"], EdgeType[e["type"].upper()]) for e in data["edges"]]
        attach = {int(k): v for k, v in data["dst_attachment"].items()}
        return build_graph(nodes, edges, attach)

    @classmethod
    def from_json(cls, text: str) -> "NetworkGraph":
        return cls.from_dict(json.loads(text))


def _canonical_edge(u: int, v: int, t: EdgeType, nodes: Sequence[NodeRole]):
    if t == EdgeType.EBGP:
        # gateway first
        return (u, v, t) if nodes[u].role == Role.ROUTER else (v, u, t)
    return (min(u, v), max(u, v), t)


def build_graph(
    nodes: Iterable,
    edges: Iterable[tuple[int, int, EdgeType]],
    dst_attachment: Mapping[int, Iterable[int]],
) -> NetworkGraph:
    """Validate raw parts and assemble a :class:`NetworkGraph`.

    ``nodes`` holds either ``NodeRole`` values (ids are positions) or
    ``(id, NodeRole)`` pairs. Edges are undirected and stored once in
    canonical orientation.
    """
    items = list(nodes)
    if items and isinstance(items[0], tuple):
        ids = [i for i, _ in items]
        if sorted(ids) != list(range(len(ids))):
            raise GraphError("node ids must be dense integers 0..|V|-1")
        roles: list[NodeRole] = [None] * len(items)  # type: ignore[list-item]
        for i, r in items:
            roles[i] = r
    else:
        roles = list(items)
    if not roles:
        raise EmptyGraph("graph has no nodes")
    n = len(roles)

    seen = set()
    canon = []
    for u, v, t in edges:
        t = EdgeType(t)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) references a missing node")
        if u == v or t in (EdgeType.SELF_LOOP, EdgeType.IBGP):
            raise RoleViolation(f"{t.name} edges are derived, not part of a raw graph")
        ru, rv = roles[u], roles[v]
        if t == EdgeType.OSPF:
            if ru.role != Role.ROUTER or rv.role != Role.ROUTER:
                raise RoleViolation(f"OSPF edge ({u}, {v}) must join two routers")
        elif t == EdgeType.EBGP:
            pair = {ru.role, rv.role}
            if pair != {Role.ROUTER, Role.EXAS}:
                raise RoleViolation(f"eBGP edge ({u}, {v}) must join a gateway and an external AS")
            gw = ru if ru.role == Role.ROUTER else rv
            if not gw.gateway:
                raise RoleViolation(f"eBGP edge ({u}, {v}) ends on a non-gateway router")
        e = _canonical_edge(u, v, t, roles)
        if e in seen:
            raise GraphError(f"duplicate edge {e}")
        seen.add(e)
        canon.append(e)
    canon.sort(key=lambda e: (int(e[2]), e[0], e[1]))

    attach: dict[int, tuple[int, ...]] = {}
    for k, ms in dst_attachment.items():
        if not (0 <= k < n) or roles[k].role != Role.DST:
            raise RoleViolation(f"attachment key {k} is not a destination")
        ms = tuple(sorted(set(ms)))
        for m in ms:
            if not (0 <= m < n) or roles[m].role != Role.EXAS:
                raise RoleViolation(f"destination {k} attached to non-external node {m}")
        attach[k] = ms
    for k, r in enumerate(roles):
        if r.role == Role.DST and not attach.get(k):
            raise DanglingDst(f"destination {k} has no external AS attachment")

    routers = [i for i, r in enumerate(roles) if r.role == Role.ROUTER]
    if not routers:
        raise EmptyGraph("graph has no routers")
    if not any(r.gateway for r in roles):
        raise GraphError("graph needs at least one gateway router")
    peered = {v for u, v, t in canon if t == EdgeType.EBGP}
    for i, r in enumerate(roles):
        if r.role == Role.EXAS and i not in peered:
            raise RoleViolation(f"external AS {i} has no eBGP session")

    adj: dict[int, list[int]] = {r: [] for r in routers}
    for u, v, t in canon:
        if t == EdgeType.OSPF:
            adj[u].append(v)
            adj[v].append(u)
    reached = {routers[0]}
    queue = deque([routers[0]])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in reached:
                reached.add(y)
                queue.append(y)
    if len(reached) != len(routers):
        missing = sorted(set(routers) - reached)
        raise DisconnectedRouters(f"routers {missing} unreachable over OSPF")

    return NetworkGraph(tuple(roles), tuple(canon), attach)


def _interval(x) -> tuple[int, int]:
    if isinstance(x, (int, np.integer)):
        return int(x), int(x)
    lo, hi = x
    return int(lo), int(hi)


@dataclass(frozen=True)
class TopologyParams:
    router_range: tuple[int, int] = (16, 23)
    dst_range: tuple[int, int] = (4, 7)
    gateway_count: int | tuple[int, int] = 3
    query_counts: tuple[tuple[int, int], ...] = ((8, 12), (4, 7), (10, 30))
    seed: int = 0
    avg_degree: float = 3.0

    def __post_init__(self):
        for name in ("router_range", "dst_range"):
            lo, hi = _interval(getattr(self, name))
            if lo < 1 or hi < lo:
                raise InfeasibleParams(f"{name} must be an interval with lower bound >= 1")
        glo, ghi = _interval(self.gateway_count)
        if glo < 1 or ghi < glo:
            raise InfeasibleParams("gateway_count must be >= 1")
        for q in self.query_counts:
            lo, hi = _interval(q)
            if lo < 1 or hi < lo:
                raise InfeasibleParams("query count intervals need lower bound >= 1")
        if ghi > _interval(self.router_range)[0]:
            raise InfeasibleParams("gateway_count exceeds router count")

    def with_seed(self, seed: int) -> "TopologyParams":
        return TopologyParams(
            self.router_range, self.dst_range, self.gateway_count,
            self.query_counts, seed, self.avg_degree,
        )


PRESETS: dict[str, TopologyParams] = {
    "baseline": TopologyParams((16, 23), (4, 7), 3, ((8, 12), (4, 7), (10, 30))),
    "larger-scale": TopologyParams((24, 31), (10, 15), (7, 9), ((25, 35), (15, 20), (10, 30))),
    # router_range is ignored for Zoo ingestion; the file decides it
    "real-world": TopologyParams((16, 40), (4, 7), 3, ((8, 12), (4, 7), (10, 30))),
}


def _random_connected(n: int, avg_degree: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    order = rng.permutation(n)
    edges = set()
    for pos in range(1, n):
        parent = order[rng.integers(0, pos)]
        u, v = int(order[pos]), int(parent)
        edges.add((min(u, v), max(u, v)))
    target = min(int(round(avg_degree * n / 2)), n * (n - 1) // 2)
    while len(edges) < target:
        u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
        edges.add((min(u, v), max(u, v)))
    return sorted(edges)


def _attach_external(
    n_routers: int,
    ospf_edges: list[tuple[int, int]],
    params: TopologyParams,
    rng: np.random.Generator,
) -> NetworkGraph:
    glo, ghi = _interval(params.gateway_count)
    n_gw = int(rng.integers(glo, ghi + 1))
    if n_gw > n_routers:
        raise InfeasibleParams(f"{n_gw} gateways requested for {n_routers} routers")
    dlo, dhi = _interval(params.dst_range)
    n_dst = int(rng.integers(dlo, dhi + 1))
    gateways = sorted(int(g) for g in rng.choice(n_routers, size=n_gw, replace=False))

    roles = [GATEWAY if i in gateways else ROUTER for i in range(n_routers)]
    exas_ids = list(range(n_routers, n_routers + n_gw))
    roles += [EXAS] * n_gw
    dst_ids = list(range(n_routers + n_gw, n_routers + n_gw + n_dst))
    roles += [DST] * n_dst

    edges = [(u, v, EdgeType.OSPF) for u, v in ospf_edges]
    edges += [(g, m, EdgeType.EBGP) for g, m in zip(gateways, exas_ids)]
    attach = {}
    for k in dst_ids:
        count = int(rng.integers(1, min(3, n_gw) + 1))
        chosen = rng.choice(n_gw, size=count, replace=False)
        attach[k] = sorted(exas_ids[int(c)] for c in chosen)
    return build_graph(roles, edges, attach)


def generate_synthetic(params: TopologyParams, rng: np.random.Generator | None = None) -> NetworkGraph:
    """Random ISP-like topology drawn from ``params``.

    The router layer is a random spanning tree plus random chords until the
    average degree reaches ``params.avg_degree``.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    lo, hi = _interval(params.router_range)
    if _interval(params.gateway_count)[1] > lo:
        raise InfeasibleParams("gateway_count exceeds router count")
    n_routers = int(rng.integers(lo, hi + 1))
    ospf = _random_connected(n_routers, params.avg_degree, rng)
    return _attach_external(n_routers, ospf, params, rng)


def load_graphml(
    text: str | bytes,
    attach_params: TopologyParams,
    rng: np.random.Generator | None = None,
) -> NetworkGraph:
    """Ingest a Topology Zoo style GraphML document.

    GraphML nodes become routers and GraphML edges become OSPF links; only
    the largest connected component is kept. Gateways, external ASes and
    destinations are synthesized from ``attach_params``.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        g = nx.parse_graphml(text)
    except Exception as exc:  # networkx raises a zoo of XML/KeyError types
        raise ParseError(f"malformed GraphML: {exc}") from exc
    g = nx.Graph(g.to_undirected()) if g.is_directed() or g.is_multigraph() else g
    g.remove_edges_from(list(nx.selfloop_edges(g)))
    if g.number_of_nodes() == 0:
        raise EmptyGraph("GraphML document has no nodes")
    order = {node: pos for pos, node in enumerate(g.nodes)}
    # largest component; ties go to the component seen first in the file
    comp = max(
        nx.connected_components(g),
        key=lambda c: (len(c), -min(order[x] for x in c)),
    )
    kept = sorted(comp, key=order.__getitem__)
    relabel = {node: i for i, node in enumerate(kept)}
    ospf = sorted(
        {
            (min(relabel[u], relabel[v]), max(relabel[u], relabel[v]))
            for u, v in g.subgraph(comp).edges
        }
    )
    if rng is None:
        rng = np.random.default_rng(attach_params.seed)
    return _attach_external(len(kept), ospf, attach_params, rng)


ZOO_ENV = "MISCONFIG_LAB_ZOO_DIR"


def zoo_documents(directory=None) -> list[str]:
    """GraphML texts of the Zoo topologies, sorted by file name.

    Looks in ``directory``, then in ``$MISCONFIG_LAB_ZOO_DIR``, then in the
    copies bundled with the package.
    """
    directory = directory or os.environ.get(ZOO_ENV)
    if directory:
        files = sorted(Path(directory).glob("*.graphml"))
        if not files:
            raise FileNotFoundError(f"no .graphml files in {directory}")
        return [f.read_text(encoding="utf-8") for f in files]
    bundled = resources.files("misconfig_lab.data").joinpath("zoo")
    files = sorted((f for f in bundled.iterdir() if f.name.endswith(".graphml")), key=lambda f: f.name)
    return [f.read_text(encoding="utf-8") for f in files]


@dataclass(frozen=True)
class AugmentedGraph:
    """Message-passing view of a graph: reversed duplicates, iBGP mesh and
    one self-loop per node, sorted by (type, src, dst)."""

    base: NetworkGraph
    mp_edges: tuple[tuple[int, int, EdgeType], ...]
    src: np.ndarray = field(repr=False, compare=False)
    dst: np.ndarray = field(repr=False, compare=False)
    etype: np.ndarray = field(repr=False, compare=False)


def augment(graph: NetworkGraph) -> AugmentedGraph:
    edges = set()
    for u, v, t in graph.edges:
        edges.add((int(t), u, v))
        edges.add((int(t), v, u))
    routers = graph.routers
    for u in routers:
        for v in routers:
            if u != v:
                edges.add((int(EdgeType.IBGP), u, v))
    for v in range(graph.n_nodes):
        edges.add((int(EdgeType.SELF_LOOP), v, v))
    ordered = sorted(edges)
    mp = tuple((u, v, EdgeType(t)) for t, u, v in ordered)
    arr = np.array([(u, v, t) for t, u, v in ordered], dtype=np.int64).reshape(-1, 3)
    return AugmentedGraph(graph, mp, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())


def expected_mp_edge_count(graph: NetworkGraph) -> int:
    n_r = len(graph.routers)
    return (
        2 * len(graph.edges_of(EdgeType.OSPF))
        + 2 * len(graph.edges_of(EdgeType.EBGP))
        + n_r * (n_r - 1)
        + graph.n_nodes
    )
