"""Fixed-point OSPF/BGP control plane.

BGP preference order, first criterion first:

====  ==================  ===============
step  attribute           better is
====  ==================  ===============
1     cisco_weight        higher
2     local_pref          higher
3     as_path_len         lower
4     origin              lower
5     med                 lower
6     IGP cost to gateway lower (hot potato)
7     exas_index          lower
====  ==================  ===============
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import MissingWeight, NoRoute, UnreachableDst
from .graph import NetworkGraph

BGP_ATTRS = ("local_pref", "med", "origin", "as_path_len", "cisco_weight", "exas_index")
LOCAL_PREF, MED, ORIGIN, AS_PATH_LEN, CISCO_WEIGHT, EXAS_INDEX = range(6)
PHI_MAX = 32


@dataclass(frozen=True)
class Configuration:
    ospf_weights: Mapping[tuple[int, int], int]
    bgp_attrs: Mapping[tuple[int, int], tuple[int, ...]]
    phi_max: int = PHI_MAX

    def to_dict(self) -> dict:
        return {
            "ospf_weights": [[i, j, w] for (i, j), w in sorted(self.ospf_weights.items())],
            "bgp_attrs": [[m, k, list(a)] for (m, k), a in sorted(self.bgp_attrs.items())],
            "phi_max": self.phi_max,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Configuration":
        return cls(
            {(int(i), int(j)): int(w) for i, j, w in data["ospf_weights"]},
            {(int(m), int(k)): tuple(int(x) for x in a) for m, k, a in data["bgp_attrs"]},
            int(data.get("phi_max", PHI_MAX)),
        )

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class IgpCostTable:
    cost: Mapping[tuple[int, int], int]
    next_hop: Mapping[tuple[int, int], int]

    def path(self, i: int, j: int) -> list[int]:
        out = [i]
        while out[-1] != j:
            out.append(self.next_hop[(out[-1], j)])
        return out


@dataclass(frozen=True)
class ForwardingState:
    egress: Mapping[tuple[int, int], tuple[int, int]]
    next_hop: Mapping[tuple[int, int], int]
    path: Mapping[tuple[int, int], tuple[int, ...]]


def _dijkstra(src: int, adj: Mapping[int, list[int]], weights) -> dict[int, int]:
    dist = {src: 0}
    heap = [(0, src)]
    done = set()
    while heap:
        d, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        for y in adj[x]:
            nd = d + weights[(x, y)]
            if nd < dist.get(y, nd + 1):
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return dist


def ospf_shortest_paths(graph: NetworkGraph, config: Configuration) -> IgpCostTable:
    """All-pairs shortest paths over the OSPF weights.

    Equal-cost ties resolve to the smallest next-hop id.
    """
    adj = graph.ospf_adjacency()
    for u, nbrs in adj.items():
        for v in nbrs:
            if (u, v) not in config.ospf_weights:
                raise MissingWeight((u, v))
    w = config.ospf_weights
    dist = {i: _dijkstra(i, adj, w) for i in adj}
    cost = {}
    nh = {}
    for i in adj:
        for j, d in dist[i].items():
            cost[(i, j)] = d
            if i != j:
                # neighbors are sorted, so the first match is the smallest id
                nh[(i, j)] = next(n for n in adj[i] if w[(i, n)] + dist[n][j] == d)
    return IgpCostTable(cost, nh)


def _preference_key(cand, igp_cost: int):
    m, g, a = cand
    return (
        -a[CISCO_WEIGHT],
        -a[LOCAL_PREF],
        a[AS_PATH_LEN],
        a[ORIGIN],
        a[MED],
        igp_cost,
        a[EXAS_INDEX],
        m,
        g,
    )


def bgp_select(
    candidates: Sequence[tuple[int, int, Sequence[int]]],
    igp_cost_from: int,
    igp: IgpCostTable,
) -> tuple[int, int]:
    """Best ``(exas, gateway)`` among ``(exas, gateway, attrs)`` candidates."""
    if not candidates:
        raise NoRoute("no candidate routes")
    best = None
    best_key = None
    for cand in candidates:
        key = _preference_key(cand, igp.cost[(igp_cost_from, cand[1])])
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best[0], best[1]


def compute_forwarding(
    graph: NetworkGraph, config: Configuration, igp: IgpCostTable | None = None
) -> ForwardingState:
    if igp is None:
        igp = ospf_shortest_paths(graph, config)
    peers = graph.exas_gateways()
    egress = {}
    next_hop = {}
    path = {}
    for k in graph.dsts:
        cands = [
            (m, g, config.bgp_attrs[(m, k)])
            for m in graph.dst_attachment[k]
            if (m, k) in config.bgp_attrs
            for g in peers[m]
        ]
        if not cands:
            raise UnreachableDst(f"no external AS advertises destination {k}")
        for i in graph.routers:
            m, g = bgp_select(cands, i, igp)
            p = tuple(igp.path(i, g))
            egress[(i, k)] = (g, m)
            path[(i, k)] = p
            next_hop[(i, k)] = p[1] if len(p) > 1 else m
    return ForwardingState(egress, next_hop, path)


def prot(graph: NetworkGraph, config: Configuration, queries):
    """Observed truth value of every query under ``config``."""
    from .specs import ObservedSpecs, evaluate_all

    if not queries.specs:
        return ObservedSpecs(())
    return evaluate_all(queries, compute_forwarding(graph, config))
