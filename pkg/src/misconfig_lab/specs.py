"""Forwarding / reachability / isolation specifications.

A link "carries traffic to k" when some source router's path towards k
crosses it in either direction.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientCandidates, LengthMismatch, UnknownPair
from .graph import EdgeType, NetworkGraph

log = logging.getLogger(__name__)


class SpecKind(enum.IntEnum):
    FWD = 0
    REACH = 1
    ISO = 2


KIND_NAMES = ("fwd", "reach", "iso")


@dataclass(frozen=True)
class Specification:
    """``ids`` is (i, k, j) for fwd/reach and (i, j, k, m) for iso."""

    kind: SpecKind
    ids: tuple[int, ...]
    expected: bool = True


@dataclass(frozen=True)
class SpecificationSet:
    specs: tuple[Specification, ...]

    def __post_init__(self):
        seen = set()
        for s in self.specs:
            key = (s.kind, s.ids)
            if key in seen:
                raise ValueError(f"duplicate specification {key}")
            seen.add(key)

    @property
    def counts(self) -> tuple[int, int, int]:
        c = [0, 0, 0]
        for s in self.specs:
            c[s.kind] += 1
        return tuple(c)

    def __len__(self):
        return len(self.specs)

    def to_dict(self) -> dict:
        out = {name: [] for name in KIND_NAMES}
        for s in self.specs:
            out[KIND_NAMES[s.kind]].append(list(s.ids))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SpecificationSet":
        specs = [
            Specification(SpecKind(kind), tuple(int(x) for x in ids))
            for kind, name in enumerate(KIND_NAMES)
            for ids in data.get(name, [])
        ]
        return cls(tuple(specs))

    @classmethod
    def from_json(cls, text: str) -> "SpecificationSet":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ObservedSpecs:
    values: tuple[bool, ...]

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class DeltaS:
    violated: frozenset[int]
    by_kind: tuple[frozenset[int], frozenset[int], frozenset[int]]

    def __len__(self):
        return len(self.violated)

    @property
    def kind_counts(self) -> tuple[int, int, int]:
        return tuple(len(s) for s in self.by_kind)


def link_usage(fwd_state) -> dict[int, set[tuple[int, int]]]:
    """Destination -> undirected router links crossed by any path to it."""
    usage: dict[int, set[tuple[int, int]]] = {}
    for (_, k), p in fwd_state.path.items():
        links = usage.setdefault(k, set())
        for a, b in zip(p, p[1:]):
            links.add((min(a, b), max(a, b)))
    return usage


def _eval(spec: Specification, fwd_state, usage) -> bool:
    if spec.kind == SpecKind.ISO:
        i, j, k, m = spec.ids
        link = (min(i, j), max(i, j))
        if k not in usage or m not in usage:
            raise UnknownPair((k, m))
        return not (link in usage[k] and link in usage[m])
    i, k, j = spec.ids
    if (i, k) not in fwd_state.path:
        raise UnknownPair((i, k))
    if spec.kind == SpecKind.FWD:
        return fwd_state.next_hop[(i, k)] == j
    return j in fwd_state.path[(i, k)]


def eval_spec(spec: Specification, fwd_state) -> bool:
    usage = link_usage(fwd_state) if spec.kind == SpecKind.ISO else None
    return _eval(spec, fwd_state, usage)


def evaluate_all(spec_set: SpecificationSet, fwd_state) -> ObservedSpecs:
    usage = link_usage(fwd_state)
    return ObservedSpecs(tuple(_eval(s, fwd_state, usage) for s in spec_set.specs))


def _draw_count(c, rng) -> int:
    if isinstance(c, (int, np.integer)):
        return int(c)
    lo, hi = c
    return int(rng.integers(lo, hi + 1))


def _take(cands: list, n: int, rng, kind: str, strict: bool) -> list:
    if n > len(cands):
        msg = f"only {len(cands)} {kind} candidates for {n} requested queries"
        if strict:
            raise InsufficientCandidates(msg)
        log.warning("%s; clamping", msg)
        n = len(cands)
    idx = rng.choice(len(cands), size=n, replace=False) if n else []
    return [cands[int(i)] for i in sorted(idx)]


def generate_queries(
    graph: NetworkGraph,
    true_config,
    counts: Sequence,
    seed: int | np.random.Generator = 0,
    strict: bool = False,
    fwd_state=None,
) -> SpecificationSet:
    """Sample specifications that hold under ``true_config``.

    ``counts`` is a (fwd, reach, iso) triple of ints or inclusive intervals.
    Short candidate pools are clamped with a warning unless ``strict``.
    """
    from .protocol import compute_forwarding

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_fwd, n_reach, n_iso = (_draw_count(c, rng) for c in counts)
    if fwd_state is None:
        fwd_state = compute_forwarding(graph, true_config)
    keys = sorted(fwd_state.path)

    fwd_c = [
        (i, k, fwd_state.path[(i, k)][1]) for i, k in keys if len(fwd_state.path[(i, k)]) > 1
    ]
    reach_c = [(i, k, j) for i, k in keys for j in fwd_state.path[(i, k)][1:]]
    reach_c = sorted(set(reach_c))

    usage = link_usage(fwd_state)
    dsts = graph.dsts
    links = graph.edges_of(EdgeType.OSPF)
    active, vacuous = [], []
    for i, j in links:
        for a in range(len(dsts)):
            for b in range(a + 1, len(dsts)):
                k, m = dsts[a], dsts[b]
                on_k, on_m = (i, j) in usage[k], (i, j) in usage[m]
                if on_k and on_m:
                    continue
                (active if on_k or on_m else vacuous).append((i, j, k, m))

    specs = [Specification(SpecKind.FWD, c) for c in _take(fwd_c, n_fwd, rng, "fwd", strict)]
    specs += [Specification(SpecKind.REACH, c) for c in _take(reach_c, n_reach, rng, "reach", strict)]
    if n_iso <= len(active):
        iso = _take(active, n_iso, rng, "iso", strict)
    else:
        iso = active + _take(vacuous, n_iso - len(active), rng, "iso", strict)
    specs += [Specification(SpecKind.ISO, c) for c in iso]
    return SpecificationSet(tuple(specs))


def _check_aligned(spec_set: SpecificationSet, observed: ObservedSpecs):
    if len(spec_set.specs) != len(observed.values):
        raise LengthMismatch(f"{len(spec_set.specs)} specs vs {len(observed.values)} observations")


def f_check(spec_set: SpecificationSet, observed: ObservedSpecs) -> int:
    _check_aligned(spec_set, observed)
    return int(any(s.expected != bool(o) for s, o in zip(spec_set.specs, observed.values)))


def diff_specs(spec_set: SpecificationSet, observed: ObservedSpecs) -> DeltaS:
    _check_aligned(spec_set, observed)
    parts: list[set[int]] = [set(), set(), set()]
    for idx, (s, o) in enumerate(zip(spec_set.specs, observed.values)):
        if s.expected != bool(o):
            parts[s.kind].add(idx)
    frozen = tuple(frozenset(p) for p in parts)
    return DeltaS(frozenset().union(*frozen), frozen)
