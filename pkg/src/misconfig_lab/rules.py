"""Rule-based diagnosis: weighted matching of violation kinds to fault classes.

Each fault class ``f`` carries one weight per specification kind. Given the
violated set split by kind, the score of ``f`` is the violation-weighted
average of its weights, and the verdict is the highest-scoring class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import EmptyDelta
from .faults import FAULTS, FaultClass
from .specs import KIND_NAMES

# (fwd, reach, iso) per class. OSPF faults mostly move next hops; BGP
# template faults mostly move egress choices and hence waypoints. The BGP
# rows share a base of (0.4, 0.8, 0.3) with a small fixed jitter so that
# their verdicts are not all identical.
DEFAULT_WEIGHTS = {
    FaultClass.F1: (0.90, 0.50, 0.40),
    FaultClass.F2: (0.40, 0.80, 0.30),
    FaultClass.F3: (0.45, 0.75, 0.30),
    FaultClass.F4: (0.35, 0.80, 0.35),
    FaultClass.F5: (0.40, 0.85, 0.25),
    FaultClass.F6: (0.45, 0.80, 0.25),
    FaultClass.F7: (0.35, 0.75, 0.35),
}


@dataclass(frozen=True)
class WeightTable:
    """Symptom weights ``w[f][kind]`` in [0, 1] for every fault and kind."""

    w: Mapping[FaultClass, tuple[float, float, float]]

    def __post_init__(self):
        table = {}
        for f in FAULTS:
            if f not in self.w:
                raise ValueError(f"weight row for {f.name.lower()} missing")
            row = tuple(float(x) for x in self.w[f])
            if len(row) != len(KIND_NAMES):
                raise ValueError(f"row for {f.name.lower()} needs {len(KIND_NAMES)} entries")
            if not all(0.0 <= x <= 1.0 for x in row):
                raise ValueError(f"weights for {f.name.lower()} must lie in [0, 1]")
            table[f] = row
        extra = set(self.w) - set(FAULTS)
        if extra:
            raise ValueError(f"unexpected classes {sorted(int(f) for f in extra)}")
        object.__setattr__(self, "w", table)

    def as_array(self) -> np.ndarray:
        """Weights as a (7, 3) array, rows in class order."""
        return np.array([self.w[f] for f in FAULTS])

    def scaled(self, c: float) -> "WeightTable":
        return WeightTable({f: tuple(c * x for x in row) for f, row in self.w.items()})

    def to_dict(self) -> dict:
        return {
            f"f{int(f)}": {k: v for k, v in zip(KIND_NAMES, row)} for f, row in self.w.items()
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "WeightTable":
        w = {}
        for key, row in data.items():
            if not (isinstance(key, str) and key.startswith("f") and key[1:].isdigit()):
                raise ValueError(f"bad class key {key!r}")
            f = FaultClass(int(key[1:]))
            missing = [k for k in KIND_NAMES if k not in row]
            if missing:
                raise ValueError(f"{key} lacks weights for {missing}")
            w[f] = tuple(row[k] for k in KIND_NAMES)
        return cls(w)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def load(cls, path) -> "WeightTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_weight_table() -> WeightTable:
    return WeightTable(dict(DEFAULT_WEIGHTS))


@dataclass(frozen=True)
class RbVerdict:
    f_hat: FaultClass
    scores: dict[FaultClass, float]
    tie: bool

    def to_dict(self) -> dict:
        return {
            "f_hat": f"f{int(self.f_hat)}",
            "scores": {f"f{int(f)}": s for f, s in self.scores.items()},
            "tie": self.tie,
        }


def _kind_counts(delta) -> tuple[int, ...]:
    if hasattr(delta, "by_kind"):
        # one pass over the violations, as in the matching loop
        kind_of = {i: k for k, ids in enumerate(delta.by_kind) for i in ids}
        kinds = np.fromiter((kind_of[i] for i in delta.violated), dtype=np.int64,
                            count=len(delta.violated))
        return tuple(int(c) for c in np.bincount(kinds, minlength=len(KIND_NAMES)))
    counts = tuple(int(c) for c in delta)
    if len(counts) != len(KIND_NAMES) or min(counts) < 0:
        raise ValueError(f"expected {len(KIND_NAMES)} non-negative kind counts")
    return counts


def rb_classify(delta, weights: WeightTable | None = None) -> RbVerdict:
    """Score every fault class against the violated specifications.

    ``delta`` is a :class:`~misconfig_lab.specs.DeltaS` or a
    ``(fwd, reach, iso)`` count triple. Ties keep the smallest class index
    and set ``tie``.
    """
    weights = weights or default_weight_table()
    counts = _kind_counts(delta)
    total = sum(counts)
    if total == 0:
        raise EmptyDelta("no violated specifications to diagnose")
    frac = np.asarray(counts, dtype=float) / total
    raw = weights.as_array() @ frac
    scores = {f: float(s) for f, s in zip(FAULTS, raw)}
    best = int(np.argmax(raw))  # first maximum
    tie = int(np.sum(raw == raw[best])) > 1
    return RbVerdict(FAULTS[best], scores, tie)


def rb_complexity_estimate(n_faults: int, n_violations: int) -> int:
    """Dominant operation count of :func:`rb_classify`: one term per (fault, violation)."""
    if n_faults < 0 or n_violations < 0:
        raise ValueError("counts must be non-negative")
    return int(n_faults) * int(n_violations)
