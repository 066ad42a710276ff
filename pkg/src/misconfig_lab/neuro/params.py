"""Hyperparameters, parameter containers, initialization and checkpoints."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..faults import N_CLASSES, N_FEATURES
from ..graph import N_EDGE_TYPES

VARIANTS = ("gat", "gatv2", "etagat", "etagatv2")
CHECKPOINT_FORMAT = "misconfig-lab/checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    hidden_dim: int = 32
    heads: int = 4
    layers: int = 2
    batch_size: int = 4
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 20
    variant: str = "etagatv2"
    seed: int = 0
    leaky_slope: float = 0.2
    dropout_rate: float = 0.0
    per_type_softmax: bool = False

    def __post_init__(self):
        v = self.variant.lower()
        if v not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        object.__setattr__(self, "variant", v)
        if self.hidden_dim % self.heads:
            raise ValueError("hidden_dim must be divisible by heads")
        if self.layers < 1 or self.batch_size < 1:
            raise ValueError("layers and batch_size must be >= 1")
        for name in ("learning_rate", "leaky_slope"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0 <= self.weight_decay <= 1 or not 0 <= self.dropout_rate < 1:
            raise ValueError("weight_decay in [0, 1] and dropout_rate in [0, 1) required")

    @property
    def edge_typed(self) -> bool:
        return self.variant.startswith("eta")

    @property
    def dynamic(self) -> bool:
        return self.variant.endswith("v2")

    @property
    def n_param_types(self) -> int:
        return N_EDGE_TYPES if self.edge_typed else 1

    def head_dim(self, layer: int) -> int:
        # hidden layers concatenate heads, the last one averages them
        return self.hidden_dim if layer == self.layers - 1 else self.hidden_dim // self.heads

    def replace(self, **kw) -> "Hyperparams":
        return replace(self, **kw)


FULL_SCALE_HYPERPARAMS = Hyperparams(
    hidden_dim=128, heads=8, layers=2, batch_size=4, learning_rate=1e-4,
    weight_decay=1e-5, epochs=400, dropout_rate=0.1,
)


@dataclass
class ModelParams:
    """Trainable tensors by name, plus the fixed input standardization.

    Layer ``l`` stores ``layer{l}.W`` of shape ``(types, heads, d_head,
    2 d_in)`` and ``layer{l}.a`` of shape ``(types, heads, d_head)``.
    Untyped variants keep a single type slot that every edge shares.
    """

    hp: Hyperparams
    tensors: dict[str, np.ndarray]
    feature_mean: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    feature_scale: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))

    def names(self) -> list[str]:
        return list(self.tensors)

    @property
    def n_parameters(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.hp,
            {k: v.copy() for k, v in self.tensors.items()},
            self.feature_mean.copy(),
            self.feature_scale.copy(),
        )

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.hp,
            {k: v.astype(dtype) for k, v in self.tensors.items()},
            self.feature_mean.astype(dtype),
            self.feature_scale.astype(dtype),
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.tensors):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.tensors[name], dtype=np.float64).tobytes())
        h.update(self.feature_mean.astype(np.float64).tobytes())
        h.update(self.feature_scale.astype(np.float64).tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "hyperparams": asdict(self.hp),
            "shapes": {k: list(v.shape) for k, v in self.tensors.items()},
            "tensors": {k: v.astype(np.float64).ravel().tolist() for k, v in self.tensors.items()},
            "feature_mean": self.feature_mean.tolist(),
            "feature_scale": self.feature_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a model checkpoint")
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')}")
        hp = Hyperparams(**data["hyperparams"])
        tensors = {
            k: np.asarray(v, dtype=np.float64).reshape(data["shapes"][k])
            for k, v in data["tensors"].items()
        }
        return cls(
            hp,
            tensors,
            np.asarray(data["feature_mean"], dtype=np.float64),
            np.asarray(data["feature_scale"], dtype=np.float64),
        )

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), sort_keys=True))
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "ModelParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(hp: Hyperparams, n_features: int = N_FEATURES, n_classes: int = N_CLASSES) -> ModelParams:
    rng = np.random.default_rng([hp.seed, 0x5EED])
    h, T, H = hp.hidden_dim, hp.n_param_types, hp.heads
    tensors = {"embed": _glorot(rng, (n_features, h), n_features, h)}
    d_in = h
    for layer in range(hp.layers):
        dh = hp.head_dim(layer)
        tensors[f"layer{layer}.W"] = _glorot(rng, (T, H, dh, 2 * d_in), 2 * d_in, dh)
        tensors[f"layer{layer}.a"] = _glorot(rng, (T, H, dh), dh, 1)
        d_in = h
    tensors["mlp.W1"] = _glorot(rng, (h, h), h, h)
    tensors["mlp.b1"] = np.zeros(h)
    tensors["mlp.W2"] = _glorot(rng, (h, n_classes), h, n_classes)
    tensors["mlp.b2"] = np.zeros(n_classes)
    return ModelParams(hp, tensors)
