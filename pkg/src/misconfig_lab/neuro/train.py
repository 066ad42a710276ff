"""Training loop, data sources and evaluation."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import Diverged, NonFiniteLoss
from ..faults import FAULTS, N_CLASSES, FaultClass, GraphSample, draw_delta, perturb_features
from .model import collate, forward, loss_and_grads
from .optim import AdamState, adam_step
from .params import Hyperparams, ModelParams, init_params


class DatasetSource:
    """Epochs over a fixed list of labeled samples, reshuffled every epoch."""

    def __init__(self, samples: Sequence[GraphSample]):
        if len(samples) == 0:
            raise ValueError("empty dataset")
        self.samples = list(samples)

    @property
    def epoch_size(self) -> int:
        return len(self.samples)

    def epoch(self, rng: np.random.Generator) -> Iterable[GraphSample]:
        for i in rng.permutation(len(self.samples)):
            yield self.samples[int(i)]

    def reference_features(self) -> np.ndarray:
        return np.concatenate([s.features for s in self.samples])


class InjectionStream:
    """Fresh labeled samples drawn from a pool of clean graphs.

    Every draw picks a graph, a fault class and an offset, and injects the
    fault into the clean feature matrix, so no two consumed samples need be
    identical even though the pool is finite.
    """

    def __init__(self, clean: Sequence[GraphSample], epoch_size: int | None = None):
        if len(clean) == 0:
            raise ValueError("empty graph pool")
        self.clean = list(clean)
        self.epoch_size = int(epoch_size or len(self.clean))

    def draw(self, rng: np.random.Generator) -> GraphSample:
        base = self.clean[int(rng.integers(len(self.clean)))]
        fault = FAULTS[int(rng.integers(N_CLASSES))]
        return perturb_features(base, fault, draw_delta(rng))

    def epoch(self, rng: np.random.Generator) -> Iterable[GraphSample]:
        for _ in range(self.epoch_size):
            yield self.draw(rng)

    def reference_features(self) -> np.ndarray:
        return np.concatenate([s.features for s in self.clean])


def fit_standardizer(features: np.ndarray):
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[scale < 1e-6] = 1.0
    return mean, scale


@dataclass
class TrainReport:
    """Per-epoch metrics plus the per-sample hit record of training predictions."""

    rows: list[dict] = field(default_factory=list)  # epoch, samples_seen, loss, acc
    hits: list[int] = field(default_factory=list)
    wall_time: float = 0.0
    checksum: str = ""
    variant: str = ""

    def samples_to_threshold(self, threshold: float = 0.8, window: int = 1000) -> int | None:
        """First consumed-sample count at which the trailing-window accuracy reaches ``threshold``."""
        h = np.asarray(self.hits, dtype=float)
        if len(h) < window:
            return None
        c = np.concatenate([[0.0], np.cumsum(h)])
        avg = (c[window:] - c[:-window]) / window
        above = np.flatnonzero(avg >= threshold - 1e-12)
        return int(above[0] + window) if len(above) else None

    def moving_average(self, window: int = 1000, stride: int = 100) -> list[tuple[int, float]]:
        h = np.asarray(self.hits, dtype=float)
        c = np.concatenate([[0.0], np.cumsum(h)])
        out = []
        for n in range(stride, len(h) + 1, stride):
            w = min(window, n)
            out.append((n, float((c[n] - c[n - w]) / w)))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "samples_seen", "loss", "acc"])
        for r in self.rows:
            w.writerow([r["epoch"], r["samples_seen"], repr(r["loss"]), repr(r["acc"])])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_csv())
        tmp.replace(path)

    def digest(self) -> str:
        """Hash of everything deterministic in the report (wall time excluded)."""
        h = hashlib.sha256(self.to_csv().encode())
        h.update(np.asarray(self.hits, dtype=np.int8).tobytes())
        h.update(self.checksum.encode())
        return h.hexdigest()


def train(
    source,
    hp: Hyperparams,
    max_samples: int | None = None,
    dtype=np.float32,
    params: ModelParams | None = None,
    callback=None,
) -> tuple[ModelParams, TrainReport]:
    """Train on ``source`` for ``hp.epochs`` epochs or ``max_samples`` consumed samples.

    ``source`` is a :class:`DatasetSource`, an :class:`InjectionStream`, or
    a plain list of samples. Training correctness of each sample is recorded
    from the forward pass that precedes its update.
    """
    if isinstance(source, (list, tuple)):
        source = DatasetSource(source)
    rng = np.random.default_rng([hp.seed, 0xDA7A])
    if params is None:
        params = init_params(hp)
        params.feature_mean, params.feature_scale = fit_standardizer(source.reference_features())
    work = params.astype(dtype)
    state = AdamState.zeros_like(work.tensors)
    report = TrainReport(variant=hp.variant)
    seen = 0
    t0 = time.perf_counter()
    budget = max_samples if max_samples is not None else hp.epochs * source.epoch_size
    epoch = 0
    while seen < budget:
        epoch += 1
        losses, weights, correct = [], [], 0
        batch: list = []
        items = source.epoch(rng)
        done = False
        while not done:
            nxt = next(items, None)
            if nxt is not None:
                batch.append(nxt)
            if len(batch) == hp.batch_size or (nxt is None and batch) or (
                seen + len(batch) >= budget and batch
            ):
                b = collate(batch, dtype)
                try:
                    loss, grads, logits = _step(work, b, rng, hp)
                except NonFiniteLoss as exc:
                    raise Diverged(f"epoch {epoch}, after {seen} samples: {exc}") from None
                adam_step(work.tensors, grads, state, hp.learning_rate, hp.weight_decay)
                hit = (logits.argmax(axis=1) == b.labels).astype(int).tolist()
                report.hits.extend(hit)
                correct += sum(hit)
                losses.append(loss * len(batch))
                weights.append(len(batch))
                seen += len(batch)
                batch = []
                if seen >= budget:
                    done = True
            if nxt is None:
                done = True
        if not weights:
            break
        n = sum(weights)
        row = dict(epoch=epoch, samples_seen=seen, loss=float(sum(losses) / n), acc=correct / n)
        report.rows.append(row)
        if callback is not None:
            callback(row)
    report.wall_time = time.perf_counter() - t0
    out = work.astype(np.float64)
    report.checksum = out.checksum()
    return out, report


def _step(params: ModelParams, batch, rng, hp: Hyperparams):
    drop_rng = rng if hp.dropout_rate > 0 else None
    return loss_and_grads(params, batch, drop_rng, return_logits=True)


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # row-normalized, rows are true classes f1..f7
    counts: np.ndarray  # raw counts

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "n": int(self.counts.sum()),
            "confusion": self.confusion.tolist(),
            "counts": self.counts.astype(int).tolist(),
        }


def predict(params: ModelParams, samples: Sequence[GraphSample], batch_size: int = 32) -> np.ndarray:
    """Predicted fault classes (1..7) for every sample."""
    out = []
    for i in range(0, len(samples), batch_size):
        b = collate(samples[i:i + batch_size])
        out.append(forward(params, b)[0].argmax(axis=1) + 1)
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def evaluate(params: ModelParams, samples: Sequence[GraphSample], batch_size: int = 32) -> EvalResult:
    if len(samples) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    pred = predict(params, samples, batch_size)
    true = np.array([int(FaultClass(s.label)) for s in samples])
    counts = np.zeros((N_CLASSES, N_CLASSES))
    np.add.at(counts, (true - 1, pred - 1), 1)
    rows = counts.sum(axis=1, keepdims=True)
    confusion = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    return EvalResult(float((pred == true).mean()), confusion, counts)


def report_json(results: dict[str, EvalResult]) -> str:
    return json.dumps({k: v.to_dict() for k, v in results.items()}, sort_keys=True, indent=2)
