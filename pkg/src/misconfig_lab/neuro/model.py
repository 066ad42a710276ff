"""Full network: embedding, attention stack, mean-pool readout and MLP head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import NonFiniteLoss
from ..faults import class_index
from .layers import EdgeIndex, layer_backward, layer_forward
from .params import ModelParams


@dataclass
class Batch:
    """Several graphs merged into one disjoint graph."""

    features: np.ndarray
    index: EdgeIndex
    graph_of: np.ndarray
    pool: sp.csr_matrix  # (graphs, nodes), rows average their graph's nodes
    labels: np.ndarray  # 0-based class indices, -1 when unknown

    @property
    def n_graphs(self) -> int:
        return self.pool.shape[0]


def collate(samples: Sequence, dtype=np.float64) -> Batch:
    feats, srcs, dsts, types, owner, labels = [], [], [], [], [], []
    offset = 0
    for g, s in enumerate(samples):
        n = s.features.shape[0]
        feats.append(s.features)
        srcs.append(np.asarray(s.src) + offset)
        dsts.append(np.asarray(s.dst) + offset)
        types.append(np.asarray(s.etype))
        owner.append(np.full(n, g))
        labels.append(class_index(s.label) if int(s.label) > 0 else -1)
        offset += n
    graph_of = np.concatenate(owner)
    sizes = np.bincount(graph_of)
    pool = sp.csr_matrix(
        ((1.0 / sizes[graph_of]).astype(dtype), (graph_of, np.arange(offset))),
        shape=(len(samples), offset),
    )
    index = EdgeIndex.build(
        offset, np.concatenate(srcs), np.concatenate(dsts), np.concatenate(types), dtype
    )
    return Batch(np.concatenate(feats).astype(dtype), index, graph_of, pool, np.array(labels))


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def readout_and_classify(H_final: np.ndarray, mlp: dict, pool=None) -> np.ndarray:
    """Mean-pool node embeddings and return class probabilities.

    Without ``pool`` all rows of ``H_final`` form one graph.
    """
    if pool is None:
        z = H_final.mean(axis=0, keepdims=True)
    else:
        z = np.asarray(pool @ H_final)
    hidden = np.maximum(z @ mlp["mlp.W1"] + mlp["mlp.b1"], 0.0)
    probs = _softmax(hidden @ mlp["mlp.W2"] + mlp["mlp.b2"])
    return probs[0] if pool is None else probs


def forward(params: ModelParams, batch: Batch, rng: np.random.Generator | None = None):
    """Logits for every graph in ``batch``; ``rng`` enables attention dropout."""
    hp, P = params.hp, params.tensors
    x = (batch.features - params.feature_mean) / params.feature_scale
    H = x @ P["embed"]
    caches = []
    for layer in range(hp.layers):
        mask = None
        if rng is not None and hp.dropout_rate > 0:
            keep = 1.0 - hp.dropout_rate
            mask = (rng.random((batch.index.n_edges, hp.heads)) < keep) / keep
        H, cache = layer_forward(
            H, batch.index, P[f"layer{layer}.W"], P[f"layer{layer}.a"],
            hp.dynamic, layer == hp.layers - 1, hp.leaky_slope, mask, hp.per_type_softmax,
        )
        caches.append(cache)
    z = np.asarray(batch.pool @ H)
    u = z @ P["mlp.W1"] + P["mlp.b1"]
    r = np.maximum(u, 0.0)
    logits = r @ P["mlp.W2"] + P["mlp.b2"]
    return logits, dict(x=x, layers=caches, H=H, z=z, u=u, r=r)


def predict_proba(params: ModelParams, batch: Batch) -> np.ndarray:
    return _softmax(forward(params, batch)[0])


def loss_and_grads(params: ModelParams, batch: Batch, rng: np.random.Generator | None = None,
                   label_smoothing: float = 0.0, return_logits: bool = False):
    """Mean cross-entropy over the batch and its exact gradients.

    With ``return_logits`` the logits of the same forward pass are
    returned as a third value.
    """
    if batch.n_graphs == 0:
        raise ValueError("empty batch")
    if np.any(batch.labels < 0):
        raise ValueError("every sample in a training batch needs a fault label")
    hp, P = params.hp, params.tensors
    logits, c = forward(params, batch, rng)
    probs = _softmax(logits)
    B, K = probs.shape
    target = np.full((B, K), label_smoothing / K, dtype=probs.dtype)
    target[np.arange(B), batch.labels] += 1.0 - label_smoothing
    logp = logits - logits.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    loss = float(-(target * logp).sum() / B)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")

    g = {}
    dlogits = (probs - target) / B
    g["mlp.W2"] = c["r"].T @ dlogits
    g["mlp.b2"] = dlogits.sum(axis=0)
    du = (dlogits @ P["mlp.W2"].T) * (c["u"] > 0)
    g["mlp.W1"] = c["z"].T @ du
    g["mlp.b1"] = du.sum(axis=0)
    dz = du @ P["mlp.W1"].T
    dH = np.asarray(batch.pool.T @ dz)
    for layer in reversed(range(hp.layers)):
        W, a = P[f"layer{layer}.W"], P[f"layer{layer}.a"]
        dH, g[f"layer{layer}.W"], g[f"layer{layer}.a"] = layer_backward(
            dH, batch.index, W, a, hp.dynamic, layer == hp.layers - 1,
            hp.leaky_slope, c["layers"][layer],
        )
    g["embed"] = c["x"].T @ dH
    grads = {k: g[k] for k in P}
    return (loss, grads, logits) if return_logits else (loss, grads)
