"""Vectorized typed attention layer with a hand-written backward pass.

Edges are kept in destination-sorted order so that per-node softmax
reductions are contiguous segments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import IsolatedNode
from ..graph import N_EDGE_TYPES


def _scatter(rows: np.ndarray, n_rows: int, dtype=np.float64) -> sp.csr_matrix:
    E = len(rows)
    return sp.csr_matrix((np.ones(E, dtype=dtype), (rows, np.arange(E))), shape=(n_rows, E))


@dataclass
class EdgeIndex:
    """Destination-sorted edge arrays plus sparse scatter operators."""

    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    etype: np.ndarray
    seg_start: np.ndarray
    to_dst: sp.csr_matrix
    to_src: sp.csr_matrix
    to_src_typed: sp.csr_matrix  # rows are type * n + node
    to_dst_typed: sp.csr_matrix
    to_dst_type_group: sp.csr_matrix  # (dst, type) softmax groups
    dst_type_group: np.ndarray

    @classmethod
    def build(cls, n_nodes: int, src, dst, etype, dtype=np.float64) -> "EdgeIndex":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        etype = np.asarray(etype, dtype=np.int64)
        order = np.lexsort((src, etype, dst))
        src, dst, etype = src[order], dst[order], etype[order]
        counts = np.bincount(dst, minlength=n_nodes)
        if np.any(counts == 0):
            raise IsolatedNode(f"nodes {np.flatnonzero(counts == 0).tolist()} have no in-edges")
        seg_start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        group = dst * N_EDGE_TYPES + etype
        _, group = np.unique(group, return_inverse=True)
        return cls(
            n_nodes, src, dst, etype, seg_start,
            _scatter(dst, n_nodes, dtype),
            _scatter(src, n_nodes, dtype),
            _scatter(etype * n_nodes + src, N_EDGE_TYPES * n_nodes, dtype),
            _scatter(etype * n_nodes + dst, N_EDGE_TYPES * n_nodes, dtype),
            _scatter(group, int(group.max()) + 1, dtype),
            group,
        )

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def segment_sum(self, values: np.ndarray) -> np.ndarray:
        flat = values.reshape(len(self.src), -1)
        return np.asarray(self.to_dst @ flat).reshape((self.n_nodes,) + values.shape[1:])


def _leaky(x, slope):
    # valid for slope <= 1
    return np.maximum(x, slope * x)


def _leaky_grad(x, slope):
    return np.where(x > 0, 1.0, slope)


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


class _Normalizer:
    """Softmax over destination segments, or over (destination, type)
    groups when attention mass should not compete across protocols."""

    def __init__(self, idx: EdgeIndex, per_type: bool):
        self.idx = idx
        self.per_type = per_type
        if per_type:
            self.op, self.member = idx.to_dst_type_group, idx.dst_type_group
        else:
            self.op, self.member = idx.to_dst, idx.dst

    def group_sum(self, values):
        flat = values.reshape(values.shape[0], -1)
        return np.asarray(self.op @ flat).reshape((self.op.shape[0],) + values.shape[1:])

    def group_max(self, values):
        if not self.per_type:
            return np.maximum.reduceat(values, self.idx.seg_start, axis=0)
        out = np.full((self.op.shape[0],) + values.shape[1:], -np.inf)
        np.maximum.at(out, self.member, values)
        return out

    def softmax(self, e):
        ex = np.exp(e - self.group_max(e)[self.member])
        return ex / self.group_sum(ex)[self.member]

    def softmax_backward(self, alpha, dalpha):
        return alpha * (dalpha - self.group_sum(alpha * dalpha)[self.member])


def layer_forward(
    H_in: np.ndarray,
    idx: EdgeIndex,
    W: np.ndarray,
    a: np.ndarray,
    dynamic: bool,
    is_last: bool,
    slope: float = 0.2,
    dropout_mask: np.ndarray | None = None,
    per_type_softmax: bool = False,
):
    """One attention layer; returns ``(H_out, cache)``.

    ``W`` has shape ``(T, heads, d_head, 2 d_in)`` and ``a`` has shape
    ``(T, heads, d_head)``. With ``T == 1`` every edge uses the single slot.
    Scores use the full ``W`` on ``[h_u || h_v]``; messages use its left
    half on ``h_u``. ``dropout_mask`` is pre-scaled and multiplies the
    attention weights.
    """
    n, d_in = H_in.shape
    T, heads, dh, _ = W.shape
    t = idx.etype if T > 1 else np.zeros_like(idx.etype)
    # per-node projections for every type slot: (n, T, heads, d_head)
    PL = (H_in @ W[..., :d_in].reshape(-1, d_in).T).reshape(n * T, heads, dh)
    PR = (H_in @ W[..., d_in:].reshape(-1, d_in).T).reshape(n * T, heads, dh)
    mu = PL.take(idx.src * T + t, axis=0)  # (E, heads, d_head)
    z = mu + PR.take(idx.dst * T + t, axis=0)
    a_e = a.take(t, axis=0)
    if dynamic:
        s = _leaky(z, slope)
        e = (a_e * s).sum(axis=-1)
        q = None
    else:
        s = None
        q = (a_e * z).sum(axis=-1)
        e = _leaky(q, slope)

    norm = _Normalizer(idx, per_type_softmax)
    alpha = norm.softmax(e)
    alpha_d = alpha * dropout_mask if dropout_mask is not None else alpha
    m = idx.segment_sum(alpha_d[..., None] * mu)
    o = _elu(m)
    H_out = o.mean(axis=1) if is_last else o.reshape(n, -1)
    cache = dict(H_in=H_in, t=t, mu=mu, z=z, s=s, q=q, a_e=a_e, alpha=alpha,
                 alpha_d=alpha_d, m=m, o=o, norm=norm, mask=dropout_mask)
    return H_out, cache


def layer_backward(dH_out, idx: EdgeIndex, W, a, dynamic, is_last, slope, cache):
    """Gradients ``(dH_in, dW, da)`` through :func:`layer_forward`."""
    H_in, t, mu, z = cache["H_in"], cache["t"], cache["mu"], cache["z"]
    alpha, alpha_d, m, o, a_e = (cache[k] for k in ("alpha", "alpha_d", "m", "o", "a_e"))
    n, d_in = H_in.shape
    T, heads, dh, _ = W.shape
    E = idx.n_edges

    if is_last:
        do = np.broadcast_to(dH_out[:, None, :] / heads, (n, heads, dh))
    else:
        do = dH_out.reshape(n, heads, dh)
    dm = do * np.where(m > 0, 1.0, o + 1.0)  # ELU'(m) = ELU(m) + 1 below zero

    dm_e = dm.take(idx.dst, axis=0)
    dalpha = (dm_e * mu).sum(axis=-1)
    if cache["mask"] is not None:
        dalpha = dalpha * cache["mask"]
    de = cache["norm"].softmax_backward(alpha, dalpha)

    if dynamic:
        contrib = de[..., None] * cache["s"]
        dz = de[..., None] * a_e * _leaky_grad(z, slope)
    else:
        dq = de * _leaky_grad(cache["q"], slope)
        contrib = dq[..., None] * z
        dz = dq[..., None] * a_e
    if T > 1:
        by_type = sp.csr_matrix((np.ones(E), (t, np.arange(E))), shape=(T, E))
        da = np.asarray(by_type @ contrib.reshape(E, -1)).reshape(a.shape)
    else:
        da = contrib.sum(axis=0)[None]

    dmu = alpha_d[..., None] * dm_e + dz
    if T > 1:
        dPL = idx.to_src_typed @ dmu.reshape(E, -1)  # (T * n, heads * d_head)
        dPR = idx.to_dst_typed @ dz.reshape(E, -1)
        dPL = dPL.reshape(T, n, -1).transpose(1, 0, 2).reshape(n, -1)
        dPR = dPR.reshape(T, n, -1).transpose(1, 0, 2).reshape(n, -1)
    else:
        dPL = idx.to_src @ dmu.reshape(E, -1)
        dPR = idx.to_dst @ dz.reshape(E, -1)
    WL = W[..., :d_in].reshape(-1, d_in)
    WR = W[..., d_in:].reshape(-1, d_in)
    dW = np.concatenate(
        [(dPL.T @ H_in).reshape(T, heads, dh, d_in), (dPR.T @ H_in).reshape(T, heads, dh, d_in)],
        axis=-1,
    )
    dH_in = dPL @ WL + dPR @ WR
    return dH_in, dW, da
