"""Scalar attention scores for a single (u, v) pair.

These are the reference definitions; :mod:`.layers` evaluates the same
quantities vectorized over every edge of a batch.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimMismatch, UnknownType


def leaky_relu(x, slope: float = 0.2):
    return np.where(x > 0, x, slope * x)


def _check(h_u, h_v, W, a, pair_input: bool):
    h_u = np.asarray(h_u, dtype=float)
    h_v = np.asarray(h_v, dtype=float)
    W = np.asarray(W, dtype=float)
    a = np.asarray(a, dtype=float)
    if h_u.shape != h_v.shape or h_u.ndim != 1 or W.ndim != 2:
        raise DimMismatch("expected 1-d node vectors of equal length and a 2-d W")
    d_in = h_u.shape[0]
    if pair_input and W.shape[1] != 2 * d_in:
        raise DimMismatch(f"W must have {2 * d_in} columns, got {W.shape[1]}")
    return h_u, h_v, W, a


def attn_gat(h_u, h_v, W, a, slope: float = 0.2) -> float:
    """Static attention ``LeakyReLU(a . [W h_u || W h_v])``.

    ``W`` may be square-ish (``d' x d``, applied to each node, ``a`` of
    length ``2 d'``) or stacked (``d' x 2d``, applied to the concatenated
    pair, ``a`` of length ``d'``). The stacked form is what the layers use
    so that every variant carries the same parameter shapes.
    """
    h_u, h_v, W, a = _check(h_u, h_v, W, a, pair_input=False)
    d_in = h_u.shape[0]
    if W.shape[1] == d_in and a.shape == (2 * W.shape[0],):
        z = np.concatenate([W @ h_u, W @ h_v])
    elif W.shape[1] == 2 * d_in and a.shape == (W.shape[0],):
        z = W @ np.concatenate([h_u, h_v])
    else:
        raise DimMismatch(f"incompatible shapes W{W.shape}, a{a.shape} for d_in={d_in}")
    return float(leaky_relu(a @ z, slope))


def attn_gatv2(h_u, h_v, W, a, slope: float = 0.2) -> float:
    """Dynamic attention ``a . LeakyReLU(W [h_u || h_v])``."""
    h_u, h_v, W, a = _check(h_u, h_v, W, a, pair_input=True)
    if a.shape != (W.shape[0],):
        raise DimMismatch(f"a must have length {W.shape[0]}")
    return float(a @ leaky_relu(W @ np.concatenate([h_u, h_v]), slope))


def attn_etagatv2(h_u, h_v, etype, params, slope: float = 0.2) -> float:
    """Edge-type-aware dynamic attention with type-selected ``(W, a)``.

    ``params`` maps an edge type to its ``(W, a)`` pair.
    """
    try:
        W, a = params[etype]
    except (KeyError, IndexError):
        raise UnknownType(etype) from None
    return attn_gatv2(h_u, h_v, W, a, slope)


def attn_etagat(h_u, h_v, etype, params, slope: float = 0.2) -> float:
    try:
        W, a = params[etype]
    except (KeyError, IndexError):
        raise UnknownType(etype) from None
    return attn_gat(h_u, h_v, W, a, slope)
