"""Adam with bias correction and decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch

BETAS = (0.9, 0.999)
EPS = 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, tensors: dict) -> "AdamState":
        return cls({k: np.zeros_like(x) for k, x in tensors.items()},
                   {k: np.zeros_like(x) for k, x in tensors.items()}, 0)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float, weight_decay: float = 0.0,
              t: int | None = None, betas=BETAS, eps: float = EPS):
    """One update of every tensor in ``params`` (in place); returns ``(params, state)``.

    The decay term ``lr * weight_decay * p`` is applied to the weights
    directly rather than folded into the gradient. ``t`` overrides the
    1-based step counter used for bias correction.
    """
    if set(grads) != set(params):
        raise ShapeMismatch(f"gradient names {sorted(grads)} differ from {sorted(params)}")
    if not state.m:
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
    state.t = state.t + 1 if t is None else int(t)
    b1, b2 = betas
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape or state.m[k].shape != p.shape:
            raise ShapeMismatch(f"{k}: param {p.shape}, grad {g.shape}, state {state.m[k].shape}")
        m, v = state.m[k], state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if weight_decay:
            p -= lr * weight_decay * p
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state
