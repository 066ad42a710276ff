import math

import numpy as np
import pytest

from misconfig_lab.errors import ShapeMismatch
from misconfig_lab.neuro.optim import AdamState, adam_step


def test_zero_gradient_no_decay_is_identity():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, AdamState(), lr=0.1)
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_constant_gradient_step_tends_to_lr():
    p = {"w": np.array([0.0])}
    state = AdamState()
    prev = 0.0
    for _ in range(2000):
        adam_step(p, {"w": np.array([3.0])}, state, lr=0.01)
        step, prev = prev - p["w"][0], p["w"][0]
    assert step == pytest.approx(0.01, rel=1e-3)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState(), lr=0.1)
    with pytest.raises(ShapeMismatch):
        adam_step({"w": np.zeros(2)}, {"v": np.zeros(2)}, AdamState(), lr=0.1)


def scalar_adam(p, grads, lr, wd, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * wd * p
        p = p - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
    return p


def test_hundred_steps_against_scalar_reference():
    rng = np.random.default_rng(0)
    init = rng.normal(size=5)
    G = rng.normal(size=(100, 5))
    p = {"w": init.copy()}
    state = AdamState.zeros_like(p)
    for g in G:
        adam_step(p, {"w": g}, state, lr=1e-2, weight_decay=1e-2)
    ref = [scalar_adam(init[i], G[:, i], 1e-2, 1e-2) for i in range(5)]
    np.testing.assert_allclose(p["w"], ref, atol=1e-10, rtol=0)
    assert state.t == 100
