"""Small graph builders shared by the neural-network tests."""

import numpy as np

from misconfig_lab.faults import FaultClass, GraphSample


def random_typed_graph(rng, n=None, n_types=4, p=0.4):
    """Random directed typed edges plus one self-loop (type 3) per node."""
    n = n or int(rng.integers(3, 9))
    src, dst, et = [], [], []
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                src.append(u)
                dst.append(v)
                et.append(int(rng.integers(0, min(n_types, 3))) if n_types > 1 else 0)
    for v in range(n):
        src.append(v)
        dst.append(v)
        et.append(3 if n_types > 1 else 0)
    return n, np.array(src), np.array(dst), np.array(et)


def random_sample(rng, n=None, label=None, n_features=10):
    n, src, dst, et = random_typed_graph(rng, n)
    label = FaultClass(int(label if label is not None else rng.integers(1, 8)))
    return GraphSample(rng.normal(size=(n, n_features)), src, dst, et, label)


def star_dataset(n, k=3, seed=0):
    """Key-value lookup on stars: the centre holds a query key, each leaf a
    key and a value; the label is the value whose key matches the query.
    Leaf edges alternate between two protocol types."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        keys = rng.permutation(k)
        vals = rng.integers(0, 7, size=k)
        q = int(rng.integers(k))
        X = np.zeros((k + 1, 10))
        X[0, q] = 1.0
        for i in range(k):
            X[i + 1, keys[i]] = 1.0
            X[i + 1, 3 + vals[i]] = 1.0
        label = int(vals[list(keys).index(q)]) + 1
        src = list(range(1, k + 1)) + list(range(k + 1))
        dst = [0] * k + list(range(k + 1))
        et = [i % 2 for i in range(k)] + [3] * (k + 1)
        out.append(GraphSample(X, np.array(src), np.array(dst), np.array(et), FaultClass(label)))
    return out
