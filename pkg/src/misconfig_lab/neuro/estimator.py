"""scikit-learn style wrappers around the graph classifier."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..faults import FAULTS, N_FEATURES, FaultClass, GraphSample
from .model import collate, forward, _softmax
from .params import Hyperparams, ModelParams
from .train import DatasetSource, InjectionStream, evaluate, fit_standardizer, train


def check_samples(X, require_labels: bool = False) -> list[GraphSample]:
    """Validate a sequence of graph samples and return it as a list."""
    if isinstance(X, (DatasetSource, InjectionStream)):
        return list(getattr(X, "samples", getattr(X, "clean", [])))
    samples = list(X)
    if not samples:
        raise ValueError("need at least one graph sample")
    for i, s in enumerate(samples):
        if not isinstance(s, GraphSample):
            raise TypeError(f"item {i} is {type(s).__name__}, expected GraphSample")
        if s.features.ndim != 2 or s.features.shape[1] != N_FEATURES:
            raise ValueError(f"item {i}: features must have shape (n, {N_FEATURES})")
        if not np.all(np.isfinite(s.features)):
            raise ValueError(f"item {i}: non-finite features")
        if not (len(s.src) == len(s.dst) == len(s.etype)):
            raise ValueError(f"item {i}: edge arrays differ in length")
        if require_labels and int(s.label) == 0:
            raise ValueError(f"item {i}: training samples need a fault label in f1..f7")
    return samples


def _with_labels(samples, y):
    if y is None:
        return samples
    y = np.asarray(y)
    if len(y) != len(samples):
        raise ValueError(f"{len(y)} labels for {len(samples)} samples")
    return [replace(s, label=FaultClass(int(c))) for s, c in zip(samples, y)]


class GraphFeatureScaler(TransformerMixin, BaseEstimator):
    """Standardize node feature columns using statistics over all nodes."""

    def fit(self, X, y=None):
        samples = check_samples(X)
        self.mean_, self.scale_ = fit_standardizer(np.concatenate([s.features for s in samples]))
        self.n_features_in_ = N_FEATURES
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        return [replace(s, features=(s.features - self.mean_) / self.scale_) for s in check_samples(X)]


class EtaGATClassifier(ClassifierMixin, BaseEstimator):
    """Graph-level fault classifier with typed attention layers.

    ``fit`` takes a list of :class:`~misconfig_lab.faults.GraphSample`; labels
    come from the samples unless ``y`` is given. ``predict`` returns fault
    classes 1..7.
    """

    def __init__(self, variant="etagatv2", hidden_dim=32, heads=4, layers=2, batch_size=4,
                 learning_rate=1e-3, weight_decay=1e-5, epochs=20, dropout_rate=0.0,
                 leaky_slope=0.2, per_type_softmax=False, max_samples=None, seed=0):
        self.variant = variant
        self.hidden_dim = hidden_dim
        self.heads = heads
        self.layers = layers
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.dropout_rate = dropout_rate
        self.leaky_slope = leaky_slope
        self.per_type_softmax = per_type_softmax
        self.max_samples = max_samples
        self.seed = seed

    def _hyperparams(self) -> Hyperparams:
        return Hyperparams(
            hidden_dim=self.hidden_dim, heads=self.heads, layers=self.layers,
            batch_size=self.batch_size, learning_rate=self.learning_rate,
            weight_decay=self.weight_decay, epochs=self.epochs, variant=self.variant,
            seed=self.seed, leaky_slope=self.leaky_slope, dropout_rate=self.dropout_rate,
            per_type_softmax=self.per_type_softmax,
        )

    def fit(self, X, y=None):
        hp = self._hyperparams()
        if isinstance(X, InjectionStream):
            source = X
        else:
            source = DatasetSource(_with_labels(check_samples(X, require_labels=y is None), y))
        self.params_, self.report_ = train(source, hp, max_samples=self.max_samples)
        self.classes_ = np.array([int(f) for f in FAULTS])
        self.n_features_in_ = N_FEATURES
        return self

    @classmethod
    def from_params(cls, params: ModelParams) -> "EtaGATClassifier":
        hp = params.hp
        est = cls(variant=hp.variant, hidden_dim=hp.hidden_dim, heads=hp.heads, layers=hp.layers,
                  batch_size=hp.batch_size, learning_rate=hp.learning_rate,
                  weight_decay=hp.weight_decay, epochs=hp.epochs, dropout_rate=hp.dropout_rate,
                  leaky_slope=hp.leaky_slope, per_type_softmax=hp.per_type_softmax, seed=hp.seed)
        est.params_ = params
        est.classes_ = np.array([int(f) for f in FAULTS])
        est.n_features_in_ = N_FEATURES
        return est

    def predict_proba(self, X, batch_size: int = 32) -> np.ndarray:
        check_is_fitted(self, "params_")
        samples = check_samples(X)
        out = [
            _softmax(forward(self.params_, collate(samples[i:i + batch_size]))[0])
            for i in range(0, len(samples), batch_size)
        ]
        return np.concatenate(out)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def score(self, X, y=None, sample_weight=None) -> float:
        samples = _with_labels(check_samples(X), y)
        if sample_weight is None:
            return evaluate(self.params_, samples).accuracy
        return super().score(samples, [int(s.label) for s in samples], sample_weight)
