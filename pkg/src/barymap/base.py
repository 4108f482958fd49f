"""Shared containers, the invertible-map contract and seeded random streams."""

import zlib
from dataclasses import dataclass

import numpy as np


class BarymapError(Exception):
    """Base class for package errors."""


class DataError(BarymapError, ValueError):
    """Input samples violate a shape or finiteness requirement."""


class FitError(BarymapError, RuntimeError):
    """A layer could not be fitted."""

    def __init__(self, message, layer_index=None):
        if layer_index is not None:
            message = "layer %d: %s" % (layer_index, message)
        super().__init__(message)
        self.layer_index = layer_index


class ConvergenceError(FitError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def check_samples(X, d=None, name="X"):
    """Return ``X`` as a finite float array of shape (n, d) with n >= 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DataError("%s must be 2D, got shape %s" % (name, X.shape))
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError("%s must have at least one sample and one feature" % name)
    if d is not None and X.shape[1] != d:
        raise DataError("%s has %d features, expected %d" % (name, X.shape[1], d))
    if not np.all(np.isfinite(X)):
        raise DataError("%s contains non-finite entries" % name)
    return X


def check_weights(weights, k):
    """Validate a probability vector of length ``k``; ``None`` means uniform."""
    if weights is None:
        return np.full(k, 1.0 / k)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (k,):
        raise DataError("expected %d weights, got %d" % (k, w.size))
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-12:
        raise DataError("weights must sum to 1 (got %.17g)" % w.sum())
    return w


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered per-class sample matrices sharing one dimension.

    Parameters
    ----------
    classes : tuple of ndarray
        ``classes[j]`` has shape (n_j, d).
    labels : tuple of int, optional
        Original integer label of each class (defaults to ``0..k-1``).
    """

    classes: tuple
    labels: tuple = None

    def __post_init__(self):
        classes = tuple(check_samples(X, name="class %d" % j)
                        for j, X in enumerate(self.classes))
        if len(classes) < 2:
            raise DataError("need at least 2 classes, got %d" % len(classes))
        d = classes[0].shape[1]
        for j, X in enumerate(classes):
            if X.shape[1] != d:
                raise DataError("class %d has dimension %d, expected %d"
                                % (j, X.shape[1], d))
        labels = tuple(range(len(classes))) if self.labels is None else tuple(
            int(l) for l in self.labels)
        if len(labels) != len(classes):
            raise DataError("labels and classes differ in length")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "labels", labels)

    @property
    def k(self):
        return len(self.classes)

    @property
    def d(self):
        return self.classes[0].shape[1]

    @property
    def sizes(self):
        return tuple(X.shape[0] for X in self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __getitem__(self, j):
        return self.classes[j]

    def __len__(self):
        return len(self.classes)

    def replace(self, classes):
        return LabeledDataset(tuple(classes), self.labels)


class InvertibleMap:
    """A bijection of R^d with an exact analytic inverse.

    Subclasses implement :meth:`forward` and :meth:`inverse` on arrays of
    shape (n, d) and are immutable after construction.
    """

    def forward(self, X):
        raise NotImplementedError

    def inverse(self, Z):
        raise NotImplementedError

    def __call__(self, X):
        return self.forward(X)


class IdentityMap(InvertibleMap):
    def forward(self, X):
        return np.array(X, dtype=float, copy=True)

    inverse = forward


class Layer:
    """One fitted symmetric Monge layer: ``maps[j]`` sends class j toward
    the shared barycenter.

    Subclasses set the class attribute ``kind`` and implement
    :meth:`to_dict` / :meth:`from_dict` for serialization.
    """

    kind = None

    def __init__(self, maps):
        self.maps = tuple(maps)

    @property
    def k(self):
        return len(self.maps)

    def to_dict(self):
        raise NotImplementedError

    @classmethod
    def from_dict(cls, payload):
        raise NotImplementedError


def substream(seed, name, *index):
    """Independent generator for the named sub-stream of a master seed.

    Streams use the counter-based Philox bit generator, keyed by the master
    seed, the CRC-32 of ``name`` and any integer ``index`` values, so adding a
    consumer never perturbs the draws of another.
    """
    key = (zlib.crc32(name.encode("utf8")),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
