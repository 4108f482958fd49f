"""Iterative composition of symmetric Monge layers into per-class flows."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .base import (BarymapError, DataError, FitError, LabeledDataset,
                   check_samples, check_weights)
from .gaussian import GaussianLayer, fit_gaussian_layer
from .nb import MswdConfig, NbLayer, fit_nb_layer
from .tree import TreeLayer, fit_tree_layer

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

LAYER_TYPES = {cls.kind: cls for cls in (GaussianLayer, NbLayer, TreeLayer)}

_DEFAULTS = {
    "gaussian": {"reg": 1e-6, "tol": 1e-9, "max_iter": 200},
    "nb": {"frame": "mswd", "m": None, "bins": 40, "alpha": 1.0, "std_floor": 1e-8,
           "p": 2.0, "max_iter": 50, "step": 1.0, "shrink": 0.5,
           "max_halvings": 20, "tol": 1e-6},
    "tree": {"max_leaf_nodes": 10, "min_samples_leaf": 1, "kappa": 0.9,
             "preprocess": True, "weight_mode": "weighted"},
}


class ModelFormatError(BarymapError, ValueError):
    """A model document could not be parsed."""


class UnsupportedLayerError(ModelFormatError):
    pass


@dataclass(frozen=True)
class LayerConfig:
    """Layer kind plus keyword parameters (unset ones take defaults)."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _DEFAULTS:
            raise ValueError("unknown layer kind %r" % self.kind)
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise ValueError("unknown %s parameters: %s"
                             % (self.kind, ", ".join(sorted(unknown))))

    def resolved(self):
        out = dict(_DEFAULTS[self.kind])
        out.update(self.params)
        return out

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params)}


def fit_layer(config, dataset, weights, seed):
    p = config.resolved()
    if config.kind == "gaussian":
        return fit_gaussian_layer(dataset, weights, p["reg"], p["tol"], p["max_iter"])
    if config.kind == "nb":
        mswd = MswdConfig(p["p"], p["max_iter"], p["step"], p["shrink"],
                          p["max_halvings"], p["tol"])
        return fit_nb_layer(dataset, weights, p["frame"], p["m"], p["bins"],
                            p["alpha"], p["std_floor"], mswd, seed)
    return fit_tree_layer(dataset, weights, p["max_leaf_nodes"], p["min_samples_leaf"],
                          p["kappa"], p["preprocess"], p["weight_mode"])


@dataclass(frozen=True)
class FlowModel:
    """Fitted per-class flows ``T_j = t_j^(M) o ... o t_j^(1)``."""

    layers: tuple
    weights: np.ndarray
    d: int
    schedule: tuple = ()
    seed: int = 0

    @property
    def k(self):
        return len(self.weights)

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def per_class_maps(self):
        return [[layer.maps[j] for layer in self.layers] for j in range(self.k)]

    def _check(self, class_id, points):
        if not 0 <= class_id < self.k:
            raise IndexError("class id %d out of range for k=%d" % (class_id, self.k))
        return check_samples(points, self.d, "points")

    def transform(self, class_id, points):
        X = self._check(class_id, points).copy()
        for layer in self.layers:
            X = layer.maps[class_id].forward(X)
        return X

    def inverse_transform(self, class_id, points):
        Z = self._check(class_id, points).copy()
        for layer in reversed(self.layers):
            Z = layer.maps[class_id].inverse(Z)
        return Z

    def flip(self, from_class, to_class, points):
        if from_class == to_class:
            return self._check(from_class, points).copy()
        return self.inverse_transform(to_class, self.transform(from_class, points))

    def truncated(self, n_layers):
        """The model made of the first ``n_layers`` layers."""
        return FlowModel(self.layers[:n_layers], self.weights, self.d,
                         self.schedule[:n_layers], self.seed)


def fit_flow(dataset, weights=None, schedule=(), seed=0, callback=None):
    """Fit one layer per schedule entry, pushing every class through it.

    Parameters
    ----------
    dataset : LabeledDataset or sequence of (n_j, d) arrays
    weights : array of shape (k,), optional
        Barycenter weights, uniform by default.
    schedule : sequence of LayerConfig
    seed : int
        Master seed; layer ``l`` draws from its own sub-stream.
    callback : callable, optional
        ``callback(l, model)`` after each fitted layer (``l`` starts at 1).
    """
    if not isinstance(dataset, LabeledDataset):
        dataset = LabeledDataset(tuple(dataset))
    schedule = tuple(schedule)
    if not schedule:
        raise ValueError("layer schedule is empty")
    w = check_weights(weights, dataset.k)
    work = [X.copy() for X in dataset]
    layers = []
    for l, config in enumerate(schedule, start=1):
        try:
            layer = fit_layer(config, work, w, seed=_layer_seed(seed, l))
            work = [layer.maps[j].forward(X) for j, X in enumerate(work)]
        except BarymapError as exc:
            raise FitError(str(exc), l) from exc
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise FitError(str(exc), l) from exc
        if not all(np.all(np.isfinite(X)) for X in work):
            raise FitError("non-finite values after mapping", l)
        layers.append(layer)
        logger.debug("fitted layer %d (%s)", l, config.kind)
        if callback is not None:
            callback(l, FlowModel(tuple(layers), w, dataset.d, schedule[:l], seed))
    return FlowModel(tuple(layers), w, dataset.d, schedule, seed)


def _layer_seed(seed, l):
    return int(np.random.SeedSequence([int(seed), l]).generate_state(1)[0])


def identity_model(d, k, weights=None):
    return FlowModel((), check_weights(weights, k), d)


def transform(model, class_id, points):
    return model.transform(class_id, points)


def inverse_transform(model, class_id, points):
    return model.inverse_transform(class_id, points)


def flip(model, from_class, to_class, points):
    return model.flip(from_class, to_class, points)


def model_to_dict(model):
    return {
        "format": "barymap-flow",
        "version": FORMAT_VERSION,
        "d": model.d,
        "k": model.k,
        "seed": model.seed,
        "weights": model.weights.tolist(),
        "schedule": [c.to_dict() for c in model.schedule],
        "layers": [layer.to_dict() for layer in model.layers],
    }


def model_from_dict(payload):
    try:
        if payload.get("version") != FORMAT_VERSION:
            raise ModelFormatError("unsupported model version %r (expected %d)"
                                   % (payload.get("version"), FORMAT_VERSION))
        layers = []
        for i, lp in enumerate(payload["layers"]):
            kind = lp.get("kind")
            if kind not in LAYER_TYPES:
                raise UnsupportedLayerError("layer %d: unsupported layer kind %r" % (i, kind))
            layers.append(LAYER_TYPES[kind].from_dict(lp))
        schedule = tuple(LayerConfig(c["kind"], c.get("params", {}))
                         for c in payload.get("schedule", []))
        return FlowModel(tuple(layers), np.array(payload["weights"], dtype=float),
                         int(payload["d"]), schedule, payload.get("seed", 0))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ModelFormatError("corrupt model payload: %s" % exc) from exc


def dumps_model(model):
    return json.dumps(model_to_dict(model), indent=1)


def loads_model(text):
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError("model parse error at line %d column %d (char %d): %s"
                               % (exc.lineno, exc.colno, exc.pos, exc.msg)) from exc
    if not isinstance(payload, dict):
        raise ModelFormatError("model document must be a JSON object")
    return model_from_dict(payload)


def save_model(model, sink):
    """Write ``model`` as JSON to a path or text file object."""
    text = dumps_model(model)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w") as fh:
            fh.write(text)


def load_model(source):
    if hasattr(source, "read"):
        return loads_model(source.read())
    with open(source) as fh:
        return loads_model(fh.read())


def as_dataset(obj):
    if isinstance(obj, LabeledDataset):
        return obj
    try:
        return LabeledDataset(tuple(obj))
    except TypeError as exc:
        raise DataError("cannot interpret %r as a dataset" % type(obj)) from exc
