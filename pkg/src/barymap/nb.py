"""Independent-components ("naive barycenter") layer.

Data are projected on a shared orthonormal frame ``Q`` (d x m); along each
column the classes get 1D densities and 1D Monge maps to their barycenter.
When m < d the orthogonal complement of ``span(Q)`` is left untouched:

    x -> x + Q (t(Q^T x) - Q^T x)

The frame is either random, the identity, or chosen to maximize the
multi-class sliced Wasserstein objective on the Stiefel manifold.
"""

from dataclasses import dataclass

import numpy as np

from .base import InvertibleMap, Layer, check_weights, substream
from .univariate import (UnivariateDensity, barycenter_quantile,
                         fit_univariate_density, monge_1d)


@dataclass(frozen=True)
class MswdConfig:
    p: float = 2.0
    max_iter: int = 50
    step: float = 1.0
    shrink: float = 0.5
    max_halvings: int = 20
    tol: float = 1e-6

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.max_iter < 0 or self.step <= 0 or not 0 < self.shrink < 1:
            raise ValueError("invalid optimizer parameters")


def random_frame(d, m, seed=0):
    """Haar-distributed d x m orthonormal frame from a QR factorization."""
    if not 1 <= m <= d:
        raise ValueError("need 1 <= m <= d, got m=%d, d=%d" % (m, d))
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "frame")
    G = rng.standard_normal((d, m))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def polar(A):
    """Closest matrix with orthonormal columns in Frobenius norm."""
    U, _, Vt = np.linalg.svd(A, full_matrices=False)
    return U @ Vt


def equalize(classes, seed=0):
    """Subsample every class without replacement to the smallest class size."""
    n = min(X.shape[0] for X in classes)
    out = []
    for j, X in enumerate(classes):
        if X.shape[0] == n:
            out.append(np.asarray(X, dtype=float))
        else:
            idx = substream(seed, "subsample", j).choice(X.shape[0], n, replace=False)
            out.append(np.asarray(X, dtype=float)[np.sort(idx)])
    return np.stack(out)


def _as_stack(dataset, seed=0):
    if isinstance(dataset, np.ndarray) and dataset.ndim == 3:
        return dataset
    return equalize(list(dataset), seed)


def _sorted_residuals(Xs, Q, w):
    P = Xs @ Q                                   # (k, n, m)
    order = np.argsort(P, axis=1, kind="stable")
    Ps = np.take_along_axis(P, order, axis=1)
    Y = np.tensordot(w, Ps, axes=1)              # (n, m)
    return Ps - Y, order


def _power_sum(R, w, p):
    k, n, m = R.shape
    per_class = (np.abs(R) ** p).sum(axis=(1, 2))
    return float(np.dot(w, per_class) / (m * n))


def mswd_objective(dataset, Q, weights=None, p=2.0, seed=0):
    """Weighted sliced distance of the classes to their sorted barycenter.

    ``(sum_j w_j/m sum_l 1/n sum_i |(X_j q_l)_[i] - Y_[i],l|^p)^(1/p)`` where
    ``Y`` is the weighted average of the sorted projections.
    """
    Xs = _as_stack(dataset, seed)
    w = check_weights(weights, Xs.shape[0])
    R, _ = _sorted_residuals(Xs, np.asarray(Q, dtype=float), w)
    return _power_sum(R, w, p) ** (1.0 / p)


def mswd_gradient(dataset, Q, weights=None, p=2.0, seed=0):
    """Gradient of :func:`mswd_objective` in Q with the sort order held fixed."""
    Xs = _as_stack(dataset, seed)
    k, n, d = Xs.shape
    Q = np.asarray(Q, dtype=float)
    m = Q.shape[1]
    w = check_weights(weights, k)
    R, order = _sorted_residuals(Xs, Q, w)
    S = _power_sum(R, w, p)
    if S == 0.0:
        return np.zeros_like(Q)
    G = (w[:, None, None] / (m * n)) * p * np.abs(R) ** (p - 1) * np.sign(R)
    D = G - w[:, None, None] * G.sum(axis=0)     # chain rule through Y
    unsorted = np.empty_like(D)
    np.put_along_axis(unsorted, order, D, axis=1)
    grad_S = np.einsum("jnd,jnm->dm", Xs, unsorted)
    return (S ** (1.0 / p - 1.0) / p) * grad_S


def find_mswd_frame(dataset, weights=None, m=None, config=None, seed=0,
                    callback=None):
    """Maximize the mSWD objective over d x m orthonormal frames.

    Projected gradient ascent: step along the Euclidean gradient, project
    back with the polar factor, and halve the step until the objective
    strictly increases.

    Parameters
    ----------
    callback : callable, optional
        Called as ``callback(iteration, Q, objective)`` for the initial frame
        and every accepted iterate.

    Returns
    -------
    Q : ndarray of shape (d, m)
        Best frame found.
    """
    cfg = config or MswdConfig()
    Xs = _as_stack(dataset, seed)
    k, _, d = Xs.shape
    m = d if m is None else m
    w = check_weights(weights, k)
    Q = random_frame(d, m, seed)
    obj = mswd_objective(Xs, Q, w, cfg.p)
    if callback is not None:
        callback(0, Q, obj)
    for it in range(1, cfg.max_iter + 1):
        G = mswd_gradient(Xs, Q, w, cfg.p)
        if not np.any(G):
            break
        step = cfg.step
        for _ in range(cfg.max_halvings):
            cand = polar(Q + step * G)
            cand_obj = mswd_objective(Xs, cand, w, cfg.p)
            if cand_obj > obj:
                break
            step *= cfg.shrink
        else:
            break
        improvement = (cand_obj - obj) / max(abs(obj), 1e-300)
        Q, obj = cand, cand_obj
        if callback is not None:
            callback(it, Q, obj)
        if improvement < cfg.tol:
            break
    return Q


class NbLayerMap(InvertibleMap):
    """``x -> x + Q (t(Q^T x) - Q^T x)`` with coordinate-wise 1D maps ``t``."""

    def __init__(self, Q, maps):
        self.Q = Q
        self.maps = tuple(maps)

    def forward(self, X):
        X = np.asarray(X, dtype=float)
        Z = X @ self.Q
        T = np.column_stack([t.forward(Z[:, l]) for l, t in enumerate(self.maps)])
        return self._lift(X, T, Z)

    def _lift(self, X, T, Z):
        if self.Q.shape[0] == self.Q.shape[1]:
            # no complement to carry along
            return T @ self.Q.T
        return X + (T - Z) @ self.Q.T

    def inverse(self, Y):
        Y = np.asarray(Y, dtype=float)
        Z = Y @ self.Q
        T = np.column_stack([t.inverse(Z[:, l]) for l, t in enumerate(self.maps)])
        return self._lift(Y, T, Z)


class NbLayer(Layer):
    kind = "nb"

    def __init__(self, Q, densities, weights, frame_source="mswd", seed=0):
        """
        Parameters
        ----------
        Q : ndarray (d, m)
        densities : nested list, ``densities[l][j]`` is the
            :class:`UnivariateDensity` of class j along column l.
        weights : ndarray (k,)
        """
        self.Q = np.asarray(Q, dtype=float)
        self.densities = [list(col) for col in densities]
        self.weights = np.asarray(weights, dtype=float)
        self.frame_source = frame_source
        self.seed = seed
        k = len(self.densities[0])
        per_class = [[] for _ in range(k)]
        for col in self.densities:
            bary = barycenter_quantile(col, self.weights)
            for j, dens in enumerate(col):
                per_class[j].append(monge_1d(dens, bary))
        super().__init__([NbLayerMap(self.Q, maps) for maps in per_class])

    @property
    def m(self):
        return self.Q.shape[1]

    def to_dict(self):
        return {
            "kind": self.kind,
            "m": self.m,
            "frame_source": self.frame_source,
            "seed": self.seed,
            "Q": self.Q.ravel(order="F").tolist(),
            "d": self.Q.shape[0],
            "weights": self.weights.tolist(),
            "directions": [[dens.to_dict() for dens in col] for col in self.densities],
        }

    @classmethod
    def from_dict(cls, payload):
        d, m = int(payload["d"]), int(payload["m"])
        Q = np.array(payload["Q"], dtype=float).reshape((d, m), order="F")
        dens = [[UnivariateDensity.from_dict(p) for p in col]
                for col in payload["directions"]]
        return cls(Q, dens, np.array(payload["weights"], dtype=float),
                   payload["frame_source"], payload["seed"])


def fit_nb_layer(dataset, weights=None, frame="mswd", m=None, bins=40, alpha=1.0,
                 std_floor=1e-8, mswd=None, seed=0):
    """Fit one independent-components layer.

    ``frame`` is ``"mswd"``, ``"random"``, ``"identity"`` or an explicit
    d x m array. Densities are fitted on all samples; only the frame search
    subsamples classes to a common size.
    """
    classes = list(dataset)
    d = classes[0].shape[1]
    m = d if m is None else int(m)
    w = check_weights(weights, len(classes))
    if isinstance(frame, str):
        if frame == "mswd":
            Q = find_mswd_frame(classes, w, m, mswd, seed)
        elif frame == "random":
            Q = random_frame(d, m, seed)
        elif frame == "identity":
            Q = np.eye(d)[:, :m]
        else:
            raise ValueError("unknown frame source %r" % frame)
        source = frame
    else:
        Q = np.asarray(frame, dtype=float)
        source = "given"
    if not 1 <= Q.shape[1] <= d:
        raise ValueError("need 1 <= m <= d")
    densities = []
    for l in range(Q.shape[1]):
        q = Q[:, l]
        densities.append([fit_univariate_density(X @ q, bins, alpha, std_floor)
                          for X in classes])
    return NbLayer(Q, densities, w, source, seed)
