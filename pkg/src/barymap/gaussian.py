"""Gaussian symmetric Monge layer.

Each class is summarized by its sample mean and (regularized) MLE
covariance. The barycenter covariance is the positive definite fixed point
of ``Psi(C) = sum_j w_j (C^1/2 C_j C^1/2)^1/2`` and each class is sent to it
by the affine Monge map ``x -> m_bary + A_j (x - m_j)`` with ``A_j C_j A_j =
C_bary``.
"""

from dataclasses import dataclass

import numpy as np

from .base import (ConvergenceError, FitError, InvertibleMap, Layer,
                   check_samples, check_weights)


@dataclass(frozen=True)
class GaussianParams:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def d(self):
        return self.mean.shape[0]


def estimate_gaussian(X, reg=1e-6):
    """Sample mean and 1/n covariance plus ``reg * I``."""
    X = check_samples(X)
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    cov = 0.5 * (cov + cov.T) + reg * np.eye(X.shape[1])
    return GaussianParams(mean, cov)


def _sym_eig(C, tol=1e-10):
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (C.shape,))
    scale = max(np.abs(C).max(), 1.0)
    if np.abs(C - C.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric")
    return np.linalg.eigh(0.5 * (C + C.T))


def matrix_sqrt_psd(C):
    """Symmetric PSD square root; eigenvalues down to -1e-10 are clipped to 0."""
    vals, vecs = _sym_eig(C)
    if vals.min() < -1e-10 * max(1.0, vals.max()):
        raise ValueError("matrix is not positive semidefinite (min eig %g)"
                         % vals.min())
    S = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return 0.5 * (S + S.T)


def _sqrt_and_inv_sqrt(C):
    vals, vecs = _sym_eig(C)
    if vals.min() <= 0:
        raise FitError("covariance is singular (min eig %g)" % vals.min())
    r = np.sqrt(vals)
    S = (vecs * r) @ vecs.T
    Si = (vecs / r) @ vecs.T
    return 0.5 * (S + S.T), 0.5 * (Si + Si.T)


def psi(C, covs, weights):
    """The barycenter fixed-point operator."""
    S = matrix_sqrt_psd(C)
    out = np.zeros_like(C)
    for w, Cj in zip(weights, covs):
        out += w * matrix_sqrt_psd(S @ Cj @ S)
    return 0.5 * (out + out.T)


def psi_residual(C, covs, weights):
    return np.linalg.norm(psi(C, covs, weights) - C) / np.linalg.norm(C)


def gaussian_barycenter(params, weights=None, tol=1e-9, max_iter=200):
    """Wasserstein barycenter of Gaussians.

    Iterates ``C <- C^-1/2 Psi(C)^2 C^-1/2`` from ``sum_j w_j C_j`` until the
    relative fixed-point residual of ``Psi`` drops below ``tol``.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` iterations do not reach ``tol``; the residual is
        attached to the exception.
    """
    params = list(params)
    w = check_weights(weights, len(params))
    first = params[0]
    if all(np.array_equal(p.mean, first.mean) and np.array_equal(p.cov, first.cov)
           for p in params[1:]):
        return GaussianParams(first.mean.copy(), first.cov.copy())

    mean = sum(wj * p.mean for wj, p in zip(w, params))
    covs = [p.cov for p in params]
    C = sum(wj * Cj for wj, Cj in zip(w, covs))
    C = 0.5 * (C + C.T)
    for _ in range(max_iter):
        S, Si = _sqrt_and_inv_sqrt(C)
        P = np.zeros_like(C)
        for wj, Cj in zip(w, covs):
            P += wj * matrix_sqrt_psd(S @ Cj @ S)
        P = 0.5 * (P + P.T)
        if np.linalg.norm(P - C) / np.linalg.norm(C) < tol:
            return GaussianParams(mean, C)
        C = Si @ P @ P @ Si
        C = 0.5 * (C + C.T)
    res = psi_residual(C, covs, w)
    if res < tol:
        return GaussianParams(mean, C)
    raise ConvergenceError(
        "barycenter fixed point did not converge in %d iterations "
        "(residual %.3g)" % (max_iter, res), res)


class AffineMap(InvertibleMap):
    """``x -> m_bary + A (x - m_src)`` with symmetric positive definite A."""

    def __init__(self, A, src_mean, dst_mean):
        self.A = np.asarray(A, dtype=float)
        self.src_mean = np.asarray(src_mean, dtype=float)
        self.dst_mean = np.asarray(dst_mean, dtype=float)
        self.A_inv = np.linalg.inv(self.A)
        self.is_identity = (np.array_equal(self.A, np.eye(self.A.shape[0]))
                            and np.array_equal(self.src_mean, self.dst_mean))

    def forward(self, X):
        if self.is_identity:
            return np.array(X, dtype=float)
        return self.dst_mean + (np.asarray(X, dtype=float) - self.src_mean) @ self.A.T

    def inverse(self, Z):
        if self.is_identity:
            return np.array(Z, dtype=float)
        return self.src_mean + (np.asarray(Z, dtype=float) - self.dst_mean) @ self.A_inv.T

    def push_params(self, params):
        """Analytic pushforward of a Gaussian under this map."""
        mean = self.dst_mean + self.A @ (params.mean - self.src_mean)
        return GaussianParams(mean, self.A @ params.cov @ self.A.T)


def gaussian_monge_map(class_params, bary):
    """Affine Monge map sending ``class_params`` onto ``bary``.

    ``A = C_j^-1/2 (C_j^1/2 C_bary C_j^1/2)^1/2 C_j^-1/2`` is the unique
    symmetric PD solution of ``A C_j A = C_bary``.
    """
    Cj, Cb = class_params.cov, bary.cov
    if np.array_equal(Cj, Cb):
        A = np.eye(Cj.shape[0])
    else:
        if np.linalg.eigvalsh(0.5 * (Cb + Cb.T)).min() <= 0:
            raise FitError("barycenter covariance is singular")
        S, Si = _sqrt_and_inv_sqrt(Cj)
        A = Si @ matrix_sqrt_psd(S @ Cb @ S) @ Si
        A = 0.5 * (A + A.T)
    return AffineMap(A, class_params.mean, bary.mean)


class GaussianLayer(Layer):
    kind = "gaussian"

    def __init__(self, maps, class_params=None, bary=None):
        super().__init__(maps)
        self.class_params = class_params
        self.bary = bary

    @classmethod
    def from_params(cls, params, weights=None, tol=1e-9, max_iter=200):
        bary = gaussian_barycenter(params, weights, tol=tol, max_iter=max_iter)
        maps = [gaussian_monge_map(p, bary) for p in params]
        return cls(maps, list(params), bary)

    def to_dict(self):
        return {
            "kind": self.kind,
            "per_class": [{"m_j": m.src_mean.tolist(), "A": m.A.tolist(),
                           "m_bary": m.dst_mean.tolist()} for m in self.maps],
        }

    @classmethod
    def from_dict(cls, payload):
        maps = [AffineMap(np.array(p["A"], dtype=float), np.array(p["m_j"], dtype=float),
                          np.array(p["m_bary"], dtype=float))
                for p in payload["per_class"]]
        return cls(maps)


def fit_gaussian_layer(dataset, weights=None, reg=1e-6, tol=1e-9, max_iter=200):
    """Fit one Gaussian layer: per-class Gaussians, barycenter, affine maps."""
    params = [estimate_gaussian(X, reg) for X in dataset]
    return GaussianLayer.from_params(params, weights, tol=tol, max_iter=max_iter)


def gaussian_w2_squared(p, q):
    """Closed-form squared 2-Wasserstein distance between two Gaussians."""
    Sq = matrix_sqrt_psd(q.cov)
    cross = matrix_sqrt_psd(Sq @ p.cov @ Sq)
    return float(np.sum((p.mean - q.mean) ** 2)
                 + np.trace(p.cov + q.cov - 2.0 * cross))
