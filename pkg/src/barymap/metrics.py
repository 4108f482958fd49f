"""Evaluation metrics: transportation cost and Sinkhorn Wasserstein distance."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .base import check_samples, check_weights
from .flow import as_dataset, fit_flow, identity_model


@dataclass(frozen=True)
class SinkhornConfig:
    """Sinkhorn settings.

    ``eps_scaling`` in (0, 1) turns on annealing: the regularization starts
    at the largest ground cost and shrinks by this factor per stage until
    it reaches ``eps``, warm-starting each stage from the previous
    potentials. Only the last stage runs at ``eps`` to ``tol``, so the
    fixed point is unchanged; small ``eps`` just gets there in far fewer
    iterations. ``None`` runs plain Sinkhorn at ``eps``.
    """

    eps: float = 0.1
    max_iter: int = 100
    tol: float = 1e-9
    eps_scaling: float = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.eps_scaling is not None and not 0 < self.eps_scaling < 1:
            raise ValueError("eps_scaling must lie in (0, 1)")


@dataclass
class SinkhornResult:
    cost: float
    plan: np.ndarray
    n_iter: int
    residual: float


# refresh the log potentials once a scaling leaves [e^-50, e^50]
_ABSORB = 50.0


def _lse(M, axis):
    mx = M.max(axis=axis, keepdims=True)
    out = np.log(np.exp(M - mx).sum(axis=axis, keepdims=True)) + mx
    return out.squeeze(axis)


def squared_distances(X, Y):
    C = (X ** 2).sum(1)[:, None] + (Y ** 2).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.maximum(C, 0.0)


# intermediate annealing stages stop at this residual or iteration count
_STAGE_TOL = 1e-4
_STAGE_ITER = 200


def _scaling_loop(C, f, g, eps, max_iter, tol, warm):
    """Sinkhorn scalings at one ``eps`` starting from potentials ``f, g``.

    With ``warm=False`` the potentials were just produced by exact half
    steps at this ``eps``, so the first iteration only measures.
    """
    n, m = C.shape
    a, b = 1.0 / n, 1.0 / m
    K = np.exp((f[:, None] + g[None, :] - C) / eps)
    u, v = np.ones(n), np.ones(m)
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        if warm or it > 1:
            u = a / (K @ v)
            v = b / (K.T @ u)
        # columns are exact after the v-update; measure the rows
        residual = float(np.abs(u * (K @ v) - a).sum())
        if residual < tol:
            break
        if max(np.abs(np.log(u)).max(), np.abs(np.log(v)).max()) > _ABSORB:
            f, g = f + eps * np.log(u), g + eps * np.log(v)
            K = np.exp((f[:, None] + g[None, :] - C) / eps)
            u, v = np.ones(n), np.ones(m)
    return f, g, u, v, K, it, residual


def _eps_stages(C, cfg):
    if cfg.eps_scaling is None:
        return [cfg.eps]
    stages, e = [], float(C.max())
    while e > cfg.eps:
        stages.append(e)
        e *= cfg.eps_scaling
    return stages + [cfg.eps]


def sinkhorn(X, Y, config=None):
    """Entropic OT between uniform empirical measures.

    Log-stabilized scaling: the dual potentials ``f, g`` live in the log
    domain and are refreshed whenever the multiplicative scalings ``u, v``
    drift far from 1, so no kernel entry overflows or the whole row
    underflows. Iterates until the row-marginal residual (L1) drops below
    ``config.tol`` or ``config.max_iter`` iterations run. The returned cost
    is ``<P, C>`` with squared Euclidean ground cost; the entropy term is
    not included.
    """
    cfg = config or SinkhornConfig()
    X = check_samples(X, name="X")
    Y = check_samples(Y, X.shape[1], name="Y")
    n, m = X.shape[0], Y.shape[0]
    C = squared_distances(X, Y)
    if n == 1 or m == 1:
        P = np.full((n, m), 1.0 / (n * m))
        return SinkhornResult(float((P * C).sum()), P, 0, 0.0)
    stages = _eps_stages(C, cfg)
    eps = stages[0]
    # the first two half steps run in the log domain, which leaves a kernel
    # with no empty row or column
    f = eps * (-np.log(n) - _lse(-C / eps, axis=1))
    g = eps * (-np.log(m) - _lse((f[:, None] - C) / eps, axis=0))
    used = 0
    for s, eps in enumerate(stages):
        last = s == len(stages) - 1
        budget = max(cfg.max_iter - used, 1) if last else min(_STAGE_ITER, cfg.max_iter)
        tol = cfg.tol if last else max(cfg.tol, _STAGE_TOL)
        f, g, u, v, K, it, residual = _scaling_loop(C, f, g, eps, budget, tol, warm=s > 0)
        used += it
        if not last:
            f, g = f + eps * np.log(u), g + eps * np.log(v)
    P = u[:, None] * K * v[None, :]
    return SinkhornResult(float((P * C).sum()), P, used, residual)


def sinkhorn_wd(X, Y, config=None):
    """Transport cost of the entropic plan between two sample sets."""
    return sinkhorn(X, Y, config).cost


def transportation_cost(dataset, model, weights=None):
    """Weighted mean squared displacement ``sum_j w_j/n_j sum ||x - T_j(x)||^2``."""
    data = as_dataset(dataset)
    w = check_weights(model.weights if weights is None else weights, data.k)
    total = 0.0
    for j, X in enumerate(data):
        diff = X - model.transform(j, X)
        total += w[j] * float(np.mean(np.sum(diff ** 2, axis=1)))
    return total


def flipped_samples(dataset, model):
    """``out[j][jp]`` holds class ``jp`` test samples mapped into class ``j``."""
    data = as_dataset(dataset)
    latent = [model.transform(j, X) for j, X in enumerate(data)]
    return [[None if jp == j else model.inverse_transform(j, latent[jp])
             for jp in range(data.k)] for j in range(data.k)]


def pairwise_flip_wd(dataset, model, config=None, return_terms=False, threads=1):
    """Average Sinkhorn cost between real class-j samples and every other
    class flipped into class j, over all k^2 - k ordered pairs.

    With ``threads > 1`` the pair terms run concurrently; they are still
    averaged in a fixed order.
    """
    data = as_dataset(dataset)
    fake = flipped_samples(data, model)
    pairs = [(j, jp) for j in range(data.k) for jp in range(data.k) if jp != j]

    def term(pair):
        j, jp = pair
        return sinkhorn_wd(data[j], fake[j][jp], config)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            terms = dict(zip(pairs, pool.map(term, pairs)))
    else:
        terms = {pair: term(pair) for pair in pairs}
    value = float(np.mean([terms[key] for key in sorted(terms)]))
    return (value, terms) if return_terms else value


def convergence_trace(train, test, weights=None, schedule=(), config=None, seed=0,
                      with_wd=True, threads=1):
    """Fit a flow and record ``(layer, wd, tc, wall_time_ms)`` after every
    layer on held-out data, starting with the identity at layer 0."""
    test = as_dataset(test)
    t0 = time.perf_counter()
    rows = []

    def record(l, model):
        wd = pairwise_flip_wd(test, model, config, threads=threads) if with_wd else float("nan")
        tc = transportation_cost(test, model)
        rows.append((l, wd, tc, 1000.0 * (time.perf_counter() - t0)))

    train = as_dataset(train)
    record(0, identity_model(train.d, train.k, weights))
    model = fit_flow(train, weights, schedule, seed, callback=record)
    return rows, model
