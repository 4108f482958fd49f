"""Shared decision-tree density layer.

All classes share one axis-aligned tree over the unit hypercube (grown as
a Gini classifier over class labels) and differ only in their constant
leaf densities. The layer map is built bottom-up: every internal node
contributes a monotone piecewise-linear map of its split coordinate that
moves each class's two-child mass split onto the node barycenter. A node
map acts only on points inside the node's box and maps that box onto
itself, so the composite is a bijection.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .base import DataError, InvertibleMap, Layer, check_weights
from .univariate import (Histogram1D, PiecewiseLinearMap, barycenter_quantile,
                         monge_1d)

_CLIP = 1e-12


@dataclass
class TreeNode:
    lo: np.ndarray
    hi: np.ndarray
    depth: int
    dim: int = -1
    threshold: float = np.nan
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self):
        return self.left < 0

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def contains(self, X):
        return np.all((X >= self.lo) & (X <= self.hi), axis=1)


@dataclass
class SharedTree:
    """Binary partition of the unit hypercube; ``nodes[0]`` is the root."""

    nodes: list = field(default_factory=list)

    @property
    def leaves(self):
        return [i for i, n in enumerate(self.nodes) if n.is_leaf]

    @property
    def internal(self):
        return [i for i, n in enumerate(self.nodes) if not n.is_leaf]

    @property
    def n_leaves(self):
        return len(self.leaves)

    def apply(self, X):
        """Index (into :attr:`leaves`) of the leaf containing each row of X."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        for i, n in enumerate(self.nodes):
            if n.is_leaf:
                continue
            here = node == i
            go_left = X[:, n.dim] <= n.threshold
            node[here & go_left] = n.left
            node[here & ~go_left] = n.right
        lookup = {leaf: l for l, leaf in enumerate(self.leaves)}
        return np.array([lookup[i] for i in node], dtype=int)

    def descendant_leaves(self, i):
        """Positions in :attr:`leaves` of all leaves below node ``i``."""
        lookup = {leaf: l for l, leaf in enumerate(self.leaves)}
        out, stack = [], [i]
        while stack:
            n = stack.pop()
            if self.nodes[n].is_leaf:
                out.append(lookup[n])
            else:
                stack.extend([self.nodes[n].right, self.nodes[n].left])
        return sorted(out)

    def to_dict(self):
        return [{"lo": n.lo.tolist(), "hi": n.hi.tolist(), "depth": n.depth,
                 "dim": n.dim, "threshold": None if n.is_leaf else n.threshold,
                 "left": n.left, "right": n.right} for n in self.nodes]

    @classmethod
    def from_dict(cls, payload):
        nodes = [TreeNode(np.array(p["lo"], dtype=float), np.array(p["hi"], dtype=float),
                          int(p["depth"]), int(p["dim"]),
                          np.nan if p["threshold"] is None else float(p["threshold"]),
                          int(p["left"]), int(p["right"])) for p in payload]
        return cls(nodes)


def _best_split(X, y, k, min_samples_leaf):
    """Exhaustive Gini scan; returns (gain, dim, threshold) or None."""
    n = X.shape[0]
    total = np.bincount(y, minlength=k).astype(float)
    base = np.dot(total, total) / n
    best = None
    for s in range(X.shape[1]):
        order = np.argsort(X[:, s], kind="stable")
        vals = X[order, s]
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]      # row i: first i+1 samples
        nl = np.arange(1, n, dtype=float)
        right = total - left
        gain = ((left ** 2).sum(axis=1) / nl
                + (right ** 2).sum(axis=1) / (n - nl) - base)
        ok = (vals[1:] > vals[:-1]) & (nl >= min_samples_leaf) & (n - nl >= min_samples_leaf)
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))
        if best is None or gain[i] > best[0]:
            best = (float(gain[i]), s, 0.5 * (vals[i] + vals[i + 1]))
    return best


def fit_shared_tree(dataset, max_leaf_nodes=10, min_samples_leaf=1, min_gain=1e-9):
    """Grow a best-first Gini classification tree over class labels.

    The leaf with the largest impurity decrease is split first; growth
    stops at ``max_leaf_nodes`` leaves or when no split decreases impurity.
    Data must lie in the unit hypercube.
    """
    classes = [np.asarray(X, dtype=float) for X in dataset]
    X = np.concatenate(classes)
    if X.size and (X.min() < 0 or X.max() > 1):
        raise DataError("tree data must lie in the unit hypercube")
    y = np.concatenate([np.full(len(c), j) for j, c in enumerate(classes)])
    k, d = len(classes), X.shape[1]
    tree = SharedTree([TreeNode(np.zeros(d), np.ones(d), 0)])
    members = {0: np.arange(X.shape[0])}
    candidates = {}

    def consider(i):
        idx = members[i]
        split = _best_split(X[idx], y[idx], k, min_samples_leaf) if idx.size > 1 else None
        if split is not None and split[0] > min_gain:
            candidates[i] = split

    consider(0)
    while tree.n_leaves < max_leaf_nodes and candidates:
        i = max(candidates, key=lambda c: (candidates[c][0], -c))
        _, s, t = candidates.pop(i)
        node = tree.nodes[i]
        left_hi, right_lo = node.hi.copy(), node.lo.copy()
        left_hi[s], right_lo[s] = t, t
        tree.nodes.append(TreeNode(node.lo.copy(), left_hi, node.depth + 1))
        tree.nodes.append(TreeNode(right_lo, node.hi.copy(), node.depth + 1))
        node.dim, node.threshold = s, t
        node.left, node.right = len(tree.nodes) - 2, len(tree.nodes) - 1
        idx = members.pop(i)
        goes_left = X[idx, s] <= t
        members[node.left], members[node.right] = idx[goes_left], idx[~goes_left]
        consider(node.left)
        consider(node.right)
    return tree


def estimate_leaf_densities(tree, dataset, kappa=0.9):
    """Leaf frequencies mixed with the uniform density.

    ``c[j, l] = (1 - kappa) n_jl / (n_j vol_l) + kappa``.
    """
    if not 0 <= kappa <= 1:
        raise ValueError("kappa must lie in [0, 1]")
    vols = np.array([tree.nodes[i].volume for i in tree.leaves])
    c = np.empty((len(dataset), len(vols)))
    for j, X in enumerate(dataset):
        X = np.asarray(X, dtype=float)
        counts = np.bincount(tree.apply(X), minlength=len(vols))
        if kappa == 0 and np.any(counts == 0):
            raise ValueError("kappa=0 with an empty leaf gives zero density")
        c[j] = (1 - kappa) * counts / (X.shape[0] * vols) + kappa
    return c


def hypercube_preprocess(X):
    return ndtr(np.asarray(X, dtype=float))


def hypercube_postprocess(U):
    return ndtri(np.clip(np.asarray(U, dtype=float), _CLIP, 1 - _CLIP))


class TreeMongeMap(InvertibleMap):
    """Sequence of node-restricted coordinate maps, applied deepest first."""

    def __init__(self, steps, preprocess=True):
        # steps: list of (lo, hi, dim, PiecewiseLinearMap)
        self.steps = tuple(steps)
        self.preprocess = preprocess

    def _in_box(self, U, lo, hi):
        return np.all((U >= lo) & (U <= hi), axis=1)

    def forward(self, X):
        U = hypercube_preprocess(X) if self.preprocess else np.array(X, dtype=float)
        for lo, hi, s, f in self.steps:
            mask = self._in_box(U, lo, hi)
            U[mask, s] = f.forward(U[mask, s])
        return hypercube_postprocess(U) if self.preprocess else U

    def inverse(self, Z):
        U = hypercube_preprocess(Z) if self.preprocess else np.array(Z, dtype=float)
        for lo, hi, s, f in reversed(self.steps):
            mask = self._in_box(U, lo, hi)
            U[mask, s] = f.inverse(U[mask, s])
        return hypercube_postprocess(U) if self.preprocess else U


def node_masses(tree, c):
    """``P[j, i]``: class-j mass of every node i under leaf densities c."""
    vols = np.array([tree.nodes[i].volume for i in tree.leaves])
    leaf_mass = c * vols
    P = np.zeros((c.shape[0], len(tree.nodes)))
    for i in range(len(tree.nodes)):
        P[:, i] = leaf_mass[:, tree.descendant_leaves(i)].sum(axis=1)
    return P


def node_histograms(tree, c, i):
    """Per-class 2-bin histograms of node ``i`` along its split coordinate."""
    node = tree.nodes[i]
    P = node_masses(tree, c)
    a, b = node.lo[node.dim], node.hi[node.dim]
    edges = [a, node.threshold, b]
    q = P[:, node.left] / P[:, i]
    return [Histogram1D.from_masses(edges, [qj, 1.0 - qj]) for qj in q], P[:, i]


def fit_tree_monge(tree, c, weights=None, weight_mode="weighted", preprocess=True):
    """Per-class composite maps built from node-level 2-bin Monge problems.

    Node weights are ``w_j P_j(v)`` normalized (``weight_mode="weighted"``)
    or ``P_j(v)`` normalized (``weight_mode="mass"``).

    Returns
    -------
    maps : list of TreeMongeMap
    node_maps : dict
        ``node_maps[i][j]`` is the 1D map of class j at internal node i.
    """
    k = c.shape[0]
    w = check_weights(weights, k)
    if np.any(c <= 0):
        raise ValueError("leaf densities must be positive")
    if weight_mode not in ("weighted", "mass"):
        raise ValueError("weight_mode must be 'weighted' or 'mass'")
    order = sorted(tree.internal, key=lambda i: (-tree.nodes[i].depth, i))
    node_maps = {}
    steps = [[] for _ in range(k)]
    for i in order:
        node = tree.nodes[i]
        hists, mass = node_histograms(tree, c, i)
        omega = w * mass if weight_mode == "weighted" else mass.copy()
        if omega.sum() <= 0:
            continue
        omega = omega / omega.sum()
        if all(np.array_equal(h.levels, hists[0].levels) for h in hists[1:]):
            continue
        bary = barycenter_quantile(hists, omega)
        node_maps[i] = [monge_1d(h, bary) for h in hists]
        for j in range(k):
            steps[j].append((node.lo, node.hi, node.dim, node_maps[i][j]))
    return [TreeMongeMap(s, preprocess) for s in steps], node_maps


class TreeLayer(Layer):
    kind = "tree"

    def __init__(self, maps, tree=None, leaf_densities=None, kappa=None,
                 weight_mode="weighted", preprocess=True, node_ids=None):
        super().__init__(maps)
        self.tree = tree
        self.leaf_densities = leaf_densities
        self.kappa = kappa
        self.weight_mode = weight_mode
        self.preprocess = preprocess
        self.node_ids = node_ids or []

    def to_dict(self):
        return {
            "kind": self.kind,
            "kappa": self.kappa,
            "preprocess": self.preprocess,
            "weight_mode": self.weight_mode,
            "nodes": self.tree.to_dict(),
            "leaf_densities": self.leaf_densities.tolist(),
            "node_order": list(self.node_ids),
            "per_class": [[{"xs": f.xs.tolist(), "ys": f.ys.tolist()}
                           for (_, _, _, f) in m.steps] for m in self.maps],
        }

    @classmethod
    def from_dict(cls, payload):
        tree = SharedTree.from_dict(payload["nodes"])
        ids = [int(i) for i in payload["node_order"]]
        maps = []
        for per_node in payload["per_class"]:
            steps = []
            for i, knots in zip(ids, per_node):
                n = tree.nodes[i]
                steps.append((n.lo, n.hi, n.dim,
                              PiecewiseLinearMap(knots["xs"], knots["ys"])))
            maps.append(TreeMongeMap(steps, bool(payload["preprocess"])))
        return cls(maps, tree, np.array(payload["leaf_densities"], dtype=float),
                   payload["kappa"], payload["weight_mode"],
                   bool(payload["preprocess"]), ids)


def fit_tree_layer(dataset, weights=None, max_leaf_nodes=10, min_samples_leaf=1,
                   kappa=0.9, preprocess=True, weight_mode="weighted"):
    """Fit one tree layer; data are mapped to the unit cube by the standard
    normal CDF first unless ``preprocess`` is False."""
    classes = [hypercube_preprocess(X) if preprocess else np.asarray(X, dtype=float)
               for X in dataset]
    tree = fit_shared_tree(classes, max_leaf_nodes, min_samples_leaf)
    c = estimate_leaf_densities(tree, classes, kappa)
    maps, node_maps = fit_tree_monge(tree, c, weights, weight_mode, preprocess)
    order = sorted(node_maps, key=lambda i: (-tree.nodes[i].depth, i))
    return TreeLayer(maps, tree, c, kappa, weight_mode, preprocess, order)
