import numpy as np
import pytest

from barymap.base import DataError
from barymap.tree import (SharedTree, TreeLayer, TreeNode, estimate_leaf_densities,
                          fit_shared_tree, fit_tree_layer, fit_tree_monge,
                          hypercube_postprocess, hypercube_preprocess, node_masses)
from barymap.datasets import generate_split


def gini_scan_oracle(x, y):
    """Threshold maximizing the weighted Gini decrease, by brute force."""
    best, best_t = -np.inf, None
    vals = np.unique(x)
    for a, b in zip(vals[:-1], vals[1:]):
        t = 0.5 * (a + b)
        score = 0.0
        for side in (x <= t, x > t):
            p = np.bincount(y[side], minlength=2) / side.sum()
            score -= side.sum() * (1 - np.sum(p ** 2))
        if score > best:
            best, best_t = score, t
    return best_t


def one_split_tree():
    root = TreeNode(np.zeros(1), np.ones(1), 0, dim=0, threshold=0.5, left=1, right=2)
    return SharedTree([root, TreeNode(np.zeros(1), np.array([0.5]), 1),
                       TreeNode(np.array([0.5]), np.ones(1), 1)])


def test_one_dimensional_split_near_half(rng):
    a, b = rng.uniform(0, 0.5, (2000, 1)), rng.uniform(0.5, 1, (2000, 1))
    tree = fit_shared_tree([a, b], max_leaf_nodes=2)
    t = tree.nodes[0].threshold
    assert 0.49 <= t <= 0.51
    x = np.concatenate([a, b])[:, 0]
    y = np.repeat([0, 1], 2000)
    assert t == pytest.approx(gini_scan_oracle(x, y))


def test_split_matches_oracle_on_overlapping_classes(rng):
    a, b = rng.beta(2, 5, (300, 1)), rng.beta(5, 2, (300, 1))
    tree = fit_shared_tree([a, b], max_leaf_nodes=2)
    x = np.concatenate([a, b])[:, 0]
    assert tree.nodes[0].threshold == pytest.approx(gini_scan_oracle(x, np.repeat([0, 1], 300)))


def test_identical_classes_single_leaf(rng):
    X = rng.uniform(size=(200, 2))
    assert fit_shared_tree([X, X.copy()]).n_leaves == 1


def test_leaf_cap_on_circles():
    train, _ = generate_split("circles", seed=0, n_train=500, n_test=10)
    U = [hypercube_preprocess(X) for X in train]
    tree = fit_shared_tree(U, max_leaf_nodes=10)
    assert tree.n_leaves <= 10
    # children partition their parents
    for n in tree.nodes:
        if not n.is_leaf:
            L, R = tree.nodes[n.left], tree.nodes[n.right]
            assert L.volume + R.volume == pytest.approx(n.volume)


def test_rejects_data_outside_cube():
    with pytest.raises(DataError):
        fit_shared_tree([np.array([[1.5]]), np.array([[0.2]])])


def test_leaf_density_examples():
    tree = one_split_tree()
    left_only = [np.full((10, 1), 0.2), np.full((10, 1), 0.8)]
    c = estimate_leaf_densities(tree, left_only, kappa=0.9)
    np.testing.assert_allclose(c[0], [1.1, 0.9])
    np.testing.assert_allclose(estimate_leaf_densities(tree, left_only, kappa=1.0), 1.0)
    with pytest.raises(ValueError):
        estimate_leaf_densities(tree, left_only, kappa=0.0)


def test_leaf_densities_integrate_to_one(rng):
    train, _ = generate_split("moons", seed=1, n_train=400, n_test=10)
    U = [hypercube_preprocess(X) for X in train]
    tree = fit_shared_tree(U)
    c = estimate_leaf_densities(tree, U, 0.9)
    vols = np.array([tree.nodes[i].volume for i in tree.leaves])
    np.testing.assert_allclose(c @ vols, 1.0, atol=1e-10)


def test_kappa_to_zero_maps_are_quarter_shifts():
    tree = one_split_tree()
    c = estimate_leaf_densities(tree, [np.full((5, 1), 0.2), np.full((5, 1), 0.8)], kappa=1e-9)
    maps, _ = fit_tree_monge(tree, c, [0.5, 0.5], preprocess=False)
    # the outer box edges stay fixed, the shift holds on the half-open halves
    xl, xr = np.linspace(0.0, 0.5, 11)[1:, None], np.linspace(0.5, 1.0, 11)[:-1, None]
    np.testing.assert_allclose(maps[0].forward(xl), xl + 0.25, atol=1e-6)
    np.testing.assert_allclose(maps[1].forward(xr), xr - 0.25, atol=1e-6)


def pushed_cdf(c_row, T, z):
    # class CDF under the one-split model evaluated at T^-1(z)
    x = T.inverse(np.asarray(z, float)[:, None])[:, 0]
    return np.where(x <= 0.5, c_row[0] * x, 0.5 * c_row[0] + c_row[1] * (x - 0.5))


@pytest.mark.parametrize("kappa", [0.9, 0.3, 1e-3])
@pytest.mark.parametrize("weight_mode", ["weighted", "mass"])
def test_one_split_pushforward_agrees(kappa, weight_mode, rng):
    tree = one_split_tree()
    data = [rng.uniform(0, 0.7, (200, 1)), rng.beta(5, 1, (300, 1))]
    c = estimate_leaf_densities(tree, data, kappa)
    maps, _ = fit_tree_monge(tree, c, [0.3, 0.7], weight_mode, preprocess=False)
    z = np.linspace(0, 1, 201)
    np.testing.assert_allclose(pushed_cdf(c[0], maps[0], z), pushed_cdf(c[1], maps[1], z), atol=1e-8)


def test_identical_densities_give_identity(rng):
    train, _ = generate_split("moons", seed=2, n_train=300, n_test=10)
    tree = fit_shared_tree([hypercube_preprocess(X) for X in train])
    c = np.ones((2, tree.n_leaves))
    maps, node_maps = fit_tree_monge(tree, c)
    assert node_maps == {}
    X = train[0]
    np.testing.assert_allclose(maps[0].forward(X), X, atol=1e-10)


def test_node_masses_root_is_one(rng):
    train, _ = generate_split("moons", seed=3, n_train=300, n_test=10)
    U = [hypercube_preprocess(X) for X in train]
    tree = fit_shared_tree(U)
    P = node_masses(tree, estimate_leaf_densities(tree, U))
    np.testing.assert_allclose(P[:, 0], 1.0, atol=1e-12)


def test_node_barycenter_edge_bound(rng):
    train, _ = generate_split("moons", seed=4, n_train=300, n_test=10)
    layer = fit_tree_layer(train)
    for f in [s[3] for m in layer.maps for s in m.steps]:
        # every node solves a 2-bin problem for k classes: at most 3k edges
        assert f.xs.size <= 3 * len(layer.maps)


def test_layer_invertible_and_serializable(rng):
    train, test = generate_split("moons", seed=5, n_train=400, n_test=200)
    layer = fit_tree_layer(train)
    back = TreeLayer.from_dict(layer.to_dict())
    for T, B, X in zip(layer.maps, back.maps, test):
        np.testing.assert_allclose(T.inverse(T.forward(X)), X, atol=1e-6)
        np.testing.assert_array_equal(T.forward(X), B.forward(X))


def test_hypercube_processors():
    assert hypercube_preprocess(np.zeros(3)).tolist() == [0.5] * 3
    assert hypercube_preprocess(-1.96) == pytest.approx(0.025, abs=1e-4)
    assert hypercube_postprocess(hypercube_preprocess(1.7)) == pytest.approx(1.7, abs=1e-9)
    assert np.isfinite(hypercube_postprocess(np.array([0.0, 1.0]))).all()
