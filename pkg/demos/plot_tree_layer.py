r"""
A shared density tree
=====================

One tree layer on the circles data. The classes share a Gini tree over
the unit square (after a Gaussian CDF squeeze); each class differs only
in its smoothed leaf densities. Every internal node then moves the
classes' mass split along its split coordinate onto a common one.
"""

import matplotlib.pyplot as plt
import numpy as np

from barymap import generate_split
from barymap.tree import fit_tree_layer, hypercube_preprocess, node_masses

train, test = generate_split("circles", seed=1, n_train=1000, n_test=500)
layer = fit_tree_layer(train, max_leaf_nodes=10, kappa=0.9)
tree = layer.tree

print("leaves:", tree.n_leaves)
print("leaf densities (rows are classes):")
print(np.round(layer.leaf_densities, 3))
print("class masses of the internal nodes:")
print(np.round(node_masses(tree, layer.leaf_densities)[:, tree.internal], 3))

###############################################################################
# Leaf boxes drawn in the squeezed coordinates, with the data before and
# after one layer.

fig, axes = plt.subplots(1, 2, figsize=(9, 4.5))
for j, X in enumerate(test):
    axes[0].scatter(*hypercube_preprocess(X).T, s=2)
    axes[1].scatter(*hypercube_preprocess(layer.maps[j].forward(X)).T, s=2)
for i in tree.leaves:
    lo, hi = tree.nodes[i].lo, tree.nodes[i].hi
    axes[0].add_patch(plt.Rectangle(lo, *(hi - lo), fill=False, lw=0.8))
axes[0].set_title("leaves of the shared tree")
axes[1].set_title("after one tree layer")
for ax in axes:
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
plt.show()
