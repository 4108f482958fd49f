r"""
Flipping moons with a stack of 1D layers
========================================

Fifteen independent-components layers, each on a frame chosen to
separate the classes, map both moons onto a shared latent distribution.
A sample is "flipped" to the other class by going to the latent space
with its own map and back with the other class's inverse.
"""

import matplotlib.pyplot as plt

from barymap import LayerConfig, convergence_trace, generate_split

train, test = generate_split("moons", seed=0, n_train=1000, n_test=500)
rows, model = convergence_trace(train, test, schedule=[LayerConfig("nb")] * 15, seed=0)

for layer, wd, tc, _ in rows:
    print("layer %2d  WD %.4f  TC %.4f" % (layer, wd, tc))

###############################################################################
# The distance between real and flipped test samples drops as layers are
# added, while the transport cost stays bounded.

fig, axes = plt.subplots(1, 4, figsize=(14, 3.5))
for j, X in enumerate(test):
    axes[0].scatter(*X.T, s=2)
    axes[1].scatter(*model.transform(j, X).T, s=2)
    axes[2].scatter(*model.flip(j, 1 - j, X).T, s=2)
axes[0].set_title("test data")
axes[1].set_title("shared latent space")
axes[2].set_title("flipped to the other class")
axes[3].plot([r[0] for r in rows], [r[1] for r in rows], "o-", label="WD")
axes[3].plot([r[0] for r in rows], [r[2] for r in rows], "s-", label="TC")
axes[3].set_xlabel("layers")
axes[3].legend()
plt.tight_layout()
plt.show()
