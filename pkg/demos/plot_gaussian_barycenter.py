r"""
Gaussian barycenter and affine maps
===================================

Three 2D Gaussian classes are mapped onto their Wasserstein barycenter
with one affine map each. The transport cost measured on held-out samples
is compared with the closed-form value.
"""

import matplotlib.pyplot as plt
import numpy as np

from barymap import LayerConfig, fit_flow, generate_split, transportation_cost
from barymap.datasets import GAUSSIAN_COVS, GAUSSIAN_MEANS
from barymap.gaussian import GaussianParams, gaussian_barycenter, gaussian_w2_squared

train, test = generate_split("gaussians", seed=0)
model = fit_flow(train, schedule=[LayerConfig("gaussian")])

###############################################################################
# The closed-form cost uses the true class parameters.

params = [GaussianParams(np.array(m), np.array(c)) for m, c in zip(GAUSSIAN_MEANS, GAUSSIAN_COVS)]
bary = gaussian_barycenter(params)
analytic = np.mean([gaussian_w2_squared(p, bary) for p in params])
print("barycenter mean", bary.mean)
print("barycenter covariance\n", bary.cov)
print("test transport cost %.4f, closed form %.4f" % (transportation_cost(test, model), analytic))

###############################################################################
# Left: the classes. Right: every class pushed onto the barycenter.

fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharex=True, sharey=True)
for j, X in enumerate(test):
    axes[0].scatter(*X.T, s=2, label="class %d" % j)
    axes[1].scatter(*model.transform(j, X).T, s=2)
axes[0].set_title("classes")
axes[1].set_title("mapped to the barycenter")
axes[0].legend(markerscale=5)
for ax in axes:
    ax.set_aspect("equal")
plt.show()
