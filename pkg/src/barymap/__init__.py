"""Invertible maps from several sample distributions to their shared
Wasserstein barycenter, built from closed-form symmetric Monge layers."""

from .base import (BarymapError, ConvergenceError, DataError, FitError,
                   InvertibleMap, LabeledDataset)
from .datasets import GeneratorSpec, generate, generate_split, load_csv, write_csv
from .flow import (FlowModel, LayerConfig, ModelFormatError, UnsupportedLayerError,
                   fit_flow, flip, inverse_transform, load_model, save_model,
                   transform)
from .gaussian import (AffineMap, GaussianParams, estimate_gaussian,
                       fit_gaussian_layer, gaussian_barycenter, gaussian_monge_map,
                       matrix_sqrt_psd)
from .metrics import (SinkhornConfig, convergence_trace, pairwise_flip_wd,
                      sinkhorn, sinkhorn_wd, transportation_cost)
from .nb import (MswdConfig, find_mswd_frame, fit_nb_layer, mswd_gradient,
                 mswd_objective, random_frame)
from .tree import (estimate_leaf_densities, fit_shared_tree, fit_tree_layer,
                   fit_tree_monge, hypercube_postprocess, hypercube_preprocess)
from .univariate import (Histogram1D, UnivariateDensity, barycenter_quantile,
                         empirical_histogram, fit_univariate_density,
                         histogram_barycenter, monge_1d, smoothed_histogram)

__version__ = "0.1.0"
