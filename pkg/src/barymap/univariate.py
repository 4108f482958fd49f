"""One-dimensional densities, quantiles, barycenters and Monge maps.

Two density types are supported:

* :class:`Histogram1D` -- piecewise-constant density on a bounded interval.
  Its CDF and quantile function are piecewise linear, so barycenters of
  histograms are again histograms and the Monge maps between them are
  piecewise linear.
* :class:`UnivariateDensity` -- a histogram on [0, 1] composed with a
  Gaussian-CDF preprocessor ``u = Phi((x - mean) / std)``, which gives a
  strictly increasing CDF on the whole real line.

For the composite type, maps are evaluated in the "Gaussianized"
coordinate ``t = Phi^-1(F(x))``, computed from whichever tail is closer so
that both tails keep full floating-point resolution.
"""

import numpy as np
from scipy.special import ndtr, ndtri

from .base import check_weights

# |t| beyond this saturates Phi in double precision
_T_MAX = 37.0
_TINY = 1e-300


def _phi(z):
    return ndtr(z)


def _phi_inv(u):
    return ndtri(np.clip(u, _TINY, 1.0))


class Histogram1D:
    """Piecewise-constant density.

    Parameters
    ----------
    edges : array of shape (B + 1,)
        Strictly increasing bin edges.
    densities : array of shape (B,)
        Positive per-unit-length densities; normalized to unit mass.
    """

    def __init__(self, edges, densities):
        edges = np.asarray(edges, dtype=float).ravel()
        densities = np.asarray(densities, dtype=float).ravel()
        if edges.size < 2 or densities.size != edges.size - 1:
            raise ValueError("need B + 1 edges for B densities")
        widths = np.diff(edges)
        if np.any(widths <= 0):
            raise ValueError("edges must be strictly increasing")
        if np.any(densities <= 0) or not np.all(np.isfinite(densities)):
            raise ValueError("densities must be finite and positive")
        masses = densities * widths
        total = masses.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError("histogram mass is %.17g, expected 1" % total)
        self.edges = edges
        self.densities = densities
        self.masses = masses / total
        levels = np.concatenate([[0.0], np.cumsum(self.masses)])
        levels[-1] = 1.0
        self.levels = levels

    @classmethod
    def from_masses(cls, edges, masses):
        edges = np.asarray(edges, dtype=float)
        masses = np.asarray(masses, dtype=float)
        masses = masses / masses.sum()
        return cls(edges, masses / np.diff(edges))

    @property
    def n_bins(self):
        return self.densities.size

    def cdf(self, x):
        return np.interp(x, self.edges, self.levels)

    def quantile(self, u):
        return np.interp(u, self.levels, self.edges)

    def mass_levels(self):
        return self.levels

    def reversed(self):
        """Mirror image ``x -> edges[0] + edges[-1] - x``; used for upper tails."""
        lo, hi = self.edges[0], self.edges[-1]
        edges = (hi - self.edges[::-1]) + lo
        return Histogram1D(edges, self.densities[::-1])

    def __repr__(self):
        return "Histogram1D(bins=%d, range=[%g, %g])" % (
            self.n_bins, self.edges[0], self.edges[-1])


class UnivariateDensity:
    """Histogram on [0, 1] behind a Gaussian-CDF preprocessor."""

    def __init__(self, pre_mean, pre_std, hist):
        if not pre_std > 0:
            raise ValueError("pre_std must be positive")
        if hist.edges[0] != 0.0 or hist.edges[-1] != 1.0:
            raise ValueError("histogram must live on [0, 1]")
        self.pre_mean = float(pre_mean)
        self.pre_std = float(pre_std)
        self.hist = hist
        self._rev = hist.reversed()

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.pre_mean) / self.pre_std
        return self.hist.cdf(_phi(z))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise ValueError("quantile levels must lie in (0, 1)")
        return self.pre_mean + self.pre_std * ndtri(self.hist.quantile(u))

    def mass_levels(self):
        return self.hist.levels

    def gaussianize(self, x):
        """``Phi^-1(F(x))`` evaluated from the nearer tail."""
        z = (np.asarray(x, dtype=float) - self.pre_mean) / self.pre_std
        t = np.empty_like(z)
        lo = z <= 0
        t[lo] = _phi_inv(self.hist.cdf(_phi(z[lo])))
        hi = ~lo
        t[hi] = -_phi_inv(self._rev.cdf(_phi(-z[hi])))
        return np.clip(t, -_T_MAX, _T_MAX)

    def degaussianize(self, t):
        """Inverse of :meth:`gaussianize`."""
        t = np.asarray(t, dtype=float)
        z = np.empty_like(t)
        lo = t <= 0
        z[lo] = _phi_inv(self.hist.quantile(_phi(t[lo])))
        hi = ~lo
        z[hi] = -_phi_inv(self._rev.quantile(_phi(-t[hi])))
        return self.pre_mean + self.pre_std * z

    def to_dict(self):
        return {"pre_mean": self.pre_mean, "pre_std": self.pre_std,
                "hist_edges": self.hist.edges.tolist(),
                "hist_densities": self.hist.densities.tolist()}

    @classmethod
    def from_dict(cls, payload):
        hist = Histogram1D(payload["hist_edges"], payload["hist_densities"])
        return cls(payload["pre_mean"], payload["pre_std"], hist)


def fit_univariate_density(samples, bins=40, alpha=1.0, std_floor=1e-8):
    """Gaussian-CDF preprocessing followed by an alpha-smoothed histogram.

    ``alpha`` pseudo-counts are added to each of ``bins`` equal-width bins on
    [0, 1], so every bin has positive density.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 1:
        raise ValueError("need at least one sample")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    mean = x.mean()
    std = max(x.std(), std_floor)
    u = _phi((x - mean) / std)
    return UnivariateDensity(mean, std, smoothed_histogram(u, bins, alpha))


def smoothed_histogram(u, bins=40, alpha=1.0):
    """Equal-width histogram of ``u`` on [0, 1] with ``alpha`` pseudo-counts per bin."""
    u = np.asarray(u, dtype=float).ravel()
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(u, bins=edges)
    masses = (counts + alpha) / (u.size + bins * alpha)
    return Histogram1D.from_masses(edges, masses)


def empirical_histogram(samples):
    """Histogram giving each distinct sample value its empirical mass.

    Bin edges sit at midpoints between consecutive distinct values, and
    the outer bins are mirrored, so every sample is the center of its bin
    and the quantile function interpolates the sorted samples.
    """
    vals, counts = np.unique(np.asarray(samples, dtype=float).ravel(),
                             return_counts=True)
    if vals.size < 2:
        raise ValueError("need at least two distinct values")
    mid = 0.5 * (vals[1:] + vals[:-1])
    edges = np.concatenate([[2 * vals[0] - mid[0]], mid, [2 * vals[-1] - mid[-1]]])
    return Histogram1D.from_masses(edges, counts / counts.sum())


def _merge_levels(levels, tol=1e-13):
    levels = np.unique(np.clip(np.concatenate(levels), 0.0, 1.0))
    keep = np.concatenate([[True], np.diff(levels) > tol])
    levels = levels[keep]
    levels[0], levels[-1] = 0.0, 1.0
    return levels


class PiecewiseLinearQuantile:
    """Monotone piecewise-linear quantile function through ``(levels, values)``."""

    def __init__(self, levels, values):
        self.levels = np.asarray(levels, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("values must be non-decreasing")

    def __call__(self, u):
        return np.interp(u, self.levels, self.values)

    def cdf(self, z):
        return np.interp(z, self.values, self.levels)

    def mass_levels(self):
        return self.levels


class AveragedQuantile:
    """Exact weighted average of composite-density quantile functions."""

    def __init__(self, densities, weights):
        self.densities = tuple(densities)
        self.weights = np.asarray(weights, dtype=float)

    def __call__(self, u):
        return sum(w * d.quantile(u) for w, d in zip(self.weights, self.densities))

    def from_gauss(self, t):
        t = np.asarray(t, dtype=float)
        return sum(w * d.degaussianize(t) for w, d in zip(self.weights, self.densities))

    def to_gauss(self, z, max_iter=200):
        """Solve ``from_gauss(t) = z`` for t by bisection.

        Each term ``degaussianize_j`` is increasing, so the solution is
        bracketed by the smallest and largest ``gaussianize_j(z)``.
        """
        z = np.asarray(z, dtype=float)
        ts = np.stack([d.gaussianize(z) for d in self.densities])
        lo, hi = ts.min(axis=0), ts.max(axis=0)
        for _ in range(max_iter):
            width = hi - lo
            active = width > 4e-16 * np.maximum(1.0, np.abs(lo))
            if not active.any():
                break
            mid = lo + 0.5 * width
            below = self.from_gauss(mid) < z
            lo = np.where(active & below, mid, lo)
            hi = np.where(active & ~below, mid, hi)
        return lo + 0.5 * (hi - lo)

    def cdf(self, z):
        return _phi(self.to_gauss(z))

    def mass_levels(self):
        return _merge_levels([d.mass_levels() for d in self.densities])

    def to_piecewise_linear(self, clip=1e-9):
        """Tabulate on the shared breakpoint grid, tails clipped to [clip, 1 - clip]."""
        u = np.clip(self.mass_levels(), clip, 1.0 - clip)
        u = np.unique(u)
        return PiecewiseLinearQuantile(u, self(u))


def barycenter_quantile(densities, weights=None):
    """Quantile function of the 1D Wasserstein barycenter.

    The barycenter quantile is the weighted average of the component
    quantiles. For histograms it is returned exactly as a
    :class:`PiecewiseLinearQuantile` on the union of all mass levels; for
    composite densities as an :class:`AveragedQuantile` evaluated exactly.
    """
    densities = list(densities)
    w = check_weights(weights, len(densities))
    if all(isinstance(d, Histogram1D) for d in densities):
        levels = _merge_levels([d.levels for d in densities])
        values = sum(wj * d.quantile(levels) for wj, d in zip(w, densities))
        values[0] = sum(wj * d.edges[0] for wj, d in zip(w, densities))
        values[-1] = sum(wj * d.edges[-1] for wj, d in zip(w, densities))
        return PiecewiseLinearQuantile(levels, values)
    return AveragedQuantile(densities, w)


def histogram_barycenter(hists, weights=None, merge=True):
    """Barycenter of 1D histograms, itself a histogram.

    Its edges are the barycenter quantiles of the union of all input mass
    levels, so it has at most as many edges as the inputs combined.
    """
    q = barycenter_quantile(hists, weights)
    edges, levels = q.values, q.levels
    masses = np.diff(levels)
    if merge and masses.size > 1:
        dens = masses / np.diff(edges)
        same = np.isclose(dens[1:], dens[:-1], rtol=1e-12, atol=0.0)
        keep = np.concatenate([[True], ~same, [True]])
        edges, levels = edges[keep], levels[keep]
        masses = np.diff(levels)
    return Histogram1D.from_masses(edges, masses)


class Monotone1DMap:
    """Increasing bijection of the real line given by a forward/inverse pair."""

    def __init__(self, forward, inverse):
        self._forward = forward
        self._inverse = inverse

    def forward(self, x):
        return self._forward(np.asarray(x, dtype=float))

    def inverse(self, z):
        return self._inverse(np.asarray(z, dtype=float))


class PiecewiseLinearMap(Monotone1DMap):
    """Increasing piecewise-linear bijection through knots ``(xs, ys)``.

    Outside ``[xs[0], xs[-1]]`` the map continues with unit slope.
    """

    def __init__(self, xs, ys):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if np.any(np.diff(self.xs) <= 0) or np.any(np.diff(self.ys) <= 0):
            raise ValueError("knots must be strictly increasing")

    @staticmethod
    def _eval(x, a, b):
        y = np.interp(x, a, b)
        y = np.where(x < a[0], b[0] + (x - a[0]), y)
        return np.where(x > a[-1], b[-1] + (x - a[-1]), y)

    def forward(self, x):
        return self._eval(np.asarray(x, dtype=float), self.xs, self.ys)

    def inverse(self, z):
        return self._eval(np.asarray(z, dtype=float), self.ys, self.xs)

    def is_identity(self):
        return np.array_equal(self.xs, self.ys)


def _same_density(a, b):
    return (a is b) or (a.pre_mean == b.pre_mean and a.pre_std == b.pre_std
                        and np.array_equal(a.hist.edges, b.hist.edges)
                        and np.array_equal(a.hist.densities, b.hist.densities))


def monge_1d(density, bary):
    """Monotone map ``F_bary^-1 o F_j`` from ``density`` onto the barycenter.

    Parameters
    ----------
    density : Histogram1D or UnivariateDensity
    bary : PiecewiseLinearQuantile or AveragedQuantile
        As returned by :func:`barycenter_quantile`.
    """
    if isinstance(density, Histogram1D) and isinstance(bary, PiecewiseLinearQuantile):
        levels = _merge_levels([density.levels, bary.levels])
        xs = density.quantile(levels)
        xs[0], xs[-1] = density.edges[0], density.edges[-1]
        ys = bary(levels)
        ys[0], ys[-1] = bary.values[0], bary.values[-1]
        return PiecewiseLinearMap(xs, ys)
    if isinstance(density, UnivariateDensity) and isinstance(bary, AveragedQuantile):
        if all(_same_density(d, density) for d in bary.densities):
            return Monotone1DMap(lambda x: x.copy(), lambda z: z.copy())
        return Monotone1DMap(lambda x: bary.from_gauss(density.gaussianize(x)),
                             lambda z: density.degaussianize(bary.to_gauss(z)))
    return Monotone1DMap(lambda x: bary(density.cdf(x)),
                         lambda z: density.quantile(bary.cdf(z)))
