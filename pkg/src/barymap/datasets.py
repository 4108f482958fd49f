"""Seeded 2D synthetic class distributions and CSV sample I/O.

All randomness comes from :func:`barymap.base.substream`, i.e. Philox
generators keyed by the master seed and a stream name, so datasets are
reproducible across runs and platforms.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .base import DataError, LabeledDataset, substream

# per-class (train, test) sizes of the 2D experiments
DEFAULT_SIZES = {
    "moons": (2000, 1000),
    "circles": (2000, 1000),
    "random_pattern": (2666, 1334),
    "gaussians": (4000, 2000),
}

GAUSSIAN_MEANS = ((0.0, 0.0), (4.0, 0.0), (1.0, 3.5))
GAUSSIAN_COVS = (((1.0, 0.0), (0.0, 1.0)),
                 ((2.0, 0.6), (0.6, 0.5)),
                 ((0.5, -0.3), (-0.3, 1.5)))


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a synthetic dataset.

    ``n`` is the number of samples per class. ``means``/``covs`` apply to
    ``kind="gaussians"`` only; ``spread`` is the isotropic std of the
    ``random_pattern`` clusters.
    """

    kind: str = "moons"
    n: int = 1000
    k: int = 2
    noise: float = 0.1
    seed: int = 0
    means: tuple = None
    covs: tuple = None
    spread: float = 0.5
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULT_SIZES:
            raise ValueError("unknown generator kind %r" % self.kind)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.kind in ("moons", "circles") and self.k != 2:
            raise ValueError("%s requires k=2" % self.kind)
        if self.k < 2:
            raise ValueError("k must be >= 2")


def _moons(spec, rng):
    theta = [rng.uniform(0.0, np.pi, spec.n) for _ in range(2)]
    upper = np.column_stack([np.cos(theta[0]), np.sin(theta[0])])
    lower = np.column_stack([1.0 - np.cos(theta[1]), 0.5 - np.sin(theta[1])])
    return [upper, lower]


def _circles(spec, rng):
    out = []
    for radius in (1.0, 0.5):
        theta = rng.uniform(0.0, 2 * np.pi, spec.n)
        out.append(radius * np.column_stack([np.cos(theta), np.sin(theta)]))
    return out


def _random_pattern(spec, rng, centers_rng):
    out = []
    for _ in range(spec.k):
        centers = centers_rng.uniform(-3.0, 3.0, size=(2, 2))
        comp = rng.integers(0, 2, spec.n)
        out.append(centers[comp] + spec.spread * rng.standard_normal((spec.n, 2)))
    return out


def _gaussians(spec, rng):
    means = spec.means if spec.means is not None else GAUSSIAN_MEANS[:spec.k]
    covs = spec.covs if spec.covs is not None else GAUSSIAN_COVS[:spec.k]
    if len(means) != spec.k or len(covs) != spec.k:
        raise ValueError("need k means and k covariances")
    out = []
    for mu, cov in zip(means, covs):
        L = np.linalg.cholesky(np.asarray(cov, dtype=float))
        out.append(np.asarray(mu, dtype=float) + rng.standard_normal((spec.n, len(mu))) @ L.T)
    return out


def generate(spec, split="train"):
    """Draw one balanced dataset; ``split`` names an independent sub-stream."""
    rng = substream(spec.seed, "dataset/" + split)
    if spec.kind == "moons":
        classes = _moons(spec, rng)
    elif spec.kind == "circles":
        classes = _circles(spec, rng)
    elif spec.kind == "random_pattern":
        # cluster centers are shared by every split
        classes = _random_pattern(spec, rng, substream(spec.seed, "dataset/centers"))
    else:
        classes = _gaussians(spec, rng)
    if spec.kind != "gaussians" and spec.noise > 0:
        classes = [X + spec.noise * rng.standard_normal(X.shape) for X in classes]
    return LabeledDataset(tuple(classes))


def generate_split(kind, seed=0, n_train=None, n_test=None, **kwargs):
    """Train and test datasets from independent sub-streams.

    Sizes default to :data:`DEFAULT_SIZES`. For ``random_pattern`` the
    default is k=4, otherwise k=2 (k=3 for ``gaussians``).
    """
    default_train, default_test = DEFAULT_SIZES[kind]
    k = kwargs.pop("k", {"random_pattern": 4, "gaussians": 3}.get(kind, 2))
    base = dict(kind=kind, k=k, seed=seed, **kwargs)
    train = generate(GeneratorSpec(n=n_train or default_train, **base), "train")
    test = generate(GeneratorSpec(n=n_test or default_test, **base), "test")
    return train, test


def _parse_rows(reader):
    rows = []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        rows.append((lineno, row))
    return rows


def read_csv(source):
    """Parse samples from CSV text rows: d floats then an integer label.

    A first row whose cells are not all numeric is treated as a header.
    Classes are ordered by ascending label.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = _parse_rows(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("no data rows")
    try:
        [float(c) for c in rows[0][1]]
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise DataError("no data rows after header")
    width = len(rows[0][1])
    if width < 2:
        raise DataError("row %d: need at least one feature and a label" % rows[0][0])
    feats, labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise DataError("row %d: expected %d columns, got %d" % (lineno, width, len(row)))
        values = []
        for col, cell in enumerate(row[:-1], start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise DataError("row %d, column %d: non-numeric value %r"
                                % (lineno, col, cell)) from None
        cell = row[-1].strip()
        if not cell:
            raise DataError("row %d, column %d: missing label" % (lineno, width))
        try:
            label = float(cell)
        except ValueError:
            raise DataError("row %d, column %d: non-numeric label %r"
                            % (lineno, width, cell)) from None
        if label != int(label):
            raise DataError("row %d, column %d: label %r is not an integer"
                            % (lineno, width, cell))
        feats.append(values)
        labels.append(int(label))
    feats = np.array(feats, dtype=float)
    labels = np.array(labels)
    uniq = np.unique(labels)
    return feats, labels, uniq


def load_csv(source):
    """Load a :class:`LabeledDataset` from a CSV path or text file object."""
    feats, labels, uniq = read_csv(source)
    if uniq.size < 2:
        raise DataError("need at least two class labels, found %d" % uniq.size)
    return LabeledDataset(tuple(feats[labels == u] for u in uniq), tuple(uniq))


def write_csv(dataset, sink, header=False):
    """Write one row per sample, last column the class label.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(["x%d" % i for i in range(dataset.d)] + ["label"])
        for label, X in zip(dataset.labels, dataset.classes):
            for row in X:
                w.writerow([repr(float(v)) for v in row] + [label])

    if hasattr(sink, "write"):
        emit(sink)
    else:
        with open(sink, "w", newline="") as fh:
            emit(fh)


def write_points(points, sink, labels=None):
    """Write a bare sample matrix (optionally with a label column)."""
    w = csv.writer(sink, lineterminator="\n")
    for i, row in enumerate(np.asarray(points, dtype=float)):
        cells = [repr(float(v)) for v in row]
        if labels is not None:
            cells.append(labels[i])
        w.writerow(cells)
