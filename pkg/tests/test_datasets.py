import io

import numpy as np
import pytest

from barymap import DataError, GeneratorSpec, LabeledDataset, generate, generate_split
from barymap.datasets import GAUSSIAN_COVS, GAUSSIAN_MEANS, load_csv, write_csv


def test_moons_zero_noise_geometry():
    upper, lower = generate(GeneratorSpec("moons", n=4, noise=0.0, seed=1))
    np.testing.assert_allclose(np.hypot(*upper.T), 1.0)
    assert np.all(upper[:, 1] >= 0)
    np.testing.assert_allclose(np.hypot(lower[:, 0] - 1.0, lower[:, 1] - 0.5), 1.0)
    assert np.all(lower[:, 1] <= 0.5)


def test_circles_zero_noise_radii():
    outer, inner = generate(GeneratorSpec("circles", n=50, noise=0.0))
    np.testing.assert_allclose(np.hypot(*outer.T), 1.0)
    np.testing.assert_allclose(np.hypot(*inner.T), 0.5)


@pytest.mark.parametrize("kind", ["moons", "circles", "random_pattern", "gaussians"])
def test_seed_determinism_and_balance(kind):
    a_train, a_test = generate_split(kind, seed=5, n_train=30, n_test=10)
    b_train, _ = generate_split(kind, seed=5, n_train=30, n_test=10)
    for X, Y in zip(a_train, b_train):
        np.testing.assert_array_equal(X, Y)
    assert set(a_train.sizes) == {30} and set(a_test.sizes) == {10}
    c_train, _ = generate_split(kind, seed=6, n_train=30, n_test=10)
    assert not np.array_equal(a_train[0], c_train[0])


def test_default_sizes():
    train, test = generate_split("random_pattern", seed=0)
    assert train.k == 4 and train.sizes == (2666,) * 4 and test.sizes == (1334,) * 4


def test_random_pattern_centers_shared_across_splits():
    train, test = generate_split("random_pattern", seed=2, n_train=4000, n_test=4000, noise=0.0)
    for X, Y in zip(train, test):
        np.testing.assert_allclose(X.mean(0), Y.mean(0), atol=0.2)


def test_gaussian_setup_statistics():
    train, test = generate_split("gaussians", seed=0)
    assert train.sizes == (4000,) * 3 and test.sizes == (2000,) * 3
    for X, mu, cov in zip(train, GAUSSIAN_MEANS, GAUSSIAN_COVS):
        sd = np.sqrt(np.diag(cov))
        assert np.all(np.abs(X.mean(0) - mu) < 3 * sd / np.sqrt(4000))


def test_invalid_specs():
    with pytest.raises(ValueError):
        GeneratorSpec("moons", k=3)
    with pytest.raises(ValueError):
        GeneratorSpec("spirals")
    with pytest.raises(ValueError):
        GeneratorSpec("gaussians", n=0)
    with pytest.raises(ValueError):
        GeneratorSpec("moons", noise=-1)


def test_csv_roundtrip_bit_exact():
    train, _ = generate_split("moons", seed=3, n_train=25, n_test=1)
    buf = io.StringIO()
    write_csv(train, buf, header=True)
    buf.seek(0)
    back = load_csv(buf)
    for X, Y in zip(train, back):
        np.testing.assert_array_equal(X, Y)


def test_csv_label_order_and_k():
    back = load_csv(io.StringIO("0.5,2\n1.5,0\n2.5,1\n3.5,2\n"))
    assert back.k == 3 and back.labels == (0, 1, 2)
    np.testing.assert_array_equal(back[2][:, 0], [0.5, 3.5])


@pytest.mark.parametrize("text, match", [
    ("1,2,0\n3,1\n", "row 2"),
    ("1,2,0\n3,x,1\n", "row 2, column 2"),
    ("1,2,0\n3,4,\n", "row 2, column 3"),
    ("1,2,0\n3,4,0.5\n", "not an integer"),
    ("1,2,0\n3,4,0\n", "two class labels"),
    ("", "no data"),
])
def test_csv_errors(text, match):
    with pytest.raises(DataError, match=match):
        load_csv(io.StringIO(text))


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset((np.zeros((3, 2)),))
    with pytest.raises(ValueError):
        LabeledDataset((np.zeros((3, 2)), np.zeros((3, 3))))
    with pytest.raises(ValueError):
        LabeledDataset((np.zeros((3, 2)), np.full((3, 2), np.nan)))
