"""Shared fixtures: the bundled image sample and its spectral factors.

The repository ships the first 5000 MNIST training images as a gzipped
IDX file so the data-driven checks run offline. Point MNIST_DIR at a
directory holding the standard IDX files to run against a different or
larger sample; files matching *images-idx3-ubyte* are picked up.
"""

import gzip
import os
import pathlib
import struct

import pytest

from gramkit import ingest, spectral

DATA_DIR = pathlib.Path(__file__).resolve().parent / "data"
BUNDLED_IMAGES = DATA_DIR / "mnist5000-images-idx3-ubyte.gz"
BUNDLED_LABELS = DATA_DIR / "mnist5000-labels-idx1-ubyte.gz"


def idx_image_count(path):
    """Observation count from an IDX image header, 0 if unreadable."""
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        with opener(path, "rb") as fh:
            header = fh.read(16)
    except OSError:
        return 0
    if len(header) < 16:
        return 0
    magic, count, _, _ = struct.unpack(">iiii", header)
    return count if magic == ingest.IMAGE_MAGIC else 0


def image_file_candidates():
    paths = []
    env = os.environ.get("MNIST_DIR")
    if env:
        paths.extend(sorted(pathlib.Path(env).glob("*images-idx3-ubyte*")))
    paths.append(BUNDLED_IMAGES)
    return [p for p in paths if p.exists()]


@pytest.fixture(scope="session")
def mnist_matrix():
    """First 5000 images as a unit-interval training matrix."""
    for path in image_file_candidates():
        if idx_image_count(path) >= 5000:
            config = ingest.DatasetConfig(
                path=str(path), format="idx", max_observations=5000
            )
            return ingest.load_dataset(config)
    pytest.skip("no image sample with at least 5000 observations")


@pytest.fixture(scope="session")
def mnist_factors(mnist_matrix):
    return spectral.svd(mnist_matrix)


@pytest.fixture(scope="session")
def full_mnist_matrix():
    """The complete 60000-image training set, when a local copy exists."""
    for path in image_file_candidates():
        if idx_image_count(path) >= 60000:
            config = ingest.DatasetConfig(path=str(path), format="idx")
            return ingest.load_dataset(config)
    pytest.skip("full 60000-image set not available")
