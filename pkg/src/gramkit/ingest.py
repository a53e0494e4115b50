"""Dataset ingestion: IDX image/label parsing, CSV loading, and the
construction of a validated training matrix.

The training matrix holds one observation per row and one observable per
column; for image data an observable is one pixel position, flattened
row-major. Files compressed with gzip are detected by their two magic
bytes and decompressed transparently.
"""

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import (
    EmptySelection,
    RankTooLarge,
    TruncatedFile,
    WrongMagic,
    ZeroDimension,
)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

NORMALIZATION_NONE = "none"
NORMALIZATION_UNIT = "unit-interval"
NORMALIZATION_SCALE = "per-element-scale"


@dataclass(frozen=True)
class TrainingMatrix:
    """Validated P x N training data.

    values : float64 array, observations in rows, observables in columns.
    normalization : one of the NORMALIZATION_* constants.
    scale : divisor applied per element when normalization is
        per-element-scale (1.0 otherwise).
    """

    values: np.ndarray
    normalization: str = NORMALIZATION_NONE
    scale: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("training matrix must be 2-d")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise EmptySelection("training matrix must be at least 1 x 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("training matrix contains NaN or Inf")
        if self.normalization == NORMALIZATION_UNIT:
            if values.min() < 0.0 or values.max() > 1.0:
                raise ValueError(
                    "unit-interval normalization violated: range [%g, %g]"
                    % (values.min(), values.max())
                )
        object.__setattr__(self, "values", values)

    @property
    def p(self):
        """Number of observations (rows)."""
        return self.values.shape[0]

    @property
    def n_obs(self):
        """Number of observables (columns)."""
        return self.values.shape[1]


@dataclass(frozen=True)
class DatasetConfig:
    """How to turn a raw source into a TrainingMatrix."""

    path: str = ""
    format: str = "idx"
    max_observations: int | None = None
    normalization: str = NORMALIZATION_UNIT
    scale: float = 255.0
    rank_reduce_to: int | None = field(default=None)

    def __post_init__(self):
        if self.format not in ("idx", "csv"):
            raise ValueError("format must be 'idx' or 'csv'")
        if self.max_observations is not None and self.max_observations < 1:
            raise EmptySelection("max_observations must be at least 1")
        if self.rank_reduce_to is not None and self.rank_reduce_to < 1:
            raise RankTooLarge("rank_reduce_to must be at least 1")


def _maybe_decompress(data):
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def parse_idx_images(data):
    """Parse an IDX image byte stream into a (count, rows, cols) uint8 tensor.

    Layout: big-endian int32 magic 2051, count, rows, cols, then one
    unsigned byte per pixel in row-major order.
    """
    data = _maybe_decompress(data)
    if len(data) < 4:
        raise TruncatedFile("image header needs 16 bytes, got %d" % len(data))
    magic = struct.unpack(">i", data[:4])[0]
    if magic != IMAGE_MAGIC:
        raise WrongMagic("expected image magic %d, got %d" % (IMAGE_MAGIC, magic))
    if len(data) < 16:
        raise TruncatedFile("image header needs 16 bytes, got %d" % len(data))
    count, rows, cols = struct.unpack(">iii", data[4:16])
    if count <= 0 or rows <= 0 or cols <= 0:
        raise ZeroDimension(
            "bad dimensions count=%d rows=%d cols=%d" % (count, rows, cols)
        )
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise TruncatedFile(
            "expected %d bytes for %d images of %dx%d, got %d"
            % (expected, count, rows, cols, len(data))
        )
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows, cols)


def parse_idx_labels(data):
    """Parse an IDX label byte stream into a (count,) uint8 vector."""
    data = _maybe_decompress(data)
    if len(data) < 4:
        raise TruncatedFile("label header needs 8 bytes, got %d" % len(data))
    magic = struct.unpack(">i", data[:4])[0]
    if magic != LABEL_MAGIC:
        raise WrongMagic("expected label magic %d, got %d" % (LABEL_MAGIC, magic))
    if len(data) < 8:
        raise TruncatedFile("label header needs 8 bytes, got %d" % len(data))
    count = struct.unpack(">i", data[4:8])[0]
    if count <= 0:
        raise ZeroDimension("bad label count %d" % count)
    if len(data) != 8 + count:
        raise TruncatedFile(
            "expected %d bytes for %d labels, got %d" % (8 + count, count, len(data))
        )
    return np.frombuffer(data, dtype=np.uint8, offset=8).copy()


def serialize_idx_images(tensor):
    """Inverse of parse_idx_images; used for round-trip checks and fixtures."""
    tensor = np.asarray(tensor, dtype=np.uint8)
    count, rows, cols = tensor.shape
    header = struct.pack(">iiii", IMAGE_MAGIC, count, rows, cols)
    return header + tensor.tobytes()


def serialize_idx_labels(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">ii", LABEL_MAGIC, labels.shape[0]) + labels.tobytes()


def read_idx_images(path):
    with open(path, "rb") as fh:
        return parse_idx_images(fh.read())


def read_idx_labels(path):
    with open(path, "rb") as fh:
        return parse_idx_labels(fh.read())


def read_csv_matrix(path):
    """Load a CSV matrix: comma separated, '.' decimal, optional header row."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        skip = 0
        for token in first.strip().split(","):
            try:
                float(token)
            except ValueError:
                skip = 1
                break
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2, dtype=float)
    return data


def build_training_matrix(raw, config=DatasetConfig()):
    """Flatten, truncate, and normalize raw data into a TrainingMatrix.

    raw may be a (count, rows, cols) image tensor or an already flat
    (P, N) matrix. The observation count is capped at
    config.max_observations; pixels are flattened row-major.
    """
    raw = np.asarray(raw)
    if raw.ndim == 3:
        flat = raw.reshape(raw.shape[0], raw.shape[1] * raw.shape[2])
    elif raw.ndim == 2:
        flat = raw
    else:
        raise ValueError("raw data must be 2-d or 3-d")
    count = flat.shape[0]
    take = count if config.max_observations is None else min(count, config.max_observations)
    if take < 1:
        raise EmptySelection("no observations selected")
    flat = np.asarray(flat[:take], dtype=float)

    norm = config.normalization
    if norm == NORMALIZATION_UNIT:
        flat = flat / 255.0
        scale = 255.0
    elif norm == NORMALIZATION_SCALE:
        flat = flat / config.scale
        scale = config.scale
    else:
        scale = 1.0
    matrix = TrainingMatrix(values=flat, normalization=norm, scale=scale)
    if config.rank_reduce_to is not None:
        matrix = reduce_observable_rank(matrix, config.rank_reduce_to)
    return matrix


def load_dataset(config):
    """Read config.path in the configured format and build the matrix."""
    if config.format == "idx":
        raw = read_idx_images(config.path)
    else:
        raw = read_csv_matrix(config.path)
    return build_training_matrix(raw, config)


def reduce_observable_rank(x, n_keep):
    """Project observations onto the span of the top n_keep eigen-observations.

    Returns a matrix of the same P x N shape with rank at most n_keep;
    the discarded Frobenius energy equals the sum of the dropped
    squared singular values.
    """
    values = spectral.matrix_values(x)
    n = values.shape[1]
    if not 1 <= n_keep <= n:
        raise RankTooLarge(
            "n_keep must lie in [1, %d], got %d" % (n, n_keep)
        )
    f = spectral.svd(values)
    keep = min(n_keep, f.m_rank)
    w_hat = f.w[:, :keep]
    reduced = values @ w_hat @ w_hat.T
    normalization = getattr(x, "normalization", NORMALIZATION_NONE)
    scale = getattr(x, "scale", 1.0)
    if normalization == NORMALIZATION_UNIT:
        # projection can step slightly outside [0, 1]; demote the tag
        # rather than silently clipping values
        normalization = NORMALIZATION_SCALE
    return TrainingMatrix(values=reduced, normalization=normalization, scale=scale)
