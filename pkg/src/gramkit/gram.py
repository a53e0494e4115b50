"""Gram matrices, overlaps, conjugates, projections, and the metric families.

Both Gram matrices of a training matrix X are kept together: g = X.T @ X
holds the pairwise overlaps of observables (columns), g_prime = X @ X.T the
pairwise overlaps of observations (rows). Inverse-metric objects use a
spectral pseudo-inverse with a relative cutoff, so rank-deficient inputs
degrade to projections instead of blowing up.
"""

from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import DimensionMismatch
from .spectral import DEFAULT_CUTOFF, matrix_values

# Relative eigenvalue floor below which a conditioning diagnostic fires.
PRECISION_FLOOR = 1e-14


@dataclass(frozen=True)
class GramPair:
    """g: N x N observables Gram; g_prime: P x P observations Gram."""

    g: np.ndarray
    g_prime: np.ndarray


@dataclass(frozen=True)
class ProjectionPair:
    """Orthogonal projectors onto the training subspaces.

    p_prime : P x P projector onto the span of the observable columns,
        acting on observable-like vectors indexed by observations.
    p : N x N projector onto the span of the observation rows.
    pseudo_rank : rank retained by the spectral pseudo-inverse; equals
        the trace of either projector up to round-off.
    """

    p_prime: np.ndarray
    p: np.ndarray
    pseudo_rank: int


def gram_matrices(x):
    """Both Gram matrices of the training matrix."""
    a = matrix_values(x)
    return GramPair(g=a.T @ a, g_prime=a @ a.T)


def pseudo_inverse(a, cutoff=DEFAULT_CUTOFF):
    """Spectral pseudo-inverse of a symmetric PSD matrix.

    Eigenvalues at or below cutoff * max eigenvalue are treated as zero.
    Returns (inverse, retained_rank, conditioning_warning). The warning
    flags retained eigenvalues within PRECISION_FLOOR of the top one,
    where double precision starts to lose the inversion.
    """
    a = np.asarray(a, dtype=float)
    evals, evecs = np.linalg.eigh(a)
    evals = np.clip(evals, 0.0, None)
    top = evals.max(initial=0.0)
    if top == 0.0:
        return np.zeros_like(a), 0, False
    keep = evals > cutoff * top
    rank = int(keep.sum())
    kept = evals[keep]
    warning = bool(np.any(kept < PRECISION_FLOOR * top))
    inv = (evecs[:, keep] / kept) @ evecs[:, keep].T
    return inv, rank, warning


def observation_overlaps(x, q_prime):
    """Overlap of a candidate observation q_prime with every training row.

    Component mu is the Euclidean inner product of row x_mu with q_prime;
    the whole vector is X @ q_prime.
    """
    a = matrix_values(x)
    q_prime = np.asarray(q_prime, dtype=float)
    if q_prime.shape != (a.shape[1],):
        raise DimensionMismatch(
            "expected an observation of length %d, got %s"
            % (a.shape[1], q_prime.shape)
        )
    return a @ q_prime


def observable_overlaps(x, q):
    """Overlap of a candidate observable q with every training column: X.T @ q."""
    a = matrix_values(x)
    q = np.asarray(q, dtype=float)
    if q.shape != (a.shape[0],):
        raise DimensionMismatch(
            "expected an observable of length %d, got %s" % (a.shape[0], q.shape)
        )
    return a.T @ q


def conjugate(x, vector, side="observation", cutoff=DEFAULT_CUTOFF):
    """Image of a vector under the inverse Gram metric.

    side "observation": vector has length N, returns pinv(X.T @ X) @ vector.
    side "observable": vector has length P, returns pinv(X @ X.T) @ vector.
    Feeding the result through the two training mappings recovers the
    projection of the input onto the training subspace.
    """
    a = matrix_values(x)
    vector = np.asarray(vector, dtype=float)
    if side == "observation":
        if vector.shape != (a.shape[1],):
            raise DimensionMismatch(
                "observation-side vector must have length %d" % a.shape[1]
            )
        inv, _, _ = pseudo_inverse(a.T @ a, cutoff)
    elif side == "observable":
        if vector.shape != (a.shape[0],):
            raise DimensionMismatch(
                "observable-side vector must have length %d" % a.shape[0]
            )
        inv, _, _ = pseudo_inverse(a @ a.T, cutoff)
    else:
        raise ValueError("side must be 'observation' or 'observable'")
    return inv @ vector


def conjugate_matrices(x, cutoff=DEFAULT_CUTOFF):
    """Both conjugate training matrices, each of shape P x N.

    Row mu of the first output is the conjugate of the observation x_mu,
    so the first output is X @ pinv(X.T @ X); its transpose is the left
    inverse of X at full column rank. The second output is
    pinv(X @ X.T) @ X, whose transpose is the right inverse of X at full
    row rank.
    """
    a = matrix_values(x)
    inv_g, _, _ = pseudo_inverse(a.T @ a, cutoff)
    inv_gp, _, _ = pseudo_inverse(a @ a.T, cutoff)
    return a @ inv_g, inv_gp @ a


def projections(x, cutoff=DEFAULT_CUTOFF):
    """Orthogonal projectors onto the training subspaces.

    p_prime = X @ pinv(X.T X) @ X.T and p = X.T @ pinv(X X.T) @ X, computed
    through the thin SVD: both reduce to V @ V.T and W @ W.T over the
    retained rank, which is numerically cleaner than forming the inverses.
    """
    f = spectral.svd(x, cutoff)
    return ProjectionPair(
        p_prime=f.v @ f.v.T,
        p=f.w @ f.w.T,
        pseudo_rank=f.m_rank,
    )


def rss(pp):
    """Residual sum of squares of regressing each unit observation vector
    on the training observables: P - trace(p_prime)."""
    return float(pp.p_prime.shape[0] - np.trace(pp.p_prime))


def inner(u, v, kind="euclidean", side="observation", gram_pair=None,
          cutoff=DEFAULT_CUTOFF):
    """Inner product of two vectors under one of the three metric families.

    kind "euclidean": plain dot product.
    kind "training": u @ g @ v on the observation side (length-N vectors),
        u @ g_prime @ v on the observable side (length-P vectors).
    kind "conjugate": same with the pseudo-inverse of the Gram matrix.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch("vectors differ in shape: %s vs %s"
                                % (u.shape, v.shape))
    if kind == "euclidean":
        return float(u @ v)
    if gram_pair is None:
        raise ValueError("training metrics need a GramPair")
    metric = gram_pair.g if side == "observation" else gram_pair.g_prime
    if u.shape != (metric.shape[0],):
        raise DimensionMismatch(
            "%s-side vectors must have length %d" % (side, metric.shape[0])
        )
    if kind == "training":
        return float(u @ metric @ v)
    if kind == "conjugate":
        inv, _, _ = pseudo_inverse(metric, cutoff)
        return float(u @ inv @ v)
    raise ValueError("unknown metric kind %r" % kind)


def pearson(x, rows_as_variables=False):
    """Pearson correlation matrix with 95 percent confidence half-widths.

    Variables are columns by default; set rows_as_variables to correlate
    observations instead. Confidence intervals use the Fisher
    z-transform with the non-variable dimension as the sample size.
    Zero-variance variables yield NaN rows and columns (off-diagonal)
    rather than an error.
    """
    a = matrix_values(x)
    if rows_as_variables:
        a = a.T
    samples, nvar = a.shape
    if samples < 3:
        raise DimensionMismatch(
            "need at least 3 samples per variable, got %d" % samples
        )
    centered = a - a.mean(axis=0)
    std = centered.std(axis=0)
    degenerate = std == 0.0
    safe_std = np.where(degenerate, 1.0, std)
    z = centered / safe_std
    corr = (z.T @ z) / samples
    corr = np.clip(corr, -1.0, 1.0)
    corr[degenerate, :] = np.nan
    corr[:, degenerate] = np.nan
    np.fill_diagonal(corr, 1.0)

    # Fisher z confidence interval, clamped away from |r| = 1
    r = np.clip(corr, -0.999999999, 0.999999999)
    fisher = np.arctanh(r)
    # at exactly 3 samples the interval is the whole range; inf is fine here
    with np.errstate(divide="ignore"):
        half = 1.959963984540054 / np.sqrt(samples - 3)
    width = (np.tanh(fisher + half) - np.tanh(fisher - half)) / 2.0
    width[np.isnan(corr)] = np.nan
    np.fill_diagonal(width, 0.0)
    return corr, width


def training_graph(gp, threshold=0.0):
    """Adjacency and weighted degrees of the observation overlap graph.

    An edge joins observations mu and nu (mu != nu) when their overlap
    g_prime[mu, nu] exceeds the threshold. The weighted degree of mu is
    the total squared overlap with the rest of the training set, with
    the self-loop removed: sum_nu g_prime[mu, nu]^2 - g_prime[mu, mu]^2.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    gprime = np.asarray(gp.g_prime, dtype=float)
    adjacency = gprime > threshold
    np.fill_diagonal(adjacency, False)
    degrees = (gprime**2).sum(axis=1) - np.diag(gprime) ** 2
    return adjacency, degrees
