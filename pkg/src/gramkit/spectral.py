"""Singular value decomposition of the training matrix with fixed conventions.

All spectral objects used elsewhere (eigen-observations, eigen-observables,
whitening, quasi square roots, reduced matrices) are derived from one
SvdFactors value, so ordering and sign conventions are decided exactly once.

The decomposition is computed through the eigendecomposition of the smaller
of the two Gram matrices, which keeps the cost at O(min(P, N)^3) even for
datasets with tens of thousands of observations.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, IndexOutOfRank

DEFAULT_CUTOFF = 1e-12


def matrix_values(x):
    """Return the dense float64 array behind x.

    Accepts either a bare array or any object with a ``values`` attribute
    (such as ingest.TrainingMatrix).
    """
    values = getattr(x, "values", x)
    return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD of a P x N matrix: x = v @ diag(lambdas) @ w.T.

    v : (P, m_rank) orthonormal columns (eigen-observables).
    lambdas : (m_rank,) strictly positive, non-increasing.
    w : (N, m_rank) orthonormal columns (eigen-observations).
    m_rank : number of singular values above cutoff * lambdas[0].
    cutoff : relative spectral cutoff used to decide the rank.

    Sign convention: in every column of w the entry of largest magnitude
    is positive, ties broken by the lowest index. The matching column of
    v is flipped together with it so the reconstruction is unchanged.
    """

    v: np.ndarray
    lambdas: np.ndarray
    w: np.ndarray
    m_rank: int
    cutoff: float

    @property
    def shape(self):
        return (self.v.shape[0], self.w.shape[0])


def _fix_signs(v, w):
    """Apply the deterministic sign convention in place, column by column."""
    for j in range(w.shape[1]):
        col = w[:, j]
        k = np.argmax(np.abs(col))
        # np.argmax already breaks ties by lowest index
        if col[k] < 0:
            w[:, j] = -col
            v[:, j] = -v[:, j]
    return v, w


def svd(x, cutoff=DEFAULT_CUTOFF):
    """Thin SVD with deterministic ordering and signs.

    Computed from the eigendecomposition of X.T @ X when P >= N, and of
    X @ X.T otherwise. Eigenvalues are clipped at zero before the square
    root; singular values at or below cutoff * lambda_max are dropped.
    """
    a = matrix_values(x)
    if a.ndim != 2:
        raise ValueError("expected a 2-d matrix, got ndim=%d" % a.ndim)
    p, n = a.shape
    try:
        if p >= n:
            evals, evecs = np.linalg.eigh(a.T @ a)
        else:
            evals, evecs = np.linalg.eigh(a @ a.T)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc

    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    lambdas = np.sqrt(evals)

    if lambdas.size == 0 or lambdas[0] == 0.0:
        m = 0
    else:
        m = int(np.sum(lambdas > cutoff * lambdas[0]))

    lambdas = lambdas[:m]
    if p >= n:
        w = evecs[:, :m]
        v = (a @ w) / lambdas if m else np.zeros((p, 0))
    else:
        v = evecs[:, :m]
        w = (a.T @ v) / lambdas if m else np.zeros((n, 0))

    v = np.ascontiguousarray(v, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    v, w = _fix_signs(v, w)
    return SvdFactors(v=v, lambdas=lambdas, w=w, m_rank=m, cutoff=cutoff)


def eigen_observations(f):
    """Columns w_i together with their Gram eigenvalues lambda_i^2.

    Each w_i is an eigenvector of X.T @ X with eigenvalue lambda_i^2.
    """
    return f.w, f.lambdas**2


def eigen_observables(f):
    """Columns v_i together with their Gram eigenvalues lambda_i^2.

    Each v_i is an eigenvector of X @ X.T; v_i equals X @ w_i / lambda_i.
    """
    return f.v, f.lambdas**2


def whiten(x, f):
    """Latent observables X @ W @ Lambda^{-1}; their Gram matrix is the identity."""
    a = matrix_values(x)
    return (a @ f.w) / f.lambdas


def dewhiten(latent, f):
    """Invert whiten: reconstruct observations as latent @ Lambda @ W.T."""
    latent = np.asarray(latent, dtype=float)
    return (latent * f.lambdas) @ f.w.T


def eigen_mapping(x, f, i):
    """The image X @ w_i of the i-th eigen-observation (0-based index).

    Equals lambda_i * v_i.
    """
    if not 0 <= i < f.m_rank:
        raise IndexOutOfRank(
            "index %d outside retained rank %d" % (i, f.m_rank)
        )
    a = matrix_values(x)
    return a @ f.w[:, i]


def quasi_sqrt(f):
    """Factor the Gram matrices: returns (h, h_prime).

    h = Lambda @ W.T satisfies h.T @ h = X.T @ X at full rank;
    h_prime = V @ Lambda satisfies h_prime @ h_prime.T = X @ X.T.
    Truncated factors obey h @ h.T = Lambda^2 and h_prime.T @ h_prime = Lambda^2
    exactly, because the cross terms cancel by orthonormality.
    """
    h = f.lambdas[:, None] * f.w.T
    h_prime = f.v * f.lambdas
    return h, h_prime


def top_eigenvalue_asymptotic(n, p, trials, seed):
    """Observed mean largest singular value of i.i.d. standard normal
    matrices of shape (p, n), against the predicted sqrt(n) + sqrt(p).

    Returns (observed_mean, predicted).
    """
    rng = np.random.default_rng(seed)
    observed = []
    for _ in range(trials):
        a = rng.standard_normal((p, n))
        observed.append(np.linalg.norm(a, 2))
    return float(np.mean(observed)), float(np.sqrt(n) + np.sqrt(p))


def cumulative_energy(f):
    """Cumulative fraction of sum(lambda^2) retained after each index."""
    sq = f.lambdas**2
    total = sq.sum()
    if total == 0.0:
        return np.zeros(0)
    return np.cumsum(sq) / total
